"""Online correction study: fixed against explanation-weighted updates over seeded simulated humans."""

import logging
import os
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from classes.beta_estimator import BetaEstimatorConfig, ExplanationModel
from classes.constants import *
from classes.environment import CorrectionEvent, FeatureConfig
from classes.errors import ConfigError, InfeasibleCorrectionError
from classes.features import compute_features
from classes.file_handler import save_csv
from classes.helper import derive_seeds, weights_from_mapping, weights_to_mapping
from classes.online_learner import (
    OnlineLearner,
    OnlineLearnerState,
    history_to_frame,
    initial_state,
    run_episode,
    theta_path_length,
)
from classes.optimizer import optimize_trajectory
from classes.sim_human import TrueCost, simulate_correction, true_cost_from_weights
from classes.theta_update import ThetaUpdateConfig
from services.experiment_service import CorrectionTask, ExperimentContext, MetricsReport

logger = logging.getLogger(__name__)


@dataclass
class EpisodeResult:
    task: str
    mode: str
    seed: int
    state: OnlineLearnerState
    regret: Dict[str, float]
    path_length: float
    corrections: int

    def to_row(self) -> dict:
        row = {'task': self.task, 'mode': self.mode, 'seed': self.seed,
               'path_length': self.path_length, 'corrections': self.corrections}
        row.update({f'regret_{name}': value for name, value in self.regret.items()})
        history = history_to_frame(self.state)
        row['mean_beta_hat'] = float(history['beta_hat'].mean()) if len(history) else float('nan')
        row['mean_p_explained'] = float(history['p_explained'].mean()) if len(history) else float('nan')
        return row


def resolve_feature_precision(context: ExperimentContext, model: Optional[ExplanationModel]) -> float:
    """ν from the experiment if set, else from the calibrated model, else the default."""
    if context.config.nu is not None:
        return context.config.nu
    if model is not None and model.feature_precision is not None:
        return float(model.feature_precision)
    return FEATURE_PRECISION


def build_learner(context: ExperimentContext, mode: str, model: Optional[ExplanationModel]) -> OnlineLearner:
    config = context.config
    return OnlineLearner(
        env=context.env,
        features=context.features,
        operator=context.operator,
        mode=mode,
        model=model,
        beta_config=BetaEstimatorConfig(effort_weight=config.effort_weight, action_dim=context.env.n),
        update_config=ThetaUpdateConfig(alpha=config.alpha, nu=resolve_feature_precision(context, model)),
    )


def regret_features(true_cost: TrueCost, modeled: FeatureConfig) -> FeatureConfig:
    """Every feature the human or the robot cares about, in canonical order."""
    names = [name for name in ALL_FEATURES if name in true_cost.feature_config.features or name in modeled.features]
    return true_cost.feature_config.with_features(names)


def feature_regret(ideal: np.ndarray, actual: np.ndarray, context: ExperimentContext, cfg: FeatureConfig) -> Dict[str, float]:
    """|Φ(ideal) − Φ(actual)| per feature, plus their sum under 'total'."""
    gaps = np.abs(compute_features(ideal, context.env, cfg) - compute_features(actual, context.env, cfg))
    regret = {name: float(gap) for name, gap in zip(cfg.features, gaps)}
    regret['total'] = float(gaps.sum())
    return regret


def run_task_episode(
    task: CorrectionTask,
    context: ExperimentContext,
    mode: str,
    seed: int,
    model: Optional[ExplanationModel] = None,
    ideal: Optional[np.ndarray] = None
) -> EpisodeResult:
    """
    One interaction: the robot executes its plan and the simulated human pushes
    at the task's timesteps; the robot learns online and replans.

    Args:
        task: Correction task
        context: Loaded experiment
        mode: fixed or adaptive
        seed: Seed of the human's effort noise
        model: Explanation model (required for adaptive)
        ideal: Trajectory optimal for the true cost, computed when not given

    Returns:
        EpisodeResult with per-feature regret and θ̂ path length
    """
    env, modeled = context.env, context.features
    learner = build_learner(context, mode, model)
    true_cost = true_cost_from_weights(task.true_weights, context.trajectory_set,
                                       task.rationality, context.config.effort_weight)
    if ideal is None:
        ideal = optimize_trajectory(true_cost.theta, env, true_cost.feature_config).trajectory

    rng = np.random.default_rng(seed)

    def correction_source(state: OnlineLearnerState) -> Optional[CorrectionEvent]:
        t = state.timestep
        if t not in task.timesteps or not 0 < t < env.T:
            return None
        try:
            event = simulate_correction(true_cost, state.trajectory, t, task.style, task.magnitude,
                                        env, context.operator, modeled, rng=rng)
        except InfeasibleCorrectionError as e:
            logger.warning(f'{task.name}: no {task.style} correction possible at t={t}: {e}')
            return None
        return event

    state = run_episode(initial_state(weights_from_mapping(task.initial_weights, modeled.features), learner),
                        learner, correction_source, skip_infeasible=True)

    return EpisodeResult(
        task=task.name,
        mode=mode,
        seed=seed,
        state=state,
        regret=feature_regret(ideal, state.trajectory, context, regret_features(true_cost, modeled)),
        path_length=theta_path_length(state),
        corrections=len(state.theta_path) - 1,
    )


def _mean_and_std(frame: pd.DataFrame, columns: Sequence[str]):
    means = {column.replace('regret_', ''): float(frame[column].mean()) for column in columns}
    stds = {column.replace('regret_', ''): float(frame[column].std(ddof=0)) for column in columns}
    return means, stds


def run_correction_study(
    context: ExperimentContext,
    model: Optional[ExplanationModel],
    out_dir: Optional[str] = None,
    modes: Optional[Sequence[str]] = None,
    seeds_per_task: Optional[int] = None,
    save_histories: bool = False
) -> MetricsReport:
    """
    Run every correction task in every mode over paired seeds.

    Both modes of a task share each seed, so their noise draws line up and the
    adaptive-minus-fixed regret difference is paired.

    Raises:
        ConfigError: if no explanation model is available
    """
    config = context.config
    if model is None:
        raise ConfigError('The correction study needs a calibrated explanation model; run calibrate-beta first',
                          config.explanation_model_path or config.path, 'explanation_model')
    modes = list(modes or config.modes)
    seeds_per_task = seeds_per_task or config.seeds_per_task

    report = MetricsReport(kind='correction_study', seed=config.seed, settings={
        'modes': modes,
        'seeds_per_task': seeds_per_task,
        'alpha': config.alpha,
        'feature_precision': resolve_feature_precision(context, model),
        'set_size': len(context.trajectory_set),
    })
    rows: List[dict] = []
    histories: List[pd.DataFrame] = []
    task_seeds = derive_seeds(config.seed, max(len(config.correction_tasks), 1))

    for task, task_seed in zip(config.correction_tasks, task_seeds):
        true_cost = true_cost_from_weights(task.true_weights, context.trajectory_set, task.rationality)
        ideal = optimize_trajectory(true_cost.theta, context.env, true_cost.feature_config).trajectory
        for seed in derive_seeds(task_seed, seeds_per_task):
            for mode in modes:
                result = run_task_episode(task, context, mode, seed, model, ideal)
                rows.append({**result.to_row(), 'explained': task.explained})
                if save_histories:
                    history = history_to_frame(result.state)
                    history.insert(0, 'seed', seed)
                    history.insert(0, 'mode', mode)
                    history.insert(0, 'task', task.name)
                    histories.append(history)
        logger.info(f'Finished task {task.name} ({seeds_per_task} seeds × {len(modes)} modes)')

    if not rows:
        return report

    runs = pd.DataFrame(rows)
    regret_columns = [column for column in runs.columns if column.startswith('regret_')]
    for task_name, task_rows in runs.groupby('task', sort=True):
        report.regret[task_name], report.regret_std[task_name] = {}, {}
        report.path_length[task_name] = {}
        for mode, mode_rows in task_rows.groupby('mode', sort=True):
            columns = [c for c in regret_columns if mode_rows[c].notna().any()]
            report.regret[task_name][mode], report.regret_std[task_name][mode] = _mean_and_std(mode_rows, columns)
            report.path_length[task_name][mode] = {
                'mean': float(mode_rows['path_length'].mean()),
                'std': float(mode_rows['path_length'].std(ddof=0)),
            }
        if MODE_FIXED in modes and MODE_ADAPTIVE in modes:
            paired = task_rows.pivot(index='seed', columns='mode')
            columns = [c for c in regret_columns if task_rows[c].notna().any()]
            report.regret_difference[task_name] = {
                column.replace('regret_', ''): float((paired[column][MODE_ADAPTIVE] - paired[column][MODE_FIXED]).mean())
                for column in columns
            }

    for explained, condition_rows in runs.groupby('explained', sort=True):
        label = 'well_explained' if explained else 'poorly_explained'
        report.mean_beta_hat[label] = {
            mode: float(mode_rows['mean_beta_hat'].mean())
            for mode, mode_rows in condition_rows.groupby('mode', sort=True)
        }

    if out_dir is not None:
        save_csv(runs, out_dir, CORRECTION_RUNS_FILE_NAME)
        if histories:
            save_csv(pd.concat(histories, ignore_index=True), os.path.join(out_dir, HISTORY_FOLDER_NAME),
                     'correction_study_histories.csv')
    return report


def run_online(
    context: ExperimentContext,
    model: Optional[ExplanationModel],
    mode: str,
    out_dir: str,
    seed: Optional[int] = None
) -> MetricsReport:
    """Run each correction task once in one mode and write its interaction history."""
    config = context.config
    if mode == MODE_ADAPTIVE and model is None:
        raise ConfigError('Adaptive updates need a calibrated explanation model; run calibrate-beta first',
                          config.explanation_model_path or config.path, 'explanation_model')
    seed = config.seed if seed is None else seed

    report = MetricsReport(kind='online', seed=seed, settings={
        'mode': mode,
        'alpha': config.alpha,
        'feature_precision': resolve_feature_precision(context, model),
    })
    for task in config.correction_tasks:
        result = run_task_episode(task, context, mode, seed, model)
        file_name = f'{task.name}_{mode}.csv'
        save_csv(history_to_frame(result.state), os.path.join(out_dir, HISTORY_FOLDER_NAME), file_name)
        report.regret[task.name] = {mode: result.regret}
        report.path_length[task.name] = {mode: {'mean': result.path_length, 'std': 0.0}}
        report.scenario_summaries[task.name] = {
            'history': f'{HISTORY_FOLDER_NAME}/{file_name}',
            'corrections': result.corrections,
            'final_theta': weights_to_mapping(result.state.theta, context.features.features),
        }
        logger.info(f'{task.name} ({mode}): regret={result.regret["total"]:.4f}, path={result.path_length:.4f}')
    return report
