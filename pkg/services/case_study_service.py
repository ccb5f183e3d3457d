"""Demonstration case studies: simulated populations, single and pooled posteriors."""

import logging
import os
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from classes.constants import *
from classes.demo_inference import (
    JointBelief,
    MisspecificationPolicy,
    build_default_grids,
    calibrate_threshold,
    grids_to_dict,
    misspecification_flag,
    posterior_to_frame,
    summarize_belief,
    uniform_belief,
    update_belief,
    update_belief_batch,
)
from classes.file_handler import save_csv, save_json
from classes.helper import derive_seeds
from classes.sim_human import simulate_demonstration, true_cost_from_weights
from services.experiment_service import DemoScenario, ExperimentContext, MetricsReport

logger = logging.getLogger(__name__)


def jittered_weights(weights: Dict[str, float], jitter: float, rng: np.random.Generator) -> Dict[str, float]:
    """Scale each positive weight by a log-normal factor so simulated humans differ slightly."""
    return {
        name: float(value * np.exp(jitter * rng.standard_normal())) if value > 0 else 0.0
        for name, value in sorted(weights.items())
    }


def simulate_scenario_demos(scenario: DemoScenario, context: ExperimentContext, seed: int) -> List[np.ndarray]:
    """One demonstration per simulated human of the scenario's population."""
    demos = []
    for demo_seed in derive_seeds(seed, scenario.demos):
        rng = np.random.default_rng(demo_seed)
        weights = jittered_weights(scenario.true_weights, scenario.weight_jitter, rng)
        true_cost = true_cost_from_weights(weights, context.trajectory_set, scenario.rationality)
        demos.append(simulate_demonstration(
            true_cost, context.env, context.trajectory_set, demo_seed, initial_lift=scenario.initial_lift
        ))
    return demos


def infer_scenario(
    scenario: DemoScenario,
    context: ExperimentContext,
    seed: int
) -> Tuple[List[JointBelief], JointBelief]:
    """
    Posterior after each single demonstration and after pooling all of them.

    Returns:
        (single-demo beliefs, pooled belief)
    """
    theta_grid, beta_grid = build_default_grids(context.features.dimension)
    prior = uniform_belief(theta_grid, beta_grid)
    demos = simulate_scenario_demos(scenario, context, seed)
    singles = [update_belief(prior, demo, context.trajectory_set) for demo in demos]
    pooled = update_belief_batch(prior, demos, context.trajectory_set)
    return singles, pooled


def _write_posteriors(name: str, singles: Sequence[JointBelief], pooled: JointBelief,
                      feature_names: List[str], out_dir: str) -> List[str]:
    folder = os.path.join(out_dir, POSTERIOR_FOLDER_NAME)
    paths = []
    for index, belief in enumerate(singles):
        file_name = f'{name}_demo{index:02d}.csv'
        save_csv(posterior_to_frame(belief, feature_names), folder, file_name)
        paths.append(f'{POSTERIOR_FOLDER_NAME}/{file_name}')
    file_name = f'{name}_pooled.csv'
    save_csv(posterior_to_frame(pooled, feature_names), folder, file_name)
    paths.append(f'{POSTERIOR_FOLDER_NAME}/{file_name}')
    return paths


def _choose_threshold(context: ExperimentContext, scenarios: Sequence[DemoScenario],
                      pooled: Dict[str, JointBelief]) -> float:
    config = context.config
    if not config.calibrate_threshold:
        return config.misspecification_threshold
    explained = [pooled[s.name] for s in scenarios if s.expect_misspecified is False]
    misspecified = [pooled[s.name] for s in scenarios if s.expect_misspecified is True]
    if not explained or not misspecified:
        logger.warning('Threshold calibration needs labeled explained and misspecified scenarios; '
                       f'keeping ε={config.misspecification_threshold}')
        return config.misspecification_threshold
    threshold = calibrate_threshold(explained, misspecified, config.misspecification_threshold)
    logger.info(f'Calibrated misspecification threshold ε={threshold}')
    return threshold


def run_demo_case_study(
    context: ExperimentContext,
    out_dir: str,
    scenario_names: Optional[Sequence[str]] = None,
    kind: str = 'demo_case_study'
) -> MetricsReport:
    """
    Run every demonstration scenario and write its posteriors.

    Each scenario's population demonstrates one at a time (a posterior per
    demonstration) and all together (the pooled posterior). The pooled posterior
    decides the misspecification flag.

    Args:
        context: Loaded experiment
        out_dir: Output folder for posterior CSVs and the grids file
        scenario_names: Restrict to these scenarios (all when None)
        kind: Report label

    Returns:
        MetricsReport with posterior paths, flags and per-scenario summaries
    """
    config = context.config
    scenarios = config.demo_scenarios
    if scenario_names is not None:
        known = {s.name for s in scenarios}
        missing = [name for name in scenario_names if name not in known]
        if missing:
            raise ValueError(f'Unknown demo scenarios {missing}; configured: {sorted(known)}')
        scenarios = [s for s in scenarios if s.name in scenario_names]

    feature_names = list(context.features.features)
    report = MetricsReport(kind=kind, seed=config.seed, settings={
        'set_size': len(context.trajectory_set),
        'features': feature_names,
        'normalizers': context.features.normalizers,
    })
    if not scenarios:
        logger.info('No demonstration scenarios configured')
        return report

    theta_grid, beta_grid = build_default_grids(len(feature_names))
    save_json(grids_to_dict(theta_grid, beta_grid, feature_names), out_dir, GRIDS_FILE_NAME)

    scenario_seeds = dict(zip([s.name for s in config.demo_scenarios], derive_seeds(config.seed, len(config.demo_scenarios))))
    singles: Dict[str, List[JointBelief]] = {}
    pooled: Dict[str, JointBelief] = {}
    for scenario in scenarios:
        logger.info(f'Scenario {scenario.name}: {scenario.demos} simulated demonstrations')
        singles[scenario.name], pooled[scenario.name] = infer_scenario(scenario, context, scenario_seeds[scenario.name])
        report.posterior_paths[scenario.name] = _write_posteriors(
            scenario.name, singles[scenario.name], pooled[scenario.name], feature_names, out_dir
        )

    policy = MisspecificationPolicy(_choose_threshold(context, scenarios, pooled))
    report.settings['misspecification_threshold'] = policy.threshold

    for scenario in scenarios:
        summary = summarize_belief(pooled[scenario.name], feature_names, policy)
        single_peaks = [belief.peak_probability() for belief in singles[scenario.name]]
        summary['single_peak_probabilities'] = single_peaks
        summary['single_misspecified'] = [misspecification_flag(b, policy) for b in singles[scenario.name]]
        summary['pooled_more_peaked'] = bool(summary['peak_probability'] > max(single_peaks))
        summary['true_weights'] = dict(sorted(scenario.true_weights.items()))
        summary['rationality'] = scenario.rationality
        report.scenario_summaries[scenario.name] = summary
        report.misspecification_flags[scenario.name] = summary['misspecified']
        logger.info(
            f'Scenario {scenario.name}: argmax θ={summary["argmax_theta"]}, β={summary["argmax_beta"]}, '
            f'peak={summary["peak_probability"]:.3f}, misspecified={summary["misspecified"]}'
        )

    return report
