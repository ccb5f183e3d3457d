"""Experiment definitions, shared setup and the metrics report written by every study."""

import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from classes.constants import *
from classes.deformation import DeformationOperator, build_deformation
from classes.environment import EnvironmentSpec, FeatureConfig, load_environment
from classes.errors import ConfigError
from classes.file_handler import load_json, read_file_names_in_path, save_json
from classes.optimizer import TrajectorySet, load_trajectory_set, sample_trajectory_set
from config import Config

logger = logging.getLogger(__name__)


# =============================================================================
# CONFIGURATION
# =============================================================================

@dataclass(frozen=True)
class DemoScenario:
    """A simulated population demonstrating one true objective."""
    name: str
    true_weights: Dict[str, float]
    rationality: float = float('inf')
    demos: int = DEMOS_PER_SCENARIO
    weight_jitter: float = 0.2
    expect_misspecified: Optional[bool] = None
    initial_lift: float = 0.0


@dataclass(frozen=True)
class CalibrationScenario:
    """Labeled corrections used to fit P(β̂ | E) for each feature."""
    initial_weights: Dict[str, float]
    features: List[str]
    magnitude: float = 0.3
    rationality: float = 50.0
    samples_per_condition: int = 50
    prior_explained: float = PRIOR_EXPLAINED


@dataclass(frozen=True)
class CorrectionTask:
    """One online-correction task: a true cost, a starting estimate and when the human pushes."""
    name: str
    explained: bool
    true_weights: Dict[str, float]
    initial_weights: Dict[str, float]
    style: str
    magnitude: float
    timesteps: List[int]
    rationality: float = 50.0


@dataclass(frozen=True)
class ExperimentConfig:
    path: str
    environment_path: str
    seed: int
    set_size: int
    misspecification_threshold: float = DEFAULT_MISSPECIFICATION_THRESHOLD
    calibrate_threshold: bool = False
    deformation_magnitude: float = DEFORMATION_MAGNITUDE
    effort_weight: float = EFFORT_WEIGHT
    alpha: float = THETA_STEP
    nu: Optional[float] = None
    seeds_per_task: int = SEEDS_PER_CORRECTION_TASK
    modes: List[str] = field(default_factory=lambda: list(UPDATE_MODES))
    demo_scenarios: List[DemoScenario] = field(default_factory=list)
    calibration: Optional[CalibrationScenario] = None
    correction_tasks: List[CorrectionTask] = field(default_factory=list)
    explanation_model_path: Optional[str] = None


def _rationality(value: Any, path: str, key: str) -> float:
    if value is None:
        return float('inf')
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f'Rationality must be a number or null, got {value!r}', path, key)
    if not value > 0:
        raise ConfigError(f'Rationality must be positive, got {value}', path, key)
    return value


def _resolve(path: str, relative_to: str) -> str:
    if os.path.isabs(path):
        return path
    return os.path.normpath(os.path.join(os.path.dirname(os.path.abspath(relative_to)), path))


def _check_weights(weights: Any, path: str, key: str) -> Dict[str, float]:
    if not isinstance(weights, dict) or not weights:
        raise ConfigError('Weights must be a non-empty mapping of feature names', path, key)
    unknown = [name for name in weights if name not in ALL_FEATURES]
    if unknown:
        raise ConfigError(f'Unknown features {unknown}; expected names from {ALL_FEATURES}', path, key)
    try:
        weights = {name: float(value) for name, value in weights.items()}
    except (TypeError, ValueError):
        raise ConfigError('Weights must be numbers', path, key)
    if any(value < 0 for value in weights.values()) or not any(value > 0 for value in weights.values()):
        raise ConfigError('Weights must be nonnegative with at least one positive entry', path, key)
    return weights


def _demo_scenario(data: dict, path: str, index: int) -> DemoScenario:
    key = f'demo_scenarios[{index}]'
    try:
        return DemoScenario(
            name=str(data['name']),
            true_weights=_check_weights(data['true_weights'], path, f'{key}.true_weights'),
            rationality=_rationality(data.get('rationality'), path, f'{key}.rationality'),
            demos=int(data.get('demos', DEMOS_PER_SCENARIO)),
            weight_jitter=float(data.get('weight_jitter', 0.2)),
            expect_misspecified=data.get('expect_misspecified'),
            initial_lift=_initial_lift(data.get('initial_lift', 0.0), path, f'{key}.initial_lift'),
        )
    except KeyError as e:
        raise ConfigError(f'Missing key {e}', path, key)


def _initial_lift(value, path: str, key: str) -> float:
    try:
        lift = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f'Initial lift must be a number, got {value!r}', path, key)
    if not (np.isfinite(lift) and lift >= 0):
        raise ConfigError(f'Initial lift must be finite and nonnegative, got {value}', path, key)
    return lift


def _calibration(data: dict, path: str) -> CalibrationScenario:
    key = 'calibration'
    try:
        features = list(data['features'])
        unknown = [name for name in features if name not in ALL_FEATURES]
        if unknown:
            raise ConfigError(f'Unknown calibration features {unknown}', path, f'{key}.features')
        scenario = CalibrationScenario(
            initial_weights=_check_weights(data['initial_weights'], path, f'{key}.initial_weights'),
            features=features,
            magnitude=float(data.get('magnitude', 0.3)),
            rationality=_rationality(data.get('rationality', 50.0), path, f'{key}.rationality'),
            samples_per_condition=int(data.get('samples_per_condition', 50)),
            prior_explained=float(data.get('prior_explained', PRIOR_EXPLAINED)),
        )
    except KeyError as e:
        raise ConfigError(f'Missing key {e}', path, key)
    if scenario.samples_per_condition < MIN_CALIBRATION_SAMPLES:
        raise ConfigError(
            f'Need at least {MIN_CALIBRATION_SAMPLES} samples per condition, got {scenario.samples_per_condition}',
            path, f'{key}.samples_per_condition',
        )
    return scenario


def _correction_task(data: dict, path: str, index: int) -> CorrectionTask:
    key = f'correction_tasks[{index}]'
    try:
        style = data['style']
        if style not in CORRECTION_STYLES:
            raise ConfigError(f'Unknown style {style}; expected one of {CORRECTION_STYLES}', path, f'{key}.style')
        return CorrectionTask(
            name=str(data['name']),
            explained=bool(data['explained']),
            true_weights=_check_weights(data['true_weights'], path, f'{key}.true_weights'),
            initial_weights=_check_weights(data['initial_weights'], path, f'{key}.initial_weights'),
            style=style,
            magnitude=float(data['magnitude']),
            timesteps=[int(t) for t in data.get('timesteps', [])],
            rationality=_rationality(data.get('rationality', 50.0), path, f'{key}.rationality'),
        )
    except KeyError as e:
        raise ConfigError(f'Missing key {e}', path, key)


def experiment_config_from_dict(data: dict, path: str) -> ExperimentConfig:
    """
    Build an ExperimentConfig from its JSON form.

    Relative file references are resolved against the config file's folder.

    Raises:
        ConfigError: on missing keys, unknown names or invalid values
    """
    if not isinstance(data, dict):
        raise ConfigError('Experiment config must be a JSON object', path)
    if 'environment' not in data:
        raise ConfigError("Missing key 'environment'", path, 'environment')
    if 'seed' not in data:
        raise ConfigError('Experiments need an explicit seed', path, 'seed')

    environment_path = _resolve(data['environment'], path)
    if not os.path.exists(environment_path):
        raise ConfigError(f'Environment file not found: {environment_path}', path, 'environment')

    modes = list(data.get('modes', UPDATE_MODES))
    if any(mode not in UPDATE_MODES for mode in modes):
        raise ConfigError(f'Unknown modes {modes}; expected names from {UPDATE_MODES}', path, 'modes')

    model_path = data.get('explanation_model')
    config = ExperimentConfig(
        path=os.path.abspath(path),
        environment_path=environment_path,
        seed=int(data['seed']),
        set_size=int(data.get('set_size', Config.TRAJECTORY_SET_SIZE)),
        misspecification_threshold=float(data.get('misspecification_threshold', DEFAULT_MISSPECIFICATION_THRESHOLD)),
        calibrate_threshold=bool(data.get('calibrate_threshold', False)),
        deformation_magnitude=float(data.get('deformation_magnitude', DEFORMATION_MAGNITUDE)),
        effort_weight=float(data.get('effort_weight', EFFORT_WEIGHT)),
        alpha=float(data.get('alpha', THETA_STEP)),
        nu=None if data.get('nu') is None else float(data['nu']),
        seeds_per_task=int(data.get('seeds_per_task', SEEDS_PER_CORRECTION_TASK)),
        modes=modes,
        demo_scenarios=[_demo_scenario(s, path, i) for i, s in enumerate(data.get('demo_scenarios', []))],
        calibration=_calibration(data['calibration'], path) if data.get('calibration') else None,
        correction_tasks=[_correction_task(t, path, i) for i, t in enumerate(data.get('correction_tasks', []))],
        explanation_model_path=None if model_path is None else _resolve(model_path, path),
    )
    if config.set_size < 1:
        raise ConfigError(f'Set size must be at least 1, got {config.set_size}', path, 'set_size')
    if config.seeds_per_task < 1:
        raise ConfigError(f'Seeds per task must be at least 1, got {config.seeds_per_task}', path, 'seeds_per_task')
    return config


def load_experiment_config(file_path: str) -> ExperimentConfig:
    if not os.path.exists(file_path):
        available = read_file_names_in_path(os.path.dirname(os.path.abspath(file_path)))
        raise ConfigError(f'Experiment config not found (available here: {available})', file_path)
    try:
        data = load_json(file_path)
    except ValueError as e:
        raise ConfigError(f'Invalid JSON: {e}', file_path)
    return experiment_config_from_dict(data, file_path)


# =============================================================================
# SHARED SETUP
# =============================================================================

@dataclass
class ExperimentContext:
    """Loaded environment, trajectory set and deformation for one experiment."""
    config: ExperimentConfig
    env: EnvironmentSpec
    trajectory_set: TrajectorySet
    operator: DeformationOperator

    @property
    def features(self) -> FeatureConfig:
        """Modeled features carrying the set's normalizers."""
        return self.trajectory_set.feature_config


def prepare_context(
    config: ExperimentConfig,
    set_size: Optional[int] = None,
    seed: Optional[int] = None,
    trajectory_set_path: Optional[str] = None
) -> ExperimentContext:
    """
    Load the environment and build (or reuse) the trajectory set.

    A cached set must have been sampled in the same environment.
    """
    env, features = load_environment(config.environment_path)
    seed = config.seed if seed is None else seed

    if trajectory_set_path:
        trajectory_set = load_trajectory_set(trajectory_set_path)
        if trajectory_set.env.to_dict() != env.to_dict():
            raise ConfigError('Cached trajectory set was sampled in a different environment', trajectory_set_path)
        if trajectory_set.feature_config.features != features.features:
            raise ConfigError('Cached trajectory set models different features', trajectory_set_path, 'features')
        logger.info(f'Reusing {len(trajectory_set)} cached trajectories from {trajectory_set_path}')
    else:
        trajectory_set = sample_trajectory_set(env, set_size or config.set_size, seed, features)

    return ExperimentContext(
        config=config,
        env=env,
        trajectory_set=trajectory_set,
        operator=build_deformation(env, config.deformation_magnitude),
    )


# =============================================================================
# REPORT
# =============================================================================

@dataclass
class MetricsReport:
    """
    Objective metrics of one study.

    Nested dictionaries are keyed by task or scenario name, then by mode and feature.
    File references are relative to the output folder.
    """
    kind: str
    seed: int
    regret: Dict[str, Dict[str, Dict[str, float]]] = field(default_factory=dict)
    regret_std: Dict[str, Dict[str, Dict[str, float]]] = field(default_factory=dict)
    regret_difference: Dict[str, Dict[str, float]] = field(default_factory=dict)
    path_length: Dict[str, Dict[str, Dict[str, float]]] = field(default_factory=dict)
    mean_beta_hat: Dict[str, Dict[str, float]] = field(default_factory=dict)
    posterior_paths: Dict[str, List[str]] = field(default_factory=dict)
    misspecification_flags: Dict[str, bool] = field(default_factory=dict)
    scenario_summaries: Dict[str, dict] = field(default_factory=dict)
    settings: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        for task, modes in self.regret.items():
            for mode, values in modes.items():
                if any(value < 0 for value in values.values()):
                    raise ValueError(f'Negative regret for {task}/{mode}')
        for task, modes in self.path_length.items():
            if any(stats['mean'] < 0 for stats in modes.values()):
                raise ValueError(f'Negative θ̂ path length for {task}')

    def to_dict(self) -> dict:
        return {
            'kind': self.kind,
            'seed': self.seed,
            'regret': self.regret,
            'regret_std': self.regret_std,
            'regret_difference': self.regret_difference,
            'path_length': self.path_length,
            'mean_beta_hat': self.mean_beta_hat,
            'posterior_paths': self.posterior_paths,
            'misspecification_flags': self.misspecification_flags,
            'scenario_summaries': self.scenario_summaries,
            'settings': self.settings,
        }

    def save(self, path: str, file_name: str):
        return save_json(_rounded(self.to_dict()), path, file_name)


def _rounded(value: Any, decimals: int = 10) -> Any:
    """
    Round floats so reports do not carry platform-level noise in the last digits.

    Non-finite floats become None so the report stays standard JSON.
    """
    if isinstance(value, dict):
        return {key: _rounded(item, decimals) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_rounded(item, decimals) for item in value]
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return round(value, decimals) if np.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value
