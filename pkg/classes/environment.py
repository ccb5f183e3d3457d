"""Desk environment, feature configuration and correction event definitions."""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .constants import *
from .errors import ConfigError
from .file_handler import load_json


# =============================================================================
# ENVIRONMENT
# =============================================================================

@dataclass(eq=False)
class EnvironmentSpec:
    """
    Planar or spatial kinematic workspace with a table, a laptop and a human.

    The last coordinate is height; the table is the hyperplane where height
    equals `table_offset`.
    """
    start: np.ndarray
    goal: np.ndarray
    laptop_center: np.ndarray
    human_center: np.ndarray
    n: int = 2
    T: int = 8
    dt: float = 0.25
    table_offset: float = 0.0
    laptop_radius: float = 0.35
    human_radius: float = 0.75
    workspace_low: Optional[np.ndarray] = None
    workspace_high: Optional[np.ndarray] = None

    def __post_init__(self):
        self.start = _vector(self.start, self.n, 'start')
        self.goal = _vector(self.goal, self.n, 'goal')
        self.laptop_center = _vector(self.laptop_center, self.n, 'laptop_center')
        self.human_center = _vector(self.human_center, self.n, 'human_center')

        if self.n < 1:
            raise ValueError(f'State dimension must be positive, got n={self.n}')
        if self.T < 2:
            raise ValueError(f'Horizon must be at least 2, got T={self.T}')
        if self.dt <= 0:
            raise ValueError(f'Timestep must be positive, got dt={self.dt}')
        if self.laptop_radius <= 0:
            raise ValueError(f'Laptop radius must be positive, got {self.laptop_radius}')
        if self.human_radius <= 0:
            raise ValueError(f'Human radius must be positive, got {self.human_radius}')

        endpoints = np.vstack([self.start, self.goal])
        if self.workspace_low is None:
            low = endpoints.min(axis=0) - 2.0
            low[-1] = self.table_offset
            self.workspace_low = low
        if self.workspace_high is None:
            self.workspace_high = endpoints.max(axis=0) + 2.0
        self.workspace_low = _vector(self.workspace_low, self.n, 'workspace_low')
        self.workspace_high = _vector(self.workspace_high, self.n, 'workspace_high')
        if np.any(self.workspace_low > self.workspace_high):
            raise ValueError('Workspace lower bound exceeds upper bound')

    @property
    def waypoint_count(self) -> int:
        return self.T + 1

    def straight_line(self) -> np.ndarray:
        """Equally spaced waypoints from start to goal."""
        fractions = np.linspace(0.0, 1.0, self.waypoint_count)[:, None]
        return self.start[None, :] + fractions * (self.goal - self.start)[None, :]

    def clip_to_workspace(self, traj: np.ndarray) -> np.ndarray:
        return np.clip(traj, self.workspace_low, self.workspace_high)

    def to_dict(self) -> dict:
        return {
            'n': self.n,
            'T': self.T,
            'dt': self.dt,
            'table_offset': self.table_offset,
            'laptop_center': self.laptop_center.tolist(),
            'laptop_radius': self.laptop_radius,
            'human_center': self.human_center.tolist(),
            'human_radius': self.human_radius,
            'start': self.start.tolist(),
            'goal': self.goal.tolist(),
            'workspace_low': self.workspace_low.tolist(),
            'workspace_high': self.workspace_high.tolist(),
        }


def _vector(values, n: int, name: str) -> np.ndarray:
    array = np.asarray(values, dtype=float).reshape(-1)
    if array.shape != (n,):
        raise ValueError(f'{name} must have {n} components, got {array.shape[0]}')
    if not np.all(np.isfinite(array)):
        raise ValueError(f'{name} must be finite')
    return array


def check_trajectory(traj: np.ndarray, env: EnvironmentSpec) -> np.ndarray:
    """Validate a (T+1, n) waypoint array against the environment."""
    traj = np.asarray(traj, dtype=float)
    if traj.shape != (env.waypoint_count, env.n):
        raise ValueError(
            f'Trajectory shape {traj.shape} does not match environment '
            f'({env.waypoint_count}, {env.n})'
        )
    if not np.all(np.isfinite(traj)):
        raise ValueError('Trajectory waypoints must be finite')
    return traj


# =============================================================================
# FEATURE CONFIGURATION
# =============================================================================

@dataclass
class FeatureConfig:
    """Enabled features and their normalization divisors."""
    features: List[str] = field(default_factory=lambda: list(MODELED_FEATURES))
    normalizers: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        self.features = list(self.features)
        if not self.features:
            raise ValueError('At least one feature must be enabled')
        unknown = [name for name in self.features if name not in ALL_FEATURES]
        if unknown:
            raise ValueError(f'Unknown features {unknown}; expected a subset of {ALL_FEATURES}')
        if len(set(self.features)) != len(self.features):
            raise ValueError(f'Duplicate features in {self.features}')
        self.normalizers = {name: float(value) for name, value in self.normalizers.items()}
        for name, value in self.normalizers.items():
            if not value > 0:
                raise ValueError(f'Normalizer for {name} must be positive, got {value}')

    @property
    def dimension(self) -> int:
        return len(self.features)

    def index(self, name: str) -> int:
        return self.features.index(name)

    def divisors(self) -> np.ndarray:
        return np.array([self.normalizers.get(name, 1.0) for name in self.features])

    def with_features(self, features: Sequence[str]) -> 'FeatureConfig':
        """Same normalizers, different enabled feature list."""
        return FeatureConfig(list(features), dict(self.normalizers))

    def with_normalizers(self, normalizers: Dict[str, float]) -> 'FeatureConfig':
        return FeatureConfig(list(self.features), dict(normalizers))

    def to_dict(self) -> dict:
        return {'features': list(self.features), 'normalizers': dict(self.normalizers)}


# =============================================================================
# CORRECTION EVENTS
# =============================================================================

@dataclass
class CorrectionEvent:
    """A physical push u_H applied at waypoint index t."""
    t: int
    u_h: np.ndarray

    def __post_init__(self):
        self.u_h = np.asarray(self.u_h, dtype=float).reshape(-1)
        if self.t < 0:
            raise ValueError(f'Correction timestep must be nonnegative, got {self.t}')
        if not np.all(np.isfinite(self.u_h)):
            raise ValueError('Correction torque must be finite')

    def check_horizon(self, env: EnvironmentSpec) -> None:
        if self.t > env.T:
            raise ValueError(f'Correction timestep {self.t} is beyond horizon T={env.T}')
        if self.u_h.shape != (env.n,):
            raise ValueError(f'Correction torque must have {env.n} components, got {self.u_h.shape[0]}')


# =============================================================================
# LOADING
# =============================================================================

_REQUIRED_KEYS = ['n', 'T', 'dt', 'table_offset', 'laptop_center', 'laptop_radius',
                  'human_center', 'human_radius', 'start', 'goal']


def environment_from_dict(data: dict, path: Optional[str] = None) -> Tuple[EnvironmentSpec, FeatureConfig]:
    """
    Build the environment and feature configuration from a JSON document.

    Args:
        data: Parsed JSON document
        path: Source path, used only for error context

    Returns:
        (EnvironmentSpec, FeatureConfig)
    """
    for key in _REQUIRED_KEYS:
        if key not in data:
            raise ConfigError('missing required key', path, key)

    try:
        env = EnvironmentSpec(
            start=data['start'],
            goal=data['goal'],
            laptop_center=data['laptop_center'],
            human_center=data['human_center'],
            n=int(data['n']),
            T=int(data['T']),
            dt=float(data['dt']),
            table_offset=float(data['table_offset']),
            laptop_radius=float(data['laptop_radius']),
            human_radius=float(data['human_radius']),
            workspace_low=data.get('workspace_low'),
            workspace_high=data.get('workspace_high'),
        )
        features = FeatureConfig(
            features=data.get('features', MODELED_FEATURES),
            normalizers=data.get('normalizers', {}),
        )
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e), path) from e

    return env, features


def load_environment(file_path: str) -> Tuple[EnvironmentSpec, FeatureConfig]:
    """Load an environment JSON file."""
    try:
        data = load_json(file_path)
    except FileNotFoundError as e:
        raise ConfigError('environment file not found', file_path) from e
    except ValueError as e:
        raise ConfigError(f'invalid JSON: {e}', file_path) from e
    return environment_from_dict(data, file_path)
