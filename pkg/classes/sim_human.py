"""Simulated noisily-rational humans giving demonstrations and physical corrections."""

import logging
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
from scipy.linalg import null_space
from scipy.special import logsumexp

from .constants import *
from .deformation import DeformationOperator, deform_with
from .environment import CorrectionEvent, EnvironmentSpec, FeatureConfig, check_trajectory
from .errors import InfeasibleCorrectionError
from .features import compute_features, feature_gradients
from .helper import normalize_weights, weights_from_mapping
from .optimizer import OptimizerConfig, TrajectorySet, minimal_effort_correction, optimize_trajectory

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class TrueCost:
    """
    The human's objective θ*ᵀΦ* over its own features, which may include
    features the robot does not model, and its rationality β_sim.
    """
    theta: np.ndarray
    feature_config: FeatureConfig
    rationality: float = float('inf')
    effort_weight: float = EFFORT_WEIGHT

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float).reshape(-1)
        if theta.shape[0] != self.feature_config.dimension:
            raise ValueError(f'True weights have {theta.shape[0]} components, expected {self.feature_config.dimension}')
        if np.any(theta < 0) or not np.any(theta):
            raise ValueError('True weights must be nonnegative and not all zero')
        self.theta = normalize_weights(theta)
        if not self.rationality > 0:
            raise ValueError(f'Rationality must be positive, got {self.rationality}')
        if not self.effort_weight > 0:
            raise ValueError(f'Effort weight must be positive, got {self.effort_weight}')

    @property
    def active_features(self):
        return [name for name, weight in zip(self.feature_config.features, self.theta) if weight > 0]

    def hidden_features(self, modeled: FeatureConfig):
        return [name for name in self.active_features if name not in modeled.features]

    def effort_noise_scale(self) -> float:
        """Per-axis standard deviation of Boltzmann effort noise, 0 for a perfect human."""
        if np.isinf(self.rationality):
            return 0.0
        return float(np.sqrt(1.0 / (2.0 * self.rationality * self.effort_weight)))


def true_cost_from_weights(
    weights: Dict[str, float],
    trajectory_set: TrajectorySet,
    rationality: float = float('inf'),
    effort_weight: float = EFFORT_WEIGHT
) -> TrueCost:
    """TrueCost over the weighted features, normalized like the trajectory set."""
    names = [name for name in ALL_FEATURES if name in weights]
    config = trajectory_set.config_for(names)
    return TrueCost(weights_from_mapping(weights, names), config, rationality, effort_weight)


# =============================================================================
# DEMONSTRATIONS
# =============================================================================

def lifted_trajectory(env: EnvironmentSpec, lift: float) -> np.ndarray:
    """The straight line raised by `lift`·sin(πs) along the last axis, clipped to the workspace."""
    traj = env.straight_line()
    traj[:, -1] += lift * np.sin(np.pi * np.linspace(0.0, 1.0, env.waypoint_count))
    return env.clip_to_workspace(traj)


def simulate_demonstration(
    true_cost: TrueCost,
    env: EnvironmentSpec,
    trajectory_set: TrajectorySet,
    seed: int,
    config: Optional[OptimizerConfig] = None,
    initial_lift: float = 0.0
) -> np.ndarray:
    """
    A demonstration under the true cost.

    A perfect human (infinite rationality) returns the optimizer's trajectory for θ*,
    started from the straight line raised by `initial_lift`; otherwise a set member
    is drawn with probability ∝ exp(−β_sim θ*ᵀΦ*).
    """
    if len(trajectory_set) == 0:
        raise ValueError('Trajectory set is empty')

    if np.isinf(true_cost.rationality):
        initial = lifted_trajectory(env, initial_lift) if initial_lift else None
        return optimize_trajectory(true_cost.theta, env, true_cost.feature_config, config, initial=initial).trajectory

    costs = trajectory_set.feature_matrix(true_cost.feature_config) @ true_cost.theta
    logits = -true_cost.rationality * costs
    probabilities = np.exp(logits - logsumexp(logits))
    index = np.random.default_rng(seed).choice(len(trajectory_set), p=probabilities / probabilities.sum())
    return trajectory_set.trajectories[index].copy()


# =============================================================================
# CORRECTIONS
# =============================================================================

def push_gradients(
    xi_r: np.ndarray,
    t: int,
    op: DeformationOperator,
    env: EnvironmentSpec,
    cfg: FeatureConfig
) -> np.ndarray:
    """Gradient of every feature of deform(ξ_R, u, t) with respect to u at u = 0, shape (d, n)."""
    gradients = feature_gradients(xi_r, env, cfg).reshape(cfg.dimension, -1)
    return gradients @ op.displacement_basis(t)


def _modeled_change(xi_r, t, u, op, env, modeled: FeatureConfig, base: np.ndarray) -> np.ndarray:
    return compute_features(deform_with(xi_r, t, u, op), env, modeled, smooth=True) - base


def secant_push_jacobian(
    xi_r: np.ndarray,
    t: int,
    magnitude: float,
    op: DeformationOperator,
    env: EnvironmentSpec,
    cfg: FeatureConfig
) -> np.ndarray:
    """
    Central secant of every feature of deform(ξ_R, u, t) along each push axis at
    push size `magnitude`, shape (d, n).

    Unlike `push_gradients` this sees hinge features that are flat at u = 0 but
    switch on within the push.
    """
    base = compute_features(xi_r, env, cfg, smooth=True)
    columns = []
    for axis in np.eye(env.n):
        forward = _modeled_change(xi_r, t, magnitude * axis, op, env, cfg, base)
        backward = _modeled_change(xi_r, t, -magnitude * axis, op, env, cfg, base)
        columns.append((forward - backward) / (2.0 * magnitude))
    return np.stack(columns, axis=1)


def _sideways_direction(true_cost: TrueCost, xi_r, t, magnitude, op, env, modeled: FeatureConfig) -> np.ndarray:
    jacobian = secant_push_jacobian(xi_r, t, magnitude, op, env, modeled)
    norms = np.linalg.norm(jacobian, axis=1)
    rows = jacobian[norms > 1e-12] / norms[norms > 1e-12, None]
    basis = null_space(rows, rcond=1e-8) if len(rows) else np.eye(env.n)
    if basis.shape[1] == 0:
        # Full rank: the least-changing direction is the only candidate
        basis = np.linalg.svd(rows)[2][-1:].T

    candidates = []
    hidden = true_cost.hidden_features(modeled)
    if hidden:
        hidden_cfg = true_cost.feature_config.with_features(hidden)
        hidden_theta = np.array([true_cost.theta[true_cost.feature_config.index(name)] for name in hidden])
        improving = -(hidden_theta @ push_gradients(xi_r, t, op, env, hidden_cfg))
        projected = basis @ (basis.T @ improving)
        if np.linalg.norm(projected) > 1e-12:
            candidates.append(projected / np.linalg.norm(projected))
    for column in basis.T:
        column = column if column[np.argmax(np.abs(column))] > 0 else -column
        candidates.extend([column, -column])

    base = compute_features(xi_r, env, modeled, smooth=True)
    smallest = np.inf
    for direction in candidates:
        change = _modeled_change(xi_r, t, magnitude * direction, op, env, modeled, base)
        leak = float(np.max(np.abs(change))) if modeled.dimension else 0.0
        if leak <= SIDEWAYS_LEAK_TOLERANCE:
            return direction
        smallest = min(smallest, leak)
    raise InfeasibleCorrectionError(
        'Every sideways push changes a modeled feature',
        {'t': t, 'smallest_change': smallest, 'tolerance': SIDEWAYS_LEAK_TOLERANCE},
    )


def simulate_correction(
    true_cost: TrueCost,
    xi_r: np.ndarray,
    t: int,
    style: str,
    magnitude: float,
    env: EnvironmentSpec,
    op: DeformationOperator,
    modeled: FeatureConfig,
    config: Optional[OptimizerConfig] = None,
    rng: Optional[np.random.Generator] = None
) -> CorrectionEvent:
    """
    A physical push at waypoint t.

    efficient: the smallest push reproducing the feature change of a `magnitude`
    push along the true cost's steepest descent direction.
    inefficient: a `magnitude` push in the null space of the modeled features'
    secant changes, aimed at the hidden features when the true cost has any, and
    accepted only when no modeled feature changes by more than
    SIDEWAYS_LEAK_TOLERANCE.
    A finite rationality adds Gaussian effort noise when `rng` is given.

    Raises:
        InfeasibleCorrectionError: if no improving or sideways direction exists
    """
    if style not in CORRECTION_STYLES:
        raise ValueError(f'Unknown correction style {style}; expected one of {CORRECTION_STYLES}')
    if not 0 < t < env.T:
        raise ValueError(f'Corrections must be applied at interior waypoints, got t={t}')
    if magnitude < 0:
        raise ValueError(f'Push magnitude must be nonnegative, got {magnitude}')
    xi_r = check_trajectory(xi_r, env)
    if magnitude == 0:
        return CorrectionEvent(t, np.zeros(env.n))

    if style == STYLE_EFFICIENT:
        active = true_cost.feature_config.with_features(true_cost.active_features)
        active_theta = true_cost.theta[true_cost.theta > 0]
        steepest = -(active_theta @ push_gradients(xi_r, t, op, env, active))
        if np.linalg.norm(steepest) < 1e-12:
            raise InfeasibleCorrectionError('The true cost has no improving push direction', {'t': t})
        candidate = magnitude * steepest / np.linalg.norm(steepest)
        target = compute_features(deform_with(xi_r, t, candidate, op), env, active, smooth=True)
        solution = minimal_effort_correction(target, xi_r, t, op, env, active, config, witness=candidate)
        push = solution.u_star
    else:
        push = magnitude * _sideways_direction(true_cost, xi_r, t, magnitude, op, env, modeled)

    noise_scale = true_cost.effort_noise_scale()
    if rng is not None and noise_scale > 0:
        push = push + rng.normal(0.0, noise_scale, size=env.n)

    return CorrectionEvent(t, push)
