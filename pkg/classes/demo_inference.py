"""Offline joint (θ, β) inference from demonstrations on a hypothesis grid."""

import itertools
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.special import logsumexp as _scipy_logsumexp

from .constants import *
from .features import compute_features
from .optimizer import TrajectorySet

logger = logging.getLogger(__name__)


# =============================================================================
# GRIDS
# =============================================================================

@dataclass(frozen=True, eq=False)
class ThetaGrid:
    thetas: np.ndarray

    def __post_init__(self):
        thetas = np.atleast_2d(np.asarray(self.thetas, dtype=float))
        if len(thetas) == 0:
            raise ValueError('Theta grid is empty')
        if np.any(thetas < 0):
            raise ValueError('Theta grid vectors must be nonnegative')
        if not np.allclose(np.linalg.norm(thetas, axis=1), 1.0, atol=1e-9):
            raise ValueError('Theta grid vectors must have unit norm')
        if len(np.unique(np.round(thetas, GRID_DECIMALS), axis=0)) != len(thetas):
            raise ValueError('Theta grid vectors must be pairwise distinct')
        object.__setattr__(self, 'thetas', thetas)

    def __len__(self) -> int:
        return len(self.thetas)

    @property
    def dimension(self) -> int:
        return self.thetas.shape[1]

    def index_of(self, theta: Sequence[float]) -> int:
        distances = np.linalg.norm(self.thetas - np.asarray(theta, dtype=float)[None, :], axis=1)
        return int(np.argmin(distances))


@dataclass(frozen=True, eq=False)
class BetaGrid:
    betas: np.ndarray

    def __post_init__(self):
        betas = np.asarray(self.betas, dtype=float).reshape(-1)
        if len(betas) == 0:
            raise ValueError('Beta grid is empty')
        if np.any(betas <= 0):
            raise ValueError('Beta grid values must be positive')
        if np.any(np.diff(betas) <= 0):
            raise ValueError('Beta grid must be strictly increasing')
        object.__setattr__(self, 'betas', betas)

    def __len__(self) -> int:
        return len(self.betas)


def build_theta_grid(d: int, levels: Sequence[float] = THETA_GRID_LEVELS) -> ThetaGrid:
    """All nonzero level combinations, normalized and deduplicated, in a stable order."""
    if d < 1:
        raise ValueError(f'Feature dimension must be at least 1, got d={d}')
    unique = {}
    for combination in itertools.product(levels, repeat=d):
        vector = np.array(combination, dtype=float)
        norm = np.linalg.norm(vector)
        if norm == 0:
            continue
        vector = vector / norm
        unique.setdefault(tuple(np.round(vector, GRID_DECIMALS)), vector)
    return ThetaGrid(np.array([unique[key] for key in sorted(unique)]))


def build_default_grids(d: int) -> Tuple[ThetaGrid, BetaGrid]:
    """
    Default hypothesis grids.

    Args:
        d: Number of modeled features

    Returns:
        (ThetaGrid, BetaGrid); 19 θ vectors for d=3 and the nine-value β grid
    """
    return build_theta_grid(d), BetaGrid(np.array(BETA_GRID_VALUES))


def grids_to_dict(theta_grid: ThetaGrid, beta_grid: BetaGrid, feature_names: Sequence[str]) -> dict:
    return {
        'features': list(feature_names),
        'thetas': theta_grid.thetas.tolist(),
        'betas': beta_grid.betas.tolist(),
    }


# =============================================================================
# BELIEF
# =============================================================================

@dataclass(frozen=True, eq=False)
class JointBelief:
    """Normalized belief b(θ, β), stored as log probabilities of shape (|Θ|, |B|)."""
    log_probs: np.ndarray
    theta_grid: ThetaGrid
    beta_grid: BetaGrid

    def __post_init__(self):
        shape = (len(self.theta_grid), len(self.beta_grid))
        if self.log_probs.shape != shape:
            raise ValueError(f'Belief shape {self.log_probs.shape} does not match grids {shape}')

    @property
    def probs(self) -> np.ndarray:
        return np.exp(self.log_probs)

    def argmax(self) -> Tuple[int, int]:
        i, j = np.unravel_index(np.argmax(self.log_probs), self.log_probs.shape)
        return int(i), int(j)

    def peak_probability(self) -> float:
        return float(np.exp(np.max(self.log_probs)))


def uniform_belief(theta_grid: ThetaGrid, beta_grid: BetaGrid, prior: Optional[np.ndarray] = None) -> JointBelief:
    """Uniform belief, or a normalized copy of an arbitrary nonnegative prior matrix."""
    shape = (len(theta_grid), len(beta_grid))
    if prior is None:
        return JointBelief(np.full(shape, -np.log(shape[0] * shape[1])), theta_grid, beta_grid)
    prior = np.asarray(prior, dtype=float)
    if prior.shape != shape or np.any(prior < 0) or prior.sum() <= 0:
        raise ValueError('Prior must be a nonnegative matrix with positive mass matching the grids')
    with np.errstate(divide='ignore'):
        log_prior = np.log(prior / prior.sum())
    return JointBelief(log_prior, theta_grid, beta_grid)


def theta_marginal(belief: JointBelief) -> np.ndarray:
    return np.exp(_scipy_logsumexp(belief.log_probs, axis=1))


def belief_entropy(probs: np.ndarray) -> float:
    """Shannon entropy in nats, ignoring zero cells."""
    probs = np.asarray(probs, dtype=float).ravel()
    positive = probs[probs > 0]
    return float(-np.sum(positive * np.log(positive)))


# =============================================================================
# LIKELIHOOD
# =============================================================================

def logsumexp(values: Sequence[float]) -> float:
    """
    log Σ e^v computed as A + log Σ e^{v−A} with A = max(v).

    Raises:
        ValueError: if `values` is empty
    """
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise ValueError('logsumexp of an empty list is undefined')
    return float(_scipy_logsumexp(values))


def demo_loglik(traj: np.ndarray, theta: Sequence[float], beta: float, trajectory_set: TrajectorySet) -> float:
    """
    Boltzmann log-likelihood of one demonstration, with the partition function
    summed over the trajectory set.

    Returns:
        −βθᵀΦ(traj) − logsumexp{−βθᵀΦ(x̄) : x̄ ∈ S}
    """
    if len(trajectory_set) == 0:
        raise ValueError('Trajectory set is empty')
    phi = compute_features(traj, trajectory_set.env, trajectory_set.feature_config)
    return feature_loglik(phi, theta, beta, trajectory_set.features)


def feature_loglik(phi: np.ndarray, theta: Sequence[float], beta: float, set_features: np.ndarray) -> float:
    theta = np.asarray(theta, dtype=float)
    return float(-beta * (theta @ phi) - logsumexp(-beta * (set_features @ theta)))


def loglik_grid(phi: np.ndarray, theta_grid: ThetaGrid, beta_grid: BetaGrid, set_features: np.ndarray) -> np.ndarray:
    """Demonstration log-likelihood for every (θ, β) cell, shape (|Θ|, |B|)."""
    demo_costs = theta_grid.thetas @ phi
    set_costs = set_features @ theta_grid.thetas.T
    betas = beta_grid.betas
    partition = _scipy_logsumexp(-betas[None, None, :] * set_costs[:, :, None], axis=0)
    return -betas[None, :] * demo_costs[:, None] - partition


# =============================================================================
# UPDATES
# =============================================================================

def _normalized(log_unnormalized: np.ndarray, belief: JointBelief) -> JointBelief:
    total = _scipy_logsumexp(log_unnormalized)
    if not np.isfinite(total):
        raise ValueError('Posterior has no mass left after the update')
    return JointBelief(log_unnormalized - total, belief.theta_grid, belief.beta_grid)


def update_belief(belief: JointBelief, demo: np.ndarray, trajectory_set: TrajectorySet) -> JointBelief:
    """
    Bayes update with one demonstration, b'(θ,β) ∝ P(demo | θ,β) b(θ,β).

    Args:
        belief: Normalized prior belief
        demo: Demonstrated trajectory
        trajectory_set: Partition-function samples (same features as the grids)

    Returns:
        Normalized posterior
    """
    phi = compute_features(demo, trajectory_set.env, trajectory_set.feature_config)
    return update_belief_with_features(belief, phi, trajectory_set.features)


def update_belief_with_features(belief: JointBelief, phi: np.ndarray, set_features: np.ndarray) -> JointBelief:
    loglik = loglik_grid(phi, belief.theta_grid, belief.beta_grid, set_features)
    return _normalized(belief.log_probs + loglik, belief)


def update_belief_batch(belief: JointBelief, demos: Sequence[np.ndarray], trajectory_set: TrajectorySet) -> JointBelief:
    """Pooled update: log-likelihoods of all demonstrations summed before normalizing."""
    log_unnormalized = belief.log_probs.copy()
    for demo in demos:
        phi = compute_features(demo, trajectory_set.env, trajectory_set.feature_config)
        log_unnormalized = log_unnormalized + loglik_grid(
            phi, belief.theta_grid, belief.beta_grid, trajectory_set.features
        )
    return _normalized(log_unnormalized, belief)


# =============================================================================
# DECISIONS
# =============================================================================

@dataclass(frozen=True)
class MisspecificationPolicy:
    """Flag threshold ε compared against each hypothesis's most likely β."""
    threshold: float = DEFAULT_MISSPECIFICATION_THRESHOLD

    def __post_init__(self):
        if not (np.isfinite(self.threshold) and self.threshold >= 0):
            raise ValueError(f'Misspecification threshold must be a finite β value ≥ 0, got {self.threshold}')


def conditional_beta_modes(belief: JointBelief) -> np.ndarray:
    """argmax_β b(β | θ) for every θ with positive mass (NaN otherwise)."""
    row_mass = _scipy_logsumexp(belief.log_probs, axis=1)
    modes = belief.beta_grid.betas[np.argmax(belief.log_probs, axis=1)].astype(float)
    modes[~np.isfinite(row_mass)] = np.nan
    return modes


def misspecification_flag(belief: JointBelief, policy: MisspecificationPolicy) -> bool:
    """True when every hypothesis puts its most mass on β values below ε."""
    modes = conditional_beta_modes(belief)
    modes = modes[~np.isnan(modes)]
    if modes.size == 0:
        return False
    return bool(np.all(modes < policy.threshold))


def calibrate_threshold(
    explained: Sequence[JointBelief],
    misspecified: Sequence[JointBelief],
    default: float = DEFAULT_MISSPECIFICATION_THRESHOLD
) -> float:
    """
    Choose ε separating beliefs from explainable demonstrations from misspecified ones.

    ε is the smallest β grid value above every misspecified belief's largest
    conditional mode, provided explained beliefs keep some mode at or above it.
    Falls back to `default` when no grid value separates the two groups.
    """
    if not explained or not misspecified:
        raise ValueError('Threshold calibration needs explained and misspecified beliefs')
    betas = explained[0].beta_grid.betas
    worst_misspecified = max(np.nanmax(conditional_beta_modes(b)) for b in misspecified)
    weakest_explained = min(np.nanmax(conditional_beta_modes(b)) for b in explained)

    candidates = [beta for beta in betas if worst_misspecified < beta <= weakest_explained]
    if not candidates:
        logger.warning(
            f'No β grid value separates misspecified (max mode {worst_misspecified}) from '
            f'explained (min mode {weakest_explained}); keeping ε={default}'
        )
        return default
    return float(candidates[0])


def posterior_weights(belief: JointBelief, mode: str = WEIGHTS_MARGINAL) -> np.ndarray:
    """
    Planning weights from the belief.

    marginal: E[θ]; confidence_weighted: E[βθ], which shrinks toward zero when
    the belief sits at low confidence.
    """
    probs = belief.probs
    if mode == WEIGHTS_MARGINAL:
        return probs.sum(axis=1) @ belief.theta_grid.thetas
    if mode == WEIGHTS_CONFIDENCE:
        return (probs @ belief.beta_grid.betas) @ belief.theta_grid.thetas
    raise ValueError(f'Unknown weighting mode: {mode}')


# =============================================================================
# EXPORT
# =============================================================================

def posterior_to_frame(belief: JointBelief, feature_names: Sequence[str]) -> pd.DataFrame:
    """One row per (θ, β) cell: theta_index, theta_<feature>..., beta, probability."""
    probs = belief.probs
    rows = []
    for i, theta in enumerate(belief.theta_grid.thetas):
        for j, beta in enumerate(belief.beta_grid.betas):
            row = {'theta_index': i}
            row.update({f'theta_{name}': float(value) for name, value in zip(feature_names, theta)})
            row['beta'] = float(beta)
            row['probability'] = float(probs[i, j])
            rows.append(row)
    return pd.DataFrame(rows)


def summarize_belief(belief: JointBelief, feature_names: Sequence[str], policy: MisspecificationPolicy) -> dict:
    i, j = belief.argmax()
    marginal = theta_marginal(belief)
    uniform_entropy = np.log(len(belief.theta_grid))
    return {
        'argmax_theta': belief.theta_grid.thetas[i].round(6).tolist(),
        'argmax_beta': float(belief.beta_grid.betas[j]),
        'peak_probability': belief.peak_probability(),
        'theta_entropy_ratio': belief_entropy(marginal) / uniform_entropy if uniform_entropy > 0 else 1.0,
        'misspecified': misspecification_flag(belief, policy),
        'marginal_weights': dict(zip(feature_names, posterior_weights(belief, WEIGHTS_MARGINAL).round(6).tolist())),
        'confidence_weights': dict(zip(feature_names, posterior_weights(belief, WEIGHTS_CONFIDENCE).round(6).tolist())),
    }
