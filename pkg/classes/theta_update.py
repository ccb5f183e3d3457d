"""MAP weight updates after a correction: the fixed rule and the explanation-weighted rule."""

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import expit

from .constants import *
from .errors import CalibrationError, ConvergenceError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ThetaUpdateConfig:
    alpha: float = THETA_STEP
    nu: float = FEATURE_PRECISION
    tolerance: float = NEWTON_TOLERANCE
    max_iters: int = NEWTON_MAX_ITERS
    damping: float = NEWTON_DAMPING

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f'Step α must be positive, got {self.alpha}')
        if not self.nu > 0:
            raise ValueError(f'Precision ν must be positive, got {self.nu}')
        if not self.tolerance > 0 or self.max_iters < 1:
            raise ValueError('Newton tolerance and iteration limit must be positive')
        if not 0 < self.damping < 1:
            raise ValueError(f'Damping must lie in (0, 1), got {self.damping}')


def fixed_theta_update(theta: Sequence[float], delta_phi: Sequence[float], alpha: float, clamp: bool = True) -> np.ndarray:
    """θ̂ − αΔΦ, clamped to the nonnegative orthant."""
    theta = np.asarray(theta, dtype=float)
    updated = theta - alpha * np.asarray(delta_phi, dtype=float)
    return np.maximum(updated, 0.0) if clamp else updated


def explanation_weight(theta_new: np.ndarray, delta_phi: np.ndarray, p_explained: float, nu: float, k: int) -> float:
    """
    w = Γ₁ / (Γ₁ + Γ₀) with Γ₁ = p e^{−θ'ᵀΔΦ} and Γ₀ = (1−p)(ν/π)^{k/2} e^{−ν‖ΔΦ‖²},
    evaluated in log space.
    """
    if p_explained <= 0.0:
        return 0.0
    if p_explained >= 1.0:
        return 1.0
    log_explained = np.log(p_explained) - theta_new @ delta_phi
    log_unexplained = np.log1p(-p_explained) + 0.5 * k * np.log(nu / np.pi) - nu * (delta_phi @ delta_phi)
    return float(expit(log_explained - log_unexplained))


def adaptive_theta_update(
    theta: Sequence[float],
    delta_phi: Sequence[float],
    p_explained: float,
    cfg: ThetaUpdateConfig,
    k: int
) -> np.ndarray:
    """
    Solve θ' = θ − α w(θ') ΔΦ for the explanation-weighted MAP estimate.

    Damped Newton iteration starting at θ; the step is halved while the residual
    grows. If Newton fails, plain fixed-point iteration is tried before giving up.
    The result is not clamped.

    Args:
        theta: Current estimate θ̂
        delta_phi: Φ(ξ_D) − Φ(ξ_R)
        p_explained: P(E=1 | β̂)
        cfg: Update settings
        k: Dimension of the feature difference in the Gaussian noise term

    Returns:
        Updated weight vector

    Raises:
        ConvergenceError: if neither solver reaches the tolerance
    """
    theta = np.asarray(theta, dtype=float)
    delta_phi = np.asarray(delta_phi, dtype=float)
    if theta.shape != delta_phi.shape:
        raise ValueError(f'θ̂ {theta.shape} and ΔΦ {delta_phi.shape} must have the same shape')
    if not 0.0 <= p_explained <= 1.0:
        raise ValueError(f'P(E=1) must lie in [0, 1], got {p_explained}')

    if p_explained >= 1.0:
        return fixed_theta_update(theta, delta_phi, cfg.alpha, clamp=False)
    if p_explained <= 0.0 or not np.any(delta_phi):
        return theta.copy()

    def residual(candidate: np.ndarray) -> np.ndarray:
        w = explanation_weight(candidate, delta_phi, p_explained, cfg.nu, k)
        return candidate - theta + cfg.alpha * w * delta_phi

    def jacobian(candidate: np.ndarray) -> np.ndarray:
        w = explanation_weight(candidate, delta_phi, p_explained, cfg.nu, k)
        return np.eye(len(theta)) - cfg.alpha * w * (1.0 - w) * np.outer(delta_phi, delta_phi)

    candidate = theta.copy()
    current = residual(candidate)
    for iteration in range(cfg.max_iters):
        if np.linalg.norm(current) <= cfg.tolerance:
            return candidate
        try:
            step = np.linalg.solve(jacobian(candidate), current)
        except np.linalg.LinAlgError:
            step = np.linalg.pinv(jacobian(candidate)) @ current

        scale = 1.0
        trial = candidate - step
        trial_residual = residual(trial)
        while np.linalg.norm(trial_residual) > np.linalg.norm(current) and scale > 1e-6:
            scale *= cfg.damping
            trial = candidate - scale * step
            trial_residual = residual(trial)
        candidate, current = trial, trial_residual

    logger.warning('Newton iteration for the θ update did not converge; trying fixed-point iteration')
    candidate = theta.copy()
    for iteration in range(cfg.max_iters * 10):
        w = explanation_weight(candidate, delta_phi, p_explained, cfg.nu, k)
        candidate = theta - cfg.alpha * w * delta_phi
        if np.linalg.norm(residual(candidate)) <= cfg.tolerance:
            return candidate

    raise ConvergenceError(
        'θ update did not reach a fixed point',
        {'residual': float(np.linalg.norm(residual(candidate))), 'p_explained': p_explained,
         'delta_phi_norm': float(np.linalg.norm(delta_phi))},
    )


def calibrate_feature_precision(
    explained_events: Sequence[tuple],
    unexplained_events: Sequence[tuple],
    alpha: float = THETA_STEP,
    candidates: Sequence[float] = tuple(np.logspace(*PRECISION_CANDIDATES)),
    ratio: float = PRECISION_MOVE_RATIO
) -> float:
    """
    Smallest ν for which unexplained events move θ̂ less than `ratio` times the
    mean move of explained events.

    Args:
        explained_events: (θ̂, ΔΦ, per-feature P(E=1|β̂)) tuples from well-explained corrections
        unexplained_events: Same for poorly-explained corrections
        alpha: Update step
        candidates: Increasing ν values to try
        ratio: Required ratio of mean update magnitudes

    Returns:
        Chosen ν

    Raises:
        CalibrationError: if no candidate meets the ratio
    """
    if not explained_events or not unexplained_events:
        raise ValueError('Precision calibration needs explained and unexplained events')

    def mean_move(events, cfg):
        moves = []
        for theta, delta_phi, p in events:
            for j in range(len(delta_phi)):
                updated = adaptive_theta_update(theta[j:j + 1], delta_phi[j:j + 1], p[j], cfg, 1)
                moves.append(abs(updated[0] - theta[j]))
        return float(np.mean(moves))

    ratios = {}
    for nu in candidates:
        cfg = ThetaUpdateConfig(alpha=alpha, nu=float(nu))
        explained = mean_move(explained_events, cfg)
        unexplained = mean_move(unexplained_events, cfg)
        ratios[float(nu)] = unexplained / explained if explained > 0 else float('inf')
        if explained > 0 and unexplained < ratio * explained:
            return float(nu)
    raise CalibrationError(
        f'No candidate precision met the {ratio:.0%} ratio',
        {'best_ratio': min(ratios.values()), 'candidates': len(ratios)}
    )
