"""Situational confidence from corrections: β̂, its Laplace likelihood and the explanation model."""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import expit
from scipy.stats import chi2

from .constants import *
from .errors import ConvergenceError, InfeasibleCorrectionError
from .optimizer import CorrectionSolution

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BetaEstimatorConfig:
    effort_weight: float = EFFORT_WEIGHT
    action_dim: int = 3
    denominator_floor: float = BETA_DENOMINATOR_FLOOR
    beta_cap: float = BETA_HAT_CAP

    def __post_init__(self):
        if not self.effort_weight > 0:
            raise ValueError(f'Effort weight λ must be positive, got {self.effort_weight}')
        if self.action_dim < 1:
            raise ValueError(f'Action dimension must be at least 1, got {self.action_dim}')
        if not self.denominator_floor > 0:
            raise ValueError(f'Denominator floor must be positive, got {self.denominator_floor}')
        if not self.beta_cap > 0:
            raise ValueError(f'β̂ cap must be positive, got {self.beta_cap}')


# =============================================================================
# β̂ ESTIMATION
# =============================================================================

def _effort_gap(u_h: Sequence[float], solution: CorrectionSolution) -> float:
    u_h = np.asarray(u_h, dtype=float)
    return float(u_h @ u_h - solution.u_star @ solution.u_star)


def estimate_beta_hat(u_h: Sequence[float], solution: CorrectionSolution, cfg: BetaEstimatorConfig) -> float:
    """
    Closed-form maximizer of the Laplace likelihood, k / (2λ(‖u_H‖² − ‖u*‖²)).

    The denominator is floored at δ and the result capped, so β̂ is always positive.

    Raises:
        InfeasibleCorrectionError: if the minimal-effort solve did not converge
    """
    if not solution.converged:
        raise InfeasibleCorrectionError(
            'Cannot estimate β̂ from an unconverged correction solution',
            {'residual': solution.constraint_residual, 'features': solution.constrained_features},
        )
    gap = max(_effort_gap(u_h, solution), cfg.denominator_floor)
    return float(min(cfg.action_dim / (2.0 * cfg.effort_weight * gap), cfg.beta_cap))


def laplace_loglik(u_h: Sequence[float], solution: CorrectionSolution, beta: float, cfg: BetaEstimatorConfig) -> float:
    """
    Laplace-approximated log P(u_H | β):
    −βλ(‖u_H‖² − ‖u*‖²) + ½ log(βᵏ|H| / (2π)ᵏ).
    """
    if not solution.converged:
        raise InfeasibleCorrectionError('Cannot evaluate the likelihood of an unconverged correction solution')
    if not beta > 0:
        raise ValueError(f'β must be positive, got {beta}')
    sign, log_det = np.linalg.slogdet(solution.hessian)
    if sign <= 0:
        raise ConvergenceError('Hessian determinant is not positive', {'sign': float(sign)})
    k = cfg.action_dim
    return float(
        -beta * cfg.effort_weight * _effort_gap(u_h, solution)
        + 0.5 * (k * np.log(beta) + log_det - k * np.log(2 * np.pi))
    )


# =============================================================================
# CHI-SQUARED FITS
# =============================================================================

@dataclass(frozen=True)
class ChiSquaredFit:
    df: float
    scale: float
    sample_count: int

    def __post_init__(self):
        if not self.df > 0 or not self.scale > 0:
            raise ValueError(f'Chi-squared fit needs positive df and scale, got df={self.df}, scale={self.scale}')

    def logpdf(self, x: float) -> float:
        return float(chi2.logpdf(x, self.df, loc=0.0, scale=self.scale))

    def pdf(self, x: float) -> float:
        return float(chi2.pdf(x, self.df, loc=0.0, scale=self.scale))

    def to_dict(self) -> dict:
        return {'df': self.df, 'scale': self.scale, 'sample_count': self.sample_count}


def fit_chi_squared(samples: Sequence[float]) -> ChiSquaredFit:
    """
    Maximum-likelihood chi-squared fit with location fixed at 0.

    For a fixed df the optimal scale is mean/df, so the fit is a bounded
    1-D search over log df on the profile likelihood.

    Raises:
        ValueError: fewer than 10 samples, non-finite or nonpositive samples, or all samples equal
    """
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size < MIN_CALIBRATION_SAMPLES:
        raise ValueError(f'Need at least {MIN_CALIBRATION_SAMPLES} samples to fit, got {samples.size}')
    if not np.all(np.isfinite(samples)) or np.any(samples <= 0):
        raise ValueError('Chi-squared samples must be finite and positive')
    if np.ptp(samples) == 0:
        raise ValueError('Chi-squared samples are all equal; the fit is degenerate')

    mean = samples.mean()

    def negative_profile(log_df: float) -> float:
        df = np.exp(log_df)
        return -float(np.sum(chi2.logpdf(samples, df, loc=0.0, scale=mean / df)))

    result = minimize_scalar(negative_profile, bounds=(np.log(1e-3), np.log(1e4)), method='bounded',
                             options={'xatol': 1e-10})
    df = float(np.exp(result.x))
    return ChiSquaredFit(df=df, scale=float(mean / df), sample_count=int(samples.size))


# =============================================================================
# EXPLANATION MODEL
# =============================================================================

@dataclass(frozen=True)
class FeatureExplanationFits:
    unexplained: ChiSquaredFit
    explained: ChiSquaredFit


@dataclass
class ExplanationModel:
    """Per-feature P(β̂ | E) fits and the prior P(E=1)."""
    fits: Dict[str, FeatureExplanationFits]
    prior_explained: float = PRIOR_EXPLAINED
    feature_precision: Optional[float] = None
    feature_names: List[str] = field(default_factory=list)

    def __post_init__(self):
        if not 0 <= self.prior_explained <= 1:
            raise ValueError(f'Prior P(E=1) must lie in [0, 1], got {self.prior_explained}')
        if not self.feature_names:
            self.feature_names = list(self.fits)
        missing = [name for name in self.feature_names if name not in self.fits]
        if missing:
            raise ValueError(f'Explanation model has no fits for {missing}')

    def fits_for(self, feature: Union[int, str]) -> FeatureExplanationFits:
        name = self.feature_names[feature] if isinstance(feature, (int, np.integer)) else feature
        if name not in self.fits:
            raise KeyError(f'No explanation fits for feature {name}')
        return self.fits[name]

    def to_dict(self) -> dict:
        return {
            'prior_explained': self.prior_explained,
            'feature_precision': self.feature_precision,
            'feature_names': list(self.feature_names),
            'fits': {
                name: {'unexplained': pair.unexplained.to_dict(), 'explained': pair.explained.to_dict()}
                for name, pair in self.fits.items()
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'ExplanationModel':
        fits = {
            name: FeatureExplanationFits(
                unexplained=ChiSquaredFit(**pair['unexplained']),
                explained=ChiSquaredFit(**pair['explained']),
            )
            for name, pair in data['fits'].items()
        }
        return cls(
            fits=fits,
            prior_explained=float(data.get('prior_explained', PRIOR_EXPLAINED)),
            feature_precision=data.get('feature_precision'),
            feature_names=list(data.get('feature_names', list(fits))),
        )


def explanation_posterior(beta_hat: float, model: ExplanationModel, feature: Union[int, str]) -> float:
    """
    P(E=1 | β̂) ∝ P(β̂ | E=1) P(E=1).

    When both densities vanish at β̂ the prior is returned.
    """
    prior = model.prior_explained
    if prior >= 1.0:
        return 1.0
    if prior <= 0.0:
        return 0.0

    pair = model.fits_for(feature)
    log_explained = pair.explained.logpdf(beta_hat)
    log_unexplained = pair.unexplained.logpdf(beta_hat)
    if not np.isfinite(log_explained) and not np.isfinite(log_unexplained):
        return prior
    return float(expit(np.log(prior) + log_explained - np.log1p(-prior) - log_unexplained))
