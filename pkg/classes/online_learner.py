"""Online learning from physical corrections: deform, estimate confidence, update, replan."""

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence

import numpy as np
import pandas as pd

from .beta_estimator import (
    BetaEstimatorConfig,
    ExplanationModel,
    estimate_beta_hat,
    explanation_posterior,
    laplace_loglik,
)
from .constants import *
from .deformation import DeformationOperator, deform
from .environment import CorrectionEvent, EnvironmentSpec, FeatureConfig
from .errors import InfeasibleCorrectionError
from .features import compute_features
from .optimizer import CorrectionSolution, OptimizerConfig, minimal_effort_correction, optimize_trajectory
from .theta_update import ThetaUpdateConfig, adaptive_theta_update, fixed_theta_update

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OnlineLearner:
    """Everything an online step depends on besides the learner state."""
    env: EnvironmentSpec
    features: FeatureConfig
    operator: DeformationOperator
    mode: str = MODE_ADAPTIVE
    model: Optional[ExplanationModel] = None
    optimizer_config: OptimizerConfig = field(default_factory=OptimizerConfig)
    beta_config: Optional[BetaEstimatorConfig] = None
    update_config: ThetaUpdateConfig = field(default_factory=ThetaUpdateConfig)

    def __post_init__(self):
        if self.mode not in UPDATE_MODES:
            raise ValueError(f'Unknown update mode {self.mode}; expected one of {UPDATE_MODES}')
        if self.mode == MODE_ADAPTIVE and self.model is None:
            raise ValueError('Adaptive updates need an explanation model')
        if self.beta_config is None:
            object.__setattr__(self, 'beta_config', BetaEstimatorConfig(action_dim=self.env.n))
        elif self.beta_config.action_dim != self.env.n:
            raise ValueError(f'β̂ action dimension {self.beta_config.action_dim} differs from n={self.env.n}')


@dataclass
class OnlineLearnerState:
    theta: np.ndarray
    trajectory: np.ndarray
    timestep: int = 0
    history: List[dict] = field(default_factory=list)
    theta_path: List[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        self.theta = np.maximum(np.asarray(self.theta, dtype=float), 0.0)
        if not self.theta_path:
            self.theta_path = [self.theta.copy()]


def initial_state(theta: Sequence[float], learner: OnlineLearner) -> OnlineLearnerState:
    """Plan the first trajectory from start to goal for the initial estimate."""
    theta = np.maximum(np.asarray(theta, dtype=float), 0.0)
    plan = optimize_trajectory(theta, learner.env, learner.features, learner.optimizer_config)
    return OnlineLearnerState(theta=theta, trajectory=plan.trajectory)


def feature_beta_hats(
    event: CorrectionEvent,
    xi_r: np.ndarray,
    phi_d: np.ndarray,
    learner: OnlineLearner
) -> List[tuple]:
    """
    β̂ for every modeled feature, each from its own minimal-effort problem.

    Returns:
        List of (feature name, CorrectionSolution, β̂)
    """
    results = []
    for name in learner.features.features:
        solution = minimal_effort_correction(
            phi_d, xi_r, event.t, learner.operator, learner.env, learner.features,
            learner.optimizer_config, witness=event.u_h, restrict_to=[name],
        )
        results.append((name, solution, estimate_beta_hat(event.u_h, solution, learner.beta_config)))
    return results


def online_step(
    state: OnlineLearnerState,
    event: Optional[CorrectionEvent],
    learner: OnlineLearner
) -> OnlineLearnerState:
    """
    Advance the learner by one timestep.

    Without a correction the robot moves on along its plan. With one, the push is
    turned into a deformed trajectory and θ̂ is updated. Fixed mode applies the
    plain gradient step and records NaN confidences; adaptive mode estimates each
    feature's β̂ and weights its step by P(E=1 | β̂). The remaining trajectory is
    replanned before the next input is read. The input state is never modified.
    """
    if event is None:
        return replace(state, timestep=state.timestep + 1, history=list(state.history),
                       theta_path=list(state.theta_path))

    env = learner.env
    event.check_horizon(env)
    xi_r = state.trajectory
    xi_d = deform(xi_r, event, learner.operator)
    phi_r = compute_features(xi_r, env, learner.features, smooth=True)
    phi_d = compute_features(xi_d, env, learner.features, smooth=True)
    delta_phi = phi_d - phi_r

    records = []
    if learner.mode == MODE_FIXED:
        theta = fixed_theta_update(state.theta, delta_phi, learner.update_config.alpha)
        nan = float('nan')
        rows = [(name, nan, nan, nan) for name in learner.features.features]
    else:
        theta = state.theta.copy()
        rows = []
        for j, (name, solution, beta_hat) in enumerate(feature_beta_hats(event, xi_r, phi_d, learner)):
            p_explained = explanation_posterior(beta_hat, learner.model, name)
            theta[j] = adaptive_theta_update(
                state.theta[j:j + 1], delta_phi[j:j + 1], p_explained, learner.update_config, 1
            )[0]
            loglik = laplace_loglik(event.u_h, solution, beta_hat, learner.beta_config)
            rows.append((name, beta_hat, p_explained, loglik))
        theta = np.maximum(theta, 0.0)

    for j, (name, beta_hat, p_explained, loglik) in enumerate(rows):
        records.append({
            'step': len(state.theta_path),
            't': event.t,
            'feature': name,
            'beta_hat': beta_hat,
            'p_explained': p_explained,
            'delta_phi': float(delta_phi[j]),
            'laplace_loglik': loglik,
            **{f'theta_{feature}': float(value) for feature, value in zip(learner.features.features, theta)},
        })

    fixed_prefix = min(state.timestep + 1, env.T)
    plan = optimize_trajectory(theta, env, learner.features, learner.optimizer_config,
                               initial=xi_r, fixed_prefix=fixed_prefix)
    logger.debug(f'Correction at t={event.t}: θ̂ {np.round(state.theta, 4).tolist()} -> {np.round(theta, 4).tolist()}')

    return OnlineLearnerState(
        theta=theta,
        trajectory=plan.trajectory,
        timestep=state.timestep + 1,
        history=list(state.history) + records,
        theta_path=list(state.theta_path) + [theta.copy()],
    )


def run_episode(
    state: OnlineLearnerState,
    learner: OnlineLearner,
    correction_source: Callable[[OnlineLearnerState], Optional[CorrectionEvent]],
    skip_infeasible: bool = False
) -> OnlineLearnerState:
    """
    Step until the robot reaches the goal, asking `correction_source` for input each timestep.

    With `skip_infeasible`, a correction whose confidence estimate cannot be solved
    is dropped with a warning and the robot moves on as if it had not been pushed.
    """
    while state.timestep < learner.env.T:
        event = correction_source(state)
        try:
            state = online_step(state, event, learner)
        except InfeasibleCorrectionError as e:
            if not skip_infeasible or event is None:
                raise
            logger.warning(f'Dropping correction at t={event.t}: {e}')
            state = online_step(state, None, learner)
    return state


def theta_path_length(state: OnlineLearnerState) -> float:
    """Σ‖θ̂_{i+1} − θ̂_i‖ over the interaction history."""
    path = np.array(state.theta_path)
    if len(path) < 2:
        return 0.0
    return float(np.sum(np.linalg.norm(np.diff(path, axis=0), axis=1)))


def history_to_frame(state: OnlineLearnerState) -> pd.DataFrame:
    return pd.DataFrame(state.history)
