"""Offline calibration of the explanation model P(β̂ | E) from labeled simulated corrections."""

import logging
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd

from classes.beta_estimator import (
    BetaEstimatorConfig,
    ExplanationModel,
    FeatureExplanationFits,
    estimate_beta_hat,
    explanation_posterior,
    fit_chi_squared,
)
from classes.constants import *
from classes.deformation import deform
from classes.errors import ConfigError, InfeasibleCorrectionError
from classes.features import compute_features
from classes.file_handler import save_csv, save_json
from classes.helper import derive_seeds, weights_from_mapping
from classes.optimizer import minimal_effort_correction, optimize_trajectory
from classes.sim_human import simulate_correction, true_cost_from_weights
from classes.theta_update import calibrate_feature_precision
from services.experiment_service import ExperimentContext, MetricsReport

logger = logging.getLogger(__name__)

MAX_ATTEMPTS_PER_SAMPLE = 5


def collect_calibration_samples(context: ExperimentContext) -> pd.DataFrame:
    """
    Labeled β̂ samples for every calibrated feature.

    A simulated human who cares only about the feature pushes efficiently to
    change it (E=1) and sideways, leaving every modeled feature nearly unchanged (E=0).
    Timesteps are drawn uniformly among interior waypoints and push magnitudes
    vary by ±50% around the configured value.

    Returns:
        DataFrame with columns feature, style, explained, t, magnitude, beta_hat, delta_phi, theta
    """
    config = context.config
    calibration = config.calibration
    if calibration is None:
        raise ConfigError('Experiment has no calibration section', config.path, 'calibration')
    env, modeled, op = context.env, context.features, context.operator
    missing = [name for name in calibration.features if name not in modeled.features]
    if missing:
        raise ConfigError(f'Calibration features {missing} are not modeled', config.path, 'calibration.features')

    initial_theta = weights_from_mapping(calibration.initial_weights, modeled.features)
    xi_r = optimize_trajectory(initial_theta, env, modeled).trajectory
    phi_r = compute_features(xi_r, env, modeled, smooth=True)
    beta_config = BetaEstimatorConfig(effort_weight=config.effort_weight, action_dim=env.n)

    rows = []
    seeds = iter(derive_seeds(config.seed, 2 * len(calibration.features)))
    for feature in calibration.features:
        true_cost = true_cost_from_weights({feature: 1.0}, context.trajectory_set,
                                           calibration.rationality, config.effort_weight)
        j = modeled.index(feature)
        for style in CORRECTION_STYLES:
            rng = np.random.default_rng(next(seeds))
            collected, attempts = 0, 0
            while collected < calibration.samples_per_condition:
                attempts += 1
                if attempts > MAX_ATTEMPTS_PER_SAMPLE * calibration.samples_per_condition:
                    break
                t = int(rng.integers(1, env.T))
                magnitude = calibration.magnitude * rng.uniform(0.5, 1.5)
                try:
                    event = simulate_correction(true_cost, xi_r, t, style, magnitude, env, op, modeled, rng=rng)
                    phi_d = compute_features(deform(xi_r, event, op), env, modeled, smooth=True)
                    solution = minimal_effort_correction(phi_d, xi_r, t, op, env, modeled,
                                                         witness=event.u_h, restrict_to=[feature])
                    beta_hat = estimate_beta_hat(event.u_h, solution, beta_config)
                except InfeasibleCorrectionError as e:
                    logger.debug(f'Skipping {style} correction of {feature} at t={t}: {e}')
                    continue
                rows.append({
                    'feature': feature,
                    'style': style,
                    'explained': style == STYLE_EFFICIENT,
                    't': t,
                    'magnitude': float(magnitude),
                    'beta_hat': beta_hat,
                    'delta_phi': float(phi_d[j] - phi_r[j]),
                    'theta': float(initial_theta[j]),
                })
                collected += 1
            if collected < calibration.samples_per_condition:
                logger.warning(f'Only {collected}/{calibration.samples_per_condition} {style} samples for {feature}')
            else:
                logger.info(f'Collected {collected} {style} samples for {feature} in {attempts} attempts')

    return pd.DataFrame(rows, columns=['feature', 'style', 'explained', 't', 'magnitude',
                                       'beta_hat', 'delta_phi', 'theta'])


def fit_explanation_model(
    samples: pd.DataFrame,
    features: List[str],
    prior_explained: float = PRIOR_EXPLAINED,
    min_samples: int = MIN_CALIBRATION_SAMPLES
) -> ExplanationModel:
    """
    Fit P(β̂ | E=0) and P(β̂ | E=1) for every feature.

    Raises:
        ValueError: if a feature lacks `min_samples` samples in either condition
    """
    fits = {}
    for feature in features:
        rows = samples[samples['feature'] == feature]
        explained = rows.loc[rows['explained'].astype(bool), 'beta_hat'].to_numpy(dtype=float)
        unexplained = rows.loc[~rows['explained'].astype(bool), 'beta_hat'].to_numpy(dtype=float)
        if len(explained) < min_samples or len(unexplained) < min_samples:
            raise ValueError(
                f'Insufficient calibration samples for {feature}: {len(explained)} explained, '
                f'{len(unexplained)} unexplained (need {min_samples} of each)'
            )
        fits[feature] = FeatureExplanationFits(
            unexplained=fit_chi_squared(unexplained),
            explained=fit_chi_squared(explained),
        )
    return ExplanationModel(fits=fits, prior_explained=prior_explained, feature_names=list(features))


def _precision_events(samples: pd.DataFrame, model: ExplanationModel) -> Tuple[list, list]:
    explained, unexplained = [], []
    for row in samples.itertuples(index=False):
        p = explanation_posterior(row.beta_hat, model, row.feature)
        event = (np.array([row.theta]), np.array([row.delta_phi]), [p])
        (explained if row.explained else unexplained).append(event)
    return explained, unexplained


def calibrate_beta_model(
    context: ExperimentContext,
    out_dir: Optional[str] = None
) -> Tuple[ExplanationModel, MetricsReport]:
    """
    Collect labeled β̂ samples, fit the explanation model and (unless fixed in the
    experiment) calibrate the feature precision ν on the same samples.

    Args:
        context: Loaded experiment with a calibration section
        out_dir: When given, the model JSON and the samples CSV are written here

    Returns:
        (ExplanationModel, MetricsReport with mean β̂ per feature and condition)
    """
    config = context.config
    samples = collect_calibration_samples(context)
    model = fit_explanation_model(samples, config.calibration.features, config.calibration.prior_explained)

    if config.nu is not None:
        model.feature_precision = config.nu
    else:
        explained_events, unexplained_events = _precision_events(samples, model)
        model.feature_precision = calibrate_feature_precision(explained_events, unexplained_events, config.alpha)
    logger.info(f'Explanation model fitted for {model.feature_names}, ν={model.feature_precision}')

    report = MetricsReport(kind='beta_calibration', seed=config.seed, settings={
        'samples_per_condition': config.calibration.samples_per_condition,
        'rationality': config.calibration.rationality,
        'magnitude': config.calibration.magnitude,
        'fits': model.to_dict()['fits'],
        'feature_precision': model.feature_precision,
    })
    for feature, rows in samples.groupby('feature', sort=True):
        report.mean_beta_hat[feature] = {
            'explained': float(rows.loc[rows['explained'].astype(bool), 'beta_hat'].mean()),
            'unexplained': float(rows.loc[~rows['explained'].astype(bool), 'beta_hat'].mean()),
        }

    if out_dir is not None:
        save_json(model.to_dict(), out_dir, EXPLANATION_MODEL_FILE_NAME)
        save_csv(samples, out_dir, CALIBRATION_SAMPLES_FILE_NAME)
    return model, report
