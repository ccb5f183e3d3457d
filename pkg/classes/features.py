"""Trajectory features, linear costs and their analytic gradients."""

from typing import Sequence

import numpy as np

from .constants import *
from .environment import EnvironmentSpec, FeatureConfig, check_trajectory


# =============================================================================
# RAW FEATURES
# =============================================================================

def efficiency_feature(traj: np.ndarray, env: EnvironmentSpec) -> float:
    """Sum of squared waypoint velocities, Σ‖(x^i − x^{i−1})/Δt‖²."""
    velocities = np.diff(traj, axis=0) / env.dt
    return float(np.sum(velocities ** 2))


def table_feature(traj: np.ndarray, env: EnvironmentSpec) -> float:
    """Sum of unsigned distances from each waypoint to the table plane."""
    return float(np.sum(np.abs(traj[:, -1] - env.table_offset)))


def hinge_feature(traj: np.ndarray, center: np.ndarray, radius: float, smooth: bool = False) -> float:
    """
    Penalty sphere Σ max{0, L − ‖x^i − c‖}.

    Args:
        traj: Waypoints, shape (T+1, n)
        center: Sphere center
        radius: Sphere radius L
        smooth: Blend the kink with a quadratic over a band of width 0.05·L
    """
    slack = radius - np.linalg.norm(traj - center[None, :], axis=1)
    if smooth:
        return float(np.sum(_smooth_hinge(slack, HINGE_SMOOTHING_FRACTION * radius)))
    return float(np.sum(np.maximum(0.0, slack)))


def _smooth_hinge(slack: np.ndarray, width: float) -> np.ndarray:
    half = width / 2
    blended = (slack + half) ** 2 / (2 * width)
    return np.where(slack <= -half, 0.0, np.where(slack >= half, slack, blended))


def _smooth_hinge_slope(slack: np.ndarray, width: float) -> np.ndarray:
    half = width / 2
    return np.where(slack <= -half, 0.0, np.where(slack >= half, 1.0, (slack + half) / width))


def raw_feature(name: str, traj: np.ndarray, env: EnvironmentSpec, smooth: bool = False) -> float:
    if name == EFFICIENCY:
        return efficiency_feature(traj, env)
    if name == TABLE:
        return table_feature(traj, env)
    if name == LAPTOP:
        return hinge_feature(traj, env.laptop_center, env.laptop_radius, smooth)
    if name == HUMAN:
        return hinge_feature(traj, env.human_center, env.human_radius, smooth)
    raise ValueError(f'Unknown feature: {name}')


def raw_features(traj: np.ndarray, env: EnvironmentSpec, names: Sequence[str], smooth: bool = False) -> np.ndarray:
    """Unnormalized feature values in the order of `names`."""
    traj = check_trajectory(traj, env)
    return np.array([raw_feature(name, traj, env, smooth) for name in names])


def compute_features(
    traj: np.ndarray,
    env: EnvironmentSpec,
    cfg: FeatureConfig,
    smooth: bool = False
) -> np.ndarray:
    """
    Normalized feature vector Φ(traj) for the enabled features.

    Args:
        traj: Waypoints, shape (T+1, n)
        env: Environment the trajectory lives in
        cfg: Enabled features and their divisors
        smooth: Use the C¹ hinge (optimizer view) instead of the raw one (reporting view)

    Returns:
        Array of length cfg.dimension
    """
    return raw_features(traj, env, cfg.features, smooth) / cfg.divisors()


# =============================================================================
# GRADIENTS
# =============================================================================

def _raw_feature_gradient(name: str, traj: np.ndarray, env: EnvironmentSpec) -> np.ndarray:
    gradient = np.zeros_like(traj)

    if name == EFFICIENCY:
        scaled = 2.0 * np.diff(traj, axis=0) / env.dt ** 2
        gradient[1:] += scaled
        gradient[:-1] -= scaled
        return gradient

    if name == TABLE:
        gradient[:, -1] = np.sign(traj[:, -1] - env.table_offset)
        return gradient

    if name in (LAPTOP, HUMAN):
        center = env.laptop_center if name == LAPTOP else env.human_center
        radius = env.laptop_radius if name == LAPTOP else env.human_radius
        offsets = traj - center[None, :]
        distances = np.maximum(np.linalg.norm(offsets, axis=1), 1e-12)
        slopes = _smooth_hinge_slope(radius - distances, HINGE_SMOOTHING_FRACTION * radius)
        return -(slopes / distances)[:, None] * offsets

    raise ValueError(f'Unknown feature: {name}')


def feature_gradients(traj: np.ndarray, env: EnvironmentSpec, cfg: FeatureConfig) -> np.ndarray:
    """
    Gradients of the smoothed, normalized features with respect to every waypoint.

    Returns:
        Array of shape (d, T+1, n)
    """
    traj = check_trajectory(traj, env)
    divisors = cfg.divisors()
    return np.stack([
        _raw_feature_gradient(name, traj, env) / divisor
        for name, divisor in zip(cfg.features, divisors)
    ])


def cost_and_gradient(theta: np.ndarray, traj: np.ndarray, env: EnvironmentSpec, cfg: FeatureConfig):
    """Smoothed cost θᵀΦ(traj) and its gradient with respect to the waypoints."""
    theta = _check_theta(theta, cfg.dimension)
    phi = compute_features(traj, env, cfg, smooth=True)
    gradient = np.tensordot(theta, feature_gradients(traj, env, cfg), axes=1)
    return float(theta @ phi), gradient


# =============================================================================
# COSTS
# =============================================================================

def _check_theta(theta, d: int) -> np.ndarray:
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.shape[0] != d:
        raise ValueError(f'Weight vector has {theta.shape[0]} components, expected {d}')
    return theta


def linear_cost(theta: Sequence[float], phi: Sequence[float]) -> float:
    """θᵀΦ."""
    phi = np.asarray(phi, dtype=float).reshape(-1)
    theta = _check_theta(theta, phi.shape[0])
    return float(theta @ phi)


def phri_cost(theta: Sequence[float], phi_d: Sequence[float], u_h: Sequence[float], effort_weight: float) -> float:
    """
    Cost of a corrected trajectory plus the human's effort, θᵀΦ_D + λ‖u_H‖².
    """
    if effort_weight < 0:
        raise ValueError(f'Effort weight must be nonnegative, got {effort_weight}')
    u_h = np.asarray(u_h, dtype=float)
    return linear_cost(theta, phi_d) + effort_weight * float(u_h @ u_h)
