"""
Trajectory optimization, trajectory-set sampling and the minimal-effort
correction solver.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from .constants import *
from .deformation import DeformationOperator, check_operator
from .environment import EnvironmentSpec, FeatureConfig, check_trajectory, environment_from_dict
from .features import compute_features, cost_and_gradient, feature_gradients, raw_features
from .file_handler import load_json, save_json
from .helper import derive_seeds, normalize_weights

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OptimizerConfig:
    max_iters: int = OPT_MAX_ITERS
    gradient_tolerance: float = OPT_GRADIENT_TOLERANCE
    backtrack_shrink: float = OPT_BACKTRACK_SHRINK
    sufficient_decrease: float = OPT_SUFFICIENT_DECREASE
    initial_step: float = OPT_INITIAL_STEP
    max_step: float = 100.0
    max_displacement: float = OPT_MAX_DISPLACEMENT
    kappa_start: float = PENALTY_KAPPA_START
    kappa_growth: float = PENALTY_KAPPA_GROWTH
    kappa_max: float = PENALTY_KAPPA_MAX
    inner_gtol: float = PENALTY_INNER_GTOL
    constraint_tolerance: float = CONSTRAINT_TOLERANCE
    hessian_step: float = HESSIAN_STEP
    hessian_eigen_floor: float = HESSIAN_EIGEN_FLOOR

    def __post_init__(self):
        positive = {
            'max_iters': self.max_iters,
            'gradient_tolerance': self.gradient_tolerance,
            'sufficient_decrease': self.sufficient_decrease,
            'initial_step': self.initial_step,
            'max_step': self.max_step,
            'max_displacement': self.max_displacement,
            'kappa_start': self.kappa_start,
            'kappa_max': self.kappa_max,
            'inner_gtol': self.inner_gtol,
            'constraint_tolerance': self.constraint_tolerance,
            'hessian_step': self.hessian_step,
            'hessian_eigen_floor': self.hessian_eigen_floor,
        }
        for name, value in positive.items():
            if not value > 0:
                raise ValueError(f'{name} must be positive, got {value}')
        if not 0 < self.backtrack_shrink < 1:
            raise ValueError(f'backtrack_shrink must lie in (0, 1), got {self.backtrack_shrink}')
        if not self.kappa_growth > 1:
            raise ValueError(f'kappa_growth must exceed 1, got {self.kappa_growth}')
        if self.kappa_max < self.kappa_start:
            raise ValueError('kappa_max must be at least kappa_start')

    def kappa_schedule(self) -> List[float]:
        schedule = []
        kappa = self.kappa_start
        while kappa <= self.kappa_max * (1 + 1e-12):
            schedule.append(kappa)
            kappa *= self.kappa_growth
        return schedule


# =============================================================================
# TRAJECTORY OPTIMIZATION
# =============================================================================

@dataclass
class OptimizationResult:
    trajectory: np.ndarray
    cost: float
    converged: bool
    iterations: int
    cost_history: List[float] = field(default_factory=list)


def optimize_trajectory(
    theta: Sequence[float],
    env: EnvironmentSpec,
    features: FeatureConfig,
    config: Optional[OptimizerConfig] = None,
    initial: Optional[np.ndarray] = None,
    fixed_prefix: int = 1
) -> OptimizationResult:
    """
    Minimize θᵀΦ over the free waypoints by projected gradient descent.

    The first `fixed_prefix` waypoints and the goal stay fixed; free waypoints
    are kept inside the workspace box. Trial steps use the Barzilai-Borwein
    length, shortened so no waypoint coordinate moves more than
    `config.max_displacement` per iteration, and are backtracked until the Armijo
    condition holds, so the cost history is nonincreasing.

    Args:
        theta: Weight vector over `features`
        env: Environment
        features: Feature configuration used for the smoothed cost
        config: Optimizer settings
        initial: Starting trajectory (defaults to the straight line)
        fixed_prefix: Number of leading waypoints held fixed (at least 1)

    Returns:
        OptimizationResult with the best iterate; converged=False if max_iters was hit
        or the line search stalled
    """
    config = config or OptimizerConfig()
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.shape[0] != features.dimension:
        raise ValueError(f'Weight vector has {theta.shape[0]} components, expected {features.dimension}')
    if not np.all(np.isfinite(theta)):
        raise ValueError('Weight vector must be finite')
    if not 1 <= fixed_prefix <= env.T:
        raise ValueError(f'fixed_prefix must lie in [1, {env.T}], got {fixed_prefix}')

    x = env.straight_line() if initial is None else check_trajectory(initial, env).copy()
    if initial is None or fixed_prefix == 1:
        x[0] = env.start
    x[-1] = env.goal

    free = np.zeros(env.waypoint_count, dtype=bool)
    free[fixed_prefix:env.T] = True

    def project(candidate: np.ndarray) -> np.ndarray:
        projected = candidate.copy()
        projected[free] = env.clip_to_workspace(candidate[free])
        projected[~free] = x_fixed[~free]
        return projected

    x_fixed = x.copy()
    x = project(x)
    cost, gradient = cost_and_gradient(theta, x, env, features)
    gradient[~free] = 0.0
    history = [cost]

    step = config.initial_step
    previous_x = previous_gradient = None
    converged = False
    iterations = 0

    for iterations in range(1, config.max_iters + 1):
        if np.linalg.norm(x - project(x - gradient)) <= config.gradient_tolerance:
            converged = True
            break

        if previous_x is not None:
            s = (x - previous_x).ravel()
            y = (gradient - previous_gradient).ravel()
            curvature = s @ y
            step = min(s @ s / curvature, config.max_step) if curvature > 0 else config.initial_step
        largest = np.max(np.abs(gradient))
        if largest > 0:
            step = min(step, config.max_displacement / largest)

        accepted = False
        while step >= OPT_MIN_STEP:
            candidate = project(x - step * gradient)
            candidate_cost, candidate_gradient = cost_and_gradient(theta, candidate, env, features)
            decrease = float(np.sum(gradient * (x - candidate)))
            if candidate_cost <= cost - config.sufficient_decrease * decrease:
                accepted = True
                break
            step *= config.backtrack_shrink

        if not accepted:
            logger.debug(f'Line search stalled after {iterations} iterations at cost {cost:.6g}')
            break

        previous_x, previous_gradient = x, gradient
        x, cost, gradient = candidate, candidate_cost, candidate_gradient
        gradient[~free] = 0.0
        history.append(cost)

    if not converged:
        logger.debug(f'Trajectory optimization did not converge (theta={np.round(theta, 4).tolist()})')

    return OptimizationResult(trajectory=x, cost=cost, converged=converged, iterations=iterations, cost_history=history)


# =============================================================================
# TRAJECTORY SET
# =============================================================================

@dataclass(eq=False)
class TrajectorySet:
    """
    Sampled trajectories approximating the Boltzmann partition function.

    Raw (unnormalized, unsmoothed) values of every known feature are cached so the
    same set serves the robot's modeled features and simulated true costs.
    """
    env: EnvironmentSpec
    feature_config: FeatureConfig
    trajectories: np.ndarray
    raw_features: np.ndarray
    seed: int
    thetas: Optional[np.ndarray] = None

    def __post_init__(self):
        self.trajectories = np.asarray(self.trajectories, dtype=float)
        self.raw_features = np.asarray(self.raw_features, dtype=float)
        if self.trajectories.ndim != 3 or len(self.trajectories) == 0:
            raise ValueError('Trajectory set must contain at least one trajectory')
        if self.trajectories.shape[1:] != (self.env.waypoint_count, self.env.n):
            raise ValueError('Trajectory set members do not match the environment')
        if self.raw_features.shape != (len(self.trajectories), len(ALL_FEATURES)):
            raise ValueError('Feature cache does not match the trajectory count')

    def __len__(self) -> int:
        return len(self.trajectories)

    @property
    def features(self) -> np.ndarray:
        """Normalized modeled features, shape (m, d)."""
        return self.feature_matrix(self.feature_config)

    def feature_matrix(self, cfg: FeatureConfig) -> np.ndarray:
        columns = [ALL_FEATURES.index(name) for name in cfg.features]
        return self.raw_features[:, columns] / cfg.divisors()

    def config_for(self, names: Sequence[str]) -> FeatureConfig:
        """Feature configuration over `names` sharing this set's normalizers."""
        return self.feature_config.with_features(names)

    def to_dict(self) -> dict:
        return {
            'seed': self.seed,
            'environment': self.env.to_dict(),
            'features': self.feature_config.to_dict(),
            'feature_names': list(ALL_FEATURES),
            'trajectories': self.trajectories.tolist(),
            'raw_features': self.raw_features.tolist(),
            'thetas': None if self.thetas is None else self.thetas.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'TrajectorySet':
        env, _ = environment_from_dict(data['environment'])
        if data.get('feature_names', ALL_FEATURES) != ALL_FEATURES:
            raise ValueError(f'Cached feature order {data.get("feature_names")} does not match {ALL_FEATURES}')
        thetas = data.get('thetas')
        return cls(
            env=env,
            feature_config=FeatureConfig(**data['features']),
            trajectories=np.array(data['trajectories']),
            raw_features=np.array(data['raw_features']),
            seed=int(data['seed']),
            thetas=None if thetas is None else np.array(thetas),
        )


def fit_normalizers(raw: np.ndarray) -> Dict[str, float]:
    """
    Per-feature divisors: the standard deviation of each raw feature over the set.

    Cost gaps between members are then O(1) per unit weight whatever the raw
    scale of a feature. Features that do not vary across the set keep a unit divisor.
    """
    spreads = np.std(np.asarray(raw, dtype=float), axis=0)
    return {name: float(value) if value > NORMALIZER_FLOOR else 1.0 for name, value in zip(ALL_FEATURES, spreads)}


def sample_weight_vector(rng: np.random.Generator, d: int) -> np.ndarray:
    """
    Random nonnegative unit-norm weights.

    A direction uniform on the nonnegative unit sphere is rescaled per component by
    log-uniform magnitudes in [0.01, 100], so near-pure objectives appear often.
    """
    direction = normalize_weights(np.abs(rng.standard_normal(d)))
    low, high = SAMPLE_LOG_MAGNITUDE_RANGE
    scales = 10.0 ** rng.uniform(low, high, size=d)
    return normalize_weights(direction * scales)


def sample_trajectory_set(
    env: EnvironmentSpec,
    count: int,
    seed: int,
    features: Optional[FeatureConfig] = None,
    config: Optional[OptimizerConfig] = None
) -> TrajectorySet:
    """
    Optimize `count` trajectories for randomly sampled objectives.

    Each member draws from its own seed stream, so the set is deterministic for a
    fixed seed regardless of evaluation order. Normalizers missing from `features`
    are fitted as the per-feature standard deviations over the set.

    Args:
        env: Environment
        count: Number of trajectories (at least 1)
        seed: Generation seed
        features: Modeled features
        config: Optimizer settings

    Returns:
        TrajectorySet
    """
    if count < 1:
        raise ValueError(f'Trajectory set size must be at least 1, got {count}')
    features = features or FeatureConfig()
    config = config or OptimizerConfig()

    trajectories, thetas = [], []
    for index, member_seed in enumerate(derive_seeds(seed, count)):
        theta = sample_weight_vector(np.random.default_rng(member_seed), features.dimension)
        result = optimize_trajectory(theta, env, features, config)
        trajectories.append(result.trajectory)
        thetas.append(theta)
        if (index + 1) % 50 == 0:
            logger.info(f'Optimized {index + 1}/{count} trajectories')

    raw = np.array([raw_features(traj, env, ALL_FEATURES) for traj in trajectories])
    normalizers = {**fit_normalizers(raw), **features.normalizers}
    logger.info(f'Sampled {count} trajectories (seed={seed}), normalizers={normalizers}')

    return TrajectorySet(
        env=env,
        feature_config=features.with_normalizers(normalizers),
        trajectories=np.array(trajectories),
        raw_features=raw,
        seed=seed,
        thetas=np.array(thetas),
    )


def save_trajectory_set(trajectory_set: TrajectorySet, path: str, file_name: str = TRAJECTORY_SET_FILE_NAME):
    return save_json(trajectory_set.to_dict(), path, file_name)


def load_trajectory_set(file_path: str) -> TrajectorySet:
    return TrajectorySet.from_dict(load_json(file_path))


# =============================================================================
# MINIMAL-EFFORT CORRECTION
# =============================================================================

@dataclass
class CorrectionSolution:
    """Smallest push reproducing the target features, with the Laplace Hessian."""
    u_star: np.ndarray
    hessian: np.ndarray
    constraint_residual: float
    converged: bool
    kappa: float
    constrained_features: List[str] = field(default_factory=list)


def minimal_effort_correction(
    phi_d: Sequence[float],
    xi_r: np.ndarray,
    t: int,
    op: DeformationOperator,
    env: EnvironmentSpec,
    features: FeatureConfig,
    config: Optional[OptimizerConfig] = None,
    witness: Optional[Sequence[float]] = None,
    restrict_to: Optional[Sequence[str]] = None
) -> CorrectionSolution:
    """
    Solve min ‖u‖² subject to Φ(deform(ξ_R, u, t)) = Φ_D with a penalty method.

    κ grows geometrically through the configured schedule and every stage is
    solved by BFGS, warm-started from the previous stage and initially from u = 0.
    When a feasible `witness` is supplied (the observed push), the result never has a
    larger norm than it.

    Args:
        phi_d: Target smoothed features over `features` (compute_features(..., smooth=True))
        xi_r: Robot trajectory before the push
        t: Waypoint index of the push
        op: Deformation operator
        env: Environment
        features: Feature configuration the target is expressed in
        config: Optimizer settings
        witness: Known feasible push
        restrict_to: Constrain only these features

    Returns:
        CorrectionSolution; converged=False when the residual exceeds the tolerance at κ_max
    """
    config = config or OptimizerConfig()
    check_operator(op, env)
    xi_r = check_trajectory(xi_r, env)
    phi_d = np.asarray(phi_d, dtype=float).reshape(-1)
    if phi_d.shape[0] != features.dimension:
        raise ValueError(f'Target features have {phi_d.shape[0]} components, expected {features.dimension}')
    if not 0 <= t <= env.T:
        raise ValueError(f'Correction timestep {t} is outside [0, {env.T}]')

    names = list(restrict_to) if restrict_to is not None else list(features.features)
    constrained = features.with_features(names)
    target = phi_d[[features.index(name) for name in names]]
    basis = op.displacement_basis(t)

    def residual_and_jacobian(u: np.ndarray):
        traj = xi_r + (basis @ u).reshape(xi_r.shape)
        residual = compute_features(traj, env, constrained, smooth=True) - target
        gradients = feature_gradients(traj, env, constrained).reshape(len(names), -1)
        return residual, gradients @ basis

    def penalized(u: np.ndarray, kappa: float):
        residual, jacobian = residual_and_jacobian(u)
        value = float(u @ u + kappa * residual @ residual)
        return value, 2.0 * u + 2.0 * kappa * jacobian.T @ residual

    def solve_from(u0: np.ndarray):
        u = u0.copy()
        kappa = config.kappa_start
        for kappa in config.kappa_schedule():
            result = minimize(penalized, u, args=(kappa,), jac=True, method='BFGS',
                              options={'gtol': config.inner_gtol, 'maxiter': 200 * env.n})
            u = result.x
        return u, kappa, float(np.linalg.norm(residual_and_jacobian(u)[0]))

    u0 = np.zeros(env.n)
    residual0 = residual_and_jacobian(u0)[0]
    if np.linalg.norm(residual0) > 0 and np.linalg.norm(penalized(u0, config.kappa_start)[1]) == 0:
        # u = 0 is a stationary point of the penalty (e.g. a push on an optimal trajectory)
        seed_direction = np.ones(env.n) if witness is None or not np.any(witness) else np.asarray(witness, dtype=float)
        u0 = 1e-3 * seed_direction / np.linalg.norm(seed_direction)

    u_star, kappa, residual = solve_from(u0)

    if witness is not None:
        witness = np.asarray(witness, dtype=float).reshape(-1)
        if residual > config.constraint_tolerance or np.linalg.norm(u_star) > np.linalg.norm(witness):
            logger.debug('Penalty solve from zero did not beat the witness; re-solving from the witness')
            retry_u, retry_kappa, retry_residual = solve_from(witness)
            if retry_residual <= config.constraint_tolerance and np.linalg.norm(retry_u) <= np.linalg.norm(witness):
                u_star, kappa, residual = retry_u, retry_kappa, retry_residual
            else:
                u_star, residual = witness.copy(), float(np.linalg.norm(residual_and_jacobian(witness)[0]))

    hessian = _finite_difference_hessian(lambda u: penalized(u, kappa)[1], u_star, config)
    converged = residual <= config.constraint_tolerance
    if not converged:
        logger.warning(f'Minimal-effort correction left residual {residual:.3g} on {names} at t={t}')

    return CorrectionSolution(
        u_star=u_star,
        hessian=hessian,
        constraint_residual=residual,
        converged=converged,
        kappa=kappa,
        constrained_features=names,
    )


def _finite_difference_hessian(gradient, u: np.ndarray, config: OptimizerConfig) -> np.ndarray:
    """Central differences of the gradient, symmetrized, eigenvalues clamped from below."""
    k = len(u)
    h = config.hessian_step * (1.0 + np.linalg.norm(u))
    hessian = np.zeros((k, k))
    for i in range(k):
        offset = np.zeros(k)
        offset[i] = h
        hessian[:, i] = (gradient(u + offset) - gradient(u - offset)) / (2 * h)
    hessian = (hessian + hessian.T) / 2
    eigenvalues, eigenvectors = np.linalg.eigh(hessian)
    eigenvalues = np.maximum(eigenvalues, config.hessian_eigen_floor)
    return (eigenvectors * eigenvalues) @ eigenvectors.T
