"""Trajectory deformation from a single physical push, ξ_D = ξ_R + μA⁻¹ũ_H."""

from dataclasses import dataclass

import numpy as np

from .constants import *
from .environment import CorrectionEvent, EnvironmentSpec


@dataclass(frozen=True, eq=False)
class DeformationOperator:
    """
    Deformation magnitude μ and the acceleration norm matrix A.

    A acts on waypoints flattened row-major (waypoint index major, coordinate
    minor). Endpoint rows and columns are identity so deformations leave the
    start and goal in place.
    """
    mu: float
    A: np.ndarray
    A_inv: np.ndarray
    n: int
    T: int

    def block(self, t: int) -> slice:
        return slice(self.n * t, self.n * (t + 1))

    def is_pinned(self, t: int) -> bool:
        return t == 0 or t == self.T

    def displacement_basis(self, t: int) -> np.ndarray:
        """
        Linear map from a push at waypoint t to the flattened displacement.

        Returns:
            Array of shape (n(T+1), n); zero for pinned endpoints
        """
        if self.is_pinned(t):
            return np.zeros((self.A.shape[0], self.n))
        return self.mu * self.A_inv[:, self.block(t)]


def second_difference_matrix(T: int) -> np.ndarray:
    """(T−1) × (T+1) operator mapping waypoints to x^{i+1} − 2x^i + x^{i−1}."""
    K = np.zeros((T - 1, T + 1))
    for row in range(T - 1):
        K[row, row:row + 3] = [1.0, -2.0, 1.0]
    return K


def build_deformation(env: EnvironmentSpec, mu: float = DEFORMATION_MAGNITUDE) -> DeformationOperator:
    """
    Build the deformation operator for an environment.

    Args:
        env: Environment (horizon and state dimension)
        mu: Deformation magnitude μ > 0

    Returns:
        DeformationOperator with A = KᵀK on the interior and identity endpoint rows
    """
    if mu <= 0:
        raise ValueError(f'Deformation magnitude must be positive, got mu={mu}')

    K = np.kron(second_difference_matrix(env.T), np.eye(env.n))
    A = K.T @ K

    size = env.n * env.waypoint_count
    pinned = np.r_[np.arange(env.n), np.arange(size - env.n, size)]
    A[pinned, :] = 0.0
    A[:, pinned] = 0.0
    A[pinned, pinned] = 1.0

    A_inv = np.linalg.inv(A)
    A_inv = (A_inv + A_inv.T) / 2
    return DeformationOperator(mu=float(mu), A=A, A_inv=A_inv, n=env.n, T=env.T)


def deform(xi_r: np.ndarray, event: CorrectionEvent, op: DeformationOperator) -> np.ndarray:
    """Deformed trajectory ξ_R + μA⁻¹ũ_H for a push at `event.t`."""
    if event.t > op.T:
        raise ValueError(f'Correction timestep {event.t} is beyond horizon T={op.T}')
    xi_r = np.asarray(xi_r, dtype=float)
    if xi_r.shape != (op.T + 1, op.n):
        raise ValueError(f'Trajectory shape {xi_r.shape} does not match operator ({op.T + 1}, {op.n})')
    displacement = op.displacement_basis(event.t) @ event.u_h
    return xi_r + displacement.reshape(xi_r.shape)


def deform_with(xi_r: np.ndarray, t: int, u: np.ndarray, op: DeformationOperator) -> np.ndarray:
    return deform(xi_r, CorrectionEvent(t, u), op)


def check_operator(op: DeformationOperator, env: EnvironmentSpec) -> None:
    if op.n != env.n or op.T != env.T:
        raise ValueError(f'Deformation operator built for n={op.n}, T={op.T}; environment has n={env.n}, T={env.T}')
