"""Nodal quantities in the reduced coordinates ``c_1..c_{N-1}`` (``c_N = 1 - sum``)."""
from __future__ import annotations

import numpy as np

from .potential import PotentialSpec, grad_F, hessian_F, potential_fd, potential_fd_jacobian


def full_concentrations(values: np.ndarray) -> np.ndarray:
    """``(N-1, n)`` stored components to an ``(n, N)`` array."""
    return np.vstack([values, 1.0 - values.sum(axis=0)]).T


def reduce_vector(g: np.ndarray) -> np.ndarray:
    """``(n, N)`` derivative vector to ``(N-1, n)``: component ``a`` minus component ``N``."""
    return (g[:, :-1] - g[:, -1:]).T


def reduce_matrix(h: np.ndarray) -> np.ndarray:
    """Chain rule for an ``(n, N, N)`` Jacobian under ``c_N = 1 - sum``."""
    return h[:, :-1, :-1] - h[:, :-1, -1:] - h[:, -1:, :-1] + h[:, -1:, -1:]


def reduced_gradient(spec: PotentialSpec, values: np.ndarray) -> np.ndarray:
    return reduce_vector(grad_F(spec, full_concentrations(values)))


def reduced_hessian(spec: PotentialSpec, values: np.ndarray) -> np.ndarray:
    return reduce_matrix(hessian_F(spec, full_concentrations(values)))


def reduced_secant(spec: PotentialSpec, values: np.ndarray, values_star: np.ndarray) -> np.ndarray:
    return reduce_vector(potential_fd(spec, full_concentrations(values), full_concentrations(values_star)))


def reduced_secant_jacobian(spec: PotentialSpec, values: np.ndarray, values_star: np.ndarray) -> np.ndarray:
    return reduce_matrix(
        potential_fd_jacobian(spec, full_concentrations(values), full_concentrations(values_star))
    )


def kron_apply(coupling: np.ndarray, op, values: np.ndarray) -> np.ndarray:
    """``(coupling (x) op) @ values`` for component-major ``(P, n)`` data."""
    return coupling @ (op @ values.T).T
