"""Capillary coefficient matrix built from pairwise surface tensions.

Phase indices in this module are 0-based.  The "special" phase map is the
one whose phase variables are ``(c_1, ..., c_{N-1}, 1)``; every solver in
the package works in that coordinate system.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

#: relative pivot / eigenvalue threshold used for every SPD decision
SPD_TOL = 1e-12


class TensionError(ValueError):
    """Raised for malformed tension matrices or phase maps."""


@dataclass(frozen=True, eq=False)
class SurfaceTensionMatrix:
    """Symmetric matrix of pairwise surface tensions with zero diagonal."""

    sigma: np.ndarray

    def __post_init__(self):
        sigma = np.array(self.sigma, dtype=float)
        if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
            raise TensionError(f"sigma must be square, got shape {sigma.shape}")
        sigma.setflags(write=False)
        object.__setattr__(self, "sigma", sigma)

    @property
    def n_phases(self) -> int:
        return self.sigma.shape[0]

    @classmethod
    def uniform(cls, n_phases: int, value: float = 1.0) -> "SurfaceTensionMatrix":
        sigma = np.full((n_phases, n_phases), float(value))
        np.fill_diagonal(sigma, 0.0)
        return cls(sigma)

    @classmethod
    def from_pairs(cls, n_phases: int, pairs: dict, default: float = 1.0) -> "SurfaceTensionMatrix":
        """Build from ``{(i, j): value}`` (0-based); unspecified pairs get ``default``."""
        sigma = cls.uniform(n_phases, default).sigma.copy()
        for (i, j), value in pairs.items():
            sigma[i, j] = sigma[j, i] = value
        return cls(sigma)

    def is_homogeneous(self) -> bool:
        off = self.sigma[~np.eye(self.n_phases, dtype=bool)]
        return bool(np.all(off == off[0]))


def validate_sigma(tensions: SurfaceTensionMatrix) -> list[str]:
    """Return a list of human-readable violations (empty when valid).

    Entries are reported with 1-based phase labels, once per unordered pair.
    """
    sigma = tensions.sigma
    n = tensions.n_phases
    problems = []
    if n < 2:
        problems.append(f"need at least 2 phases, got {n}")
    for i in range(n):
        if not np.isfinite(sigma[i, i]) or sigma[i, i] != 0.0:
            problems.append(f"nonzero diagonal ({i + 1},{i + 1})")
    for i, j in itertools.combinations(range(n), 2):
        a, b = sigma[i, j], sigma[j, i]
        if not (np.isfinite(a) and np.isfinite(b)):
            problems.append(f"non-finite entry ({i + 1},{j + 1})")
            continue
        if a != b:
            problems.append(f"asymmetric ({i + 1},{j + 1})")
        if min(a, b) < 0:
            problems.append(f"negative off-diagonal ({i + 1},{j + 1})")
        elif min(a, b) == 0:
            problems.append(f"zero off-diagonal ({i + 1},{j + 1})")
    return problems


def _require_valid(tensions: SurfaceTensionMatrix) -> None:
    problems = validate_sigma(tensions)
    if problems:
        raise TensionError("invalid surface tensions: " + "; ".join(problems))


def reduced_sigma(tensions: SurfaceTensionMatrix, m: int = -1) -> np.ndarray:
    """(N-1)x(N-1) matrix ``(s_im + s_jm - s_ij) / 2`` over the phases ``!= m``.

    ``m`` is a 0-based phase index; negative values count from the end, so
    the default drops the last phase.
    """
    sigma = tensions.sigma
    n = tensions.n_phases
    if not -n <= m < n:
        raise IndexError(f"phase index {m} out of range for {n} phases")
    m %= n
    keep = [i for i in range(n) if i != m]
    col = sigma[keep, m]
    return 0.5 * (col[:, None] + col[None, :] - sigma[np.ix_(keep, keep)])


def _pivoted_cholesky(a: np.ndarray, tol: float = SPD_TOL):
    """Return ``T`` with ``a = T.T @ T`` or ``None`` if a pivot is not positive.

    Diagonal pivoting; a pivot is accepted only if it exceeds ``tol`` times
    the largest diagonal entry of ``a``.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    scale = max(np.max(np.abs(np.diag(a))), np.finfo(float).tiny)
    perm = np.arange(n)
    r = np.zeros((n, n))
    work = a.copy()
    for j in range(n):
        p = j + int(np.argmax(np.diag(work)[j:]))
        if work[p, p] <= tol * scale:
            return None
        if p != j:
            work[[j, p]] = work[[p, j]]
            work[:, [j, p]] = work[:, [p, j]]
            r[:, [j, p]] = r[:, [p, j]]
            perm[[j, p]] = perm[[p, j]]
        r[j, j] = np.sqrt(work[j, j])
        r[j, j + 1:] = work[j, j + 1:] / r[j, j]
        work[j + 1:, j + 1:] -= np.outer(r[j, j + 1:], r[j, j + 1:])
    # a[perm][:, perm] = r.T r  ->  a = (r P^T)^T (r P^T)
    t = np.empty_like(r)
    t[:, perm] = r
    return t


def reduced_is_spd(tensions: SurfaceTensionMatrix, m: int = -1) -> bool:
    return _pivoted_cholesky(reduced_sigma(tensions, m)) is not None


def simplex_embedding(tensions: SurfaceTensionMatrix, m: int = -1):
    """Points ``p_i`` in R^(N-1) with ``|p_i - p_j|^2 = sigma_ij``, or ``None``.

    Phase ``m`` sits at the origin and the remaining points are the columns
    of a factor ``T`` of ``reduced_sigma(tensions, m) = T^T T``.
    """
    n = tensions.n_phases
    m %= n
    t = _pivoted_cholesky(reduced_sigma(tensions, m))
    if t is None:
        return None
    keep = [i for i in range(n) if i != m]
    points = np.zeros((n, n - 1))
    points[keep] = t.T
    return points


@dataclass(frozen=True, eq=False)
class SpdReport:
    is_spd: bool
    witness: np.ndarray | None
    eigenvalues: np.ndarray


def spd_check(tensions: SurfaceTensionMatrix) -> SpdReport:
    """Decide whether the tensions make the capillary matrix SPD on the tangent space.

    The decision is the success of the pivoted factorization of the reduced
    matrix; on success the factor doubles as the simplex witness, which is
    verified against the tensions before being returned.
    """
    _require_valid(tensions)
    eigenvalues = np.linalg.eigvalsh(reduced_sigma(tensions))
    points = simplex_embedding(tensions)
    if points is None:
        return SpdReport(False, None, eigenvalues)
    d2 = np.sum((points[:, None, :] - points[None, :, :]) ** 2, axis=-1)
    sigma = tensions.sigma
    if np.max(np.abs(d2 - sigma)) > 1e-9 * np.max(sigma):
        return SpdReport(False, None, eigenvalues)
    return SpdReport(True, points, eigenvalues)


@dataclass(frozen=True, eq=False)
class PhaseMap:
    """Affine map ``phi = A c + b`` from concentrations to phase variables."""

    a_matrix: np.ndarray
    b_vector: np.ndarray
    d_vector: np.ndarray = field(init=False)
    projector: np.ndarray = field(init=False)

    def __post_init__(self):
        a = np.array(self.a_matrix, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise TensionError("A must be square")
        n = a.shape[0]
        b = np.zeros(n) if self.b_vector is None else np.array(self.b_vector, dtype=float)
        scale = np.prod(np.linalg.norm(a, axis=0))
        if scale == 0 or abs(np.linalg.det(a)) <= 1e-12 * scale:
            raise TensionError("A is singular")
        d = np.linalg.solve(a.T, np.ones(n))
        proj = np.eye(n) - np.outer(d, d) / (d @ d)
        for name, value in (("a_matrix", a), ("b_vector", b), ("d_vector", d), ("projector", proj)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def n_phases(self) -> int:
        return self.a_matrix.shape[0]

    @classmethod
    def special(cls, n_phases: int) -> "PhaseMap":
        """Identity on the first N-1 concentrations, last row all ones."""
        a = np.eye(n_phases)
        a[-1, :] = 1.0
        return cls(a, np.zeros(n_phases))

    def edge(self, k: int, l: int) -> np.ndarray:
        return self.a_matrix[:, k] - self.a_matrix[:, l]


@dataclass(frozen=True, eq=False)
class CoefficientMatrix:
    lambda_tilde: np.ndarray
    sigma_reduced: np.ndarray
    lambda_tilde_c: np.ndarray
    lambda_c_min: float
    lambda_c_dagger: np.ndarray
    is_spd: bool
    phase_map: PhaseMap

    @property
    def n_phases(self) -> int:
        return self.lambda_tilde.shape[0]


def _concentration_projector(n: int) -> np.ndarray:
    return np.eye(n) - np.full((n, n), 1.0 / n)


def _tangent_spectrum(lambda_c: np.ndarray):
    """Eigen-data of ``lambda_c`` on the sum-zero hyperplane.

    The all-ones direction is shifted out of the way by adding
    ``trace * 11^T / N`` before a symmetric eigensolve; the eigenvector most
    aligned with the ones vector is then discarded.
    """
    n = lambda_c.shape[0]
    ones = np.full(n, 1.0 / np.sqrt(n))
    theta = max(np.trace(lambda_c), 1.0)
    w, v = np.linalg.eigh(lambda_c + theta * np.outer(ones, ones))
    drop = int(np.argmax(np.abs(ones @ v)))
    keep = [i for i in range(n) if i != drop]
    return w[keep], v[:, keep]


def _finish(lambda_tilde, tensions, phase_map) -> CoefficientMatrix:
    n = tensions.n_phases
    ap = phase_map.a_matrix @ _concentration_projector(n)
    lambda_c = ap.T @ lambda_tilde @ ap
    lambda_c = 0.5 * (lambda_c + lambda_c.T)
    w, v = _tangent_spectrum(lambda_c)
    w_max = np.max(np.abs(w))
    inv = np.where(np.abs(w) > SPD_TOL * w_max, 1.0 / np.where(w == 0, 1.0, w), 0.0)
    dagger = (v * inv) @ v.T
    is_spd = spd_check(tensions).is_spd
    arrays = [lambda_tilde, reduced_sigma(tensions), lambda_c, dagger]
    for a in arrays:
        a.setflags(write=False)
    return CoefficientMatrix(
        lambda_tilde=arrays[0],
        sigma_reduced=arrays[1],
        lambda_tilde_c=arrays[2],
        lambda_c_min=float(np.min(w)),
        lambda_c_dagger=arrays[3],
        is_spd=is_spd,
        phase_map=phase_map,
    )


def coefficient_gram(phase_map: PhaseMap, pairs=None) -> np.ndarray:
    """Frobenius Gram matrix of the rank-one matrices ``L_kl L_kl^T``."""
    n = phase_map.n_phases
    pairs = list(itertools.combinations(range(n), 2)) if pairs is None else list(pairs)
    edges = np.array([phase_map.edge(k, l) for k, l in pairs])
    return (edges @ edges.T) ** 2


def assemble_lambda(tensions: SurfaceTensionMatrix, phase_map: PhaseMap) -> CoefficientMatrix:
    """The matrix in the span of ``{L_kl L_kl^T}`` with ``L_kl^T Lambda L_kl = 9/2 sigma_kl``.

    That span is ``A^{-T} {Y : Y = Y^T, Y v = 0} A^{-1}`` with
    ``v = A^{-1} A^{-T} 1``, and the constraints only see ``Y`` through
    ``e_kl^T Y e_kl``.  Double centring along ``v``,
    ``Y = -9/4 Q^T sigma Q`` with ``Q = I - v 1^T / (1^T v)``, meets both, so

        Lambda = -9/4 A^{-T} Q^T sigma Q A^{-1}.

    This is the solution of the Gram system of the rank-one basis
    (:func:`coefficient_gram`) without forming it: the Gram matrix has
    condition number of order ``cond(A)^4`` and loses most digits for
    ordinary random maps, the closed form only ``cond(A)^2``.
    """
    _require_valid(tensions)
    n = tensions.n_phases
    if phase_map.n_phases != n:
        raise TensionError("phase map and tensions disagree on N")
    a = phase_map.a_matrix
    v = np.linalg.solve(a, phase_map.d_vector)
    q = np.eye(n) - np.outer(v, np.ones(n)) / v.sum()
    y = -2.25 * q.T @ tensions.sigma @ q
    left = np.linalg.solve(a.T, y)  # A^{-T} Y
    lambda_tilde = np.linalg.solve(a.T, left.T).T  # (A^{-T} Y) A^{-1}
    lambda_tilde = 0.5 * (lambda_tilde + lambda_tilde.T)
    return _finish(lambda_tilde, tensions, phase_map)


def assemble_lambda_special(tensions: SurfaceTensionMatrix) -> CoefficientMatrix:
    """Closed form for the special map: ``blockdiag(9/2 * reduced_sigma, 0)``."""
    _require_valid(tensions)
    n = tensions.n_phases
    lambda_tilde = np.zeros((n, n))
    lambda_tilde[:-1, :-1] = 4.5 * reduced_sigma(tensions)
    return _finish(lambda_tilde, tensions, PhaseMap.special(n))


def triangle_condition(tensions: SurfaceTensionMatrix) -> bool:
    """Strict triangle inequality on ``sqrt(sigma)`` for every triple of phases."""
    r = np.sqrt(tensions.sigma)
    for i, j, k in itertools.permutations(range(tensions.n_phases), 3):
        if not r[i, k] < r[i, j] + r[j, k]:
            return False
    return True
