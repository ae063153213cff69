"""Block-structured sparse systems, Krylov and direct solves, and Newton's method.

A :class:`BlockSystem` acts on ``P`` nodal fields stored component-major
(``x.reshape(P, n_nodes)``).  Its operator is a sum of Kronecker terms
``C (x) A`` with a small dense coupling ``C`` and a scalar sparse ``A``,
plus an optional per-node dense block.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SolverError(RuntimeError):
    """Iterative or direct solve failed; ``history`` holds residual norms."""

    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)


@dataclass(eq=False)
class BlockSystem:
    terms: list  # [(coupling (P, P), scalar sparse operator (n, n)), ...]
    rhs: np.ndarray
    nodal: np.ndarray | None = None  # (n, P, P) block added at every node
    symmetric: bool = True
    _matrix: sp.csc_matrix | None = field(default=None, init=False, repr=False)

    @property
    def n_fields(self) -> int:
        return self.terms[0][0].shape[0]

    @property
    def n_nodes(self) -> int:
        return self.terms[0][1].shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        size = self.n_fields * self.n_nodes
        return (size, size)

    def matvec(self, x):
        p, n = self.n_fields, self.n_nodes
        xs = np.reshape(x, (p, n))
        out = np.zeros((p, n))
        for coupling, op in self.terms:
            out += coupling @ (op @ xs.T).T
        if self.nodal is not None:
            out += np.einsum("jab,bj->aj", self.nodal, xs)
        return out.ravel()

    def to_sparse(self) -> sp.csc_matrix:
        if self._matrix is None:
            mat = sp.csr_matrix(self.shape)
            for coupling, op in self.terms:
                mat = mat + sp.kron(sp.csr_matrix(coupling), op, format="csr")
            if self.nodal is not None:
                p, n = self.n_fields, self.n_nodes
                a, b = np.meshgrid(np.arange(p), np.arange(p), indexing="ij")
                rows = (a[None] * n + np.arange(n)[:, None, None]).ravel()
                cols = (b[None] * n + np.arange(n)[:, None, None]).ravel()
                mat = mat + sp.csr_matrix((self.nodal.ravel(), (rows, cols)), shape=self.shape)
            self._matrix = mat.tocsc()
        return self._matrix

    def block_diagonal(self) -> np.ndarray:
        """Per-node ``(P, P)`` diagonal blocks, shape ``(n, P, P)``."""
        blocks = np.zeros((self.n_nodes, self.n_fields, self.n_fields))
        for coupling, op in self.terms:
            blocks += op.diagonal()[:, None, None] * coupling[None]
        if self.nodal is not None:
            blocks += self.nodal
        return blocks

    def residual(self, x) -> np.ndarray:
        return self.rhs - self.matvec(x)

    def with_rhs(self, rhs) -> "BlockSystem":
        out = BlockSystem(self.terms, np.asarray(rhs, dtype=float), self.nodal, self.symmetric)
        out._matrix = self._matrix
        return out


def _as_operator(system):
    if isinstance(system, BlockSystem):
        return system.matvec, system.rhs
    mat, rhs = system
    return (lambda x: mat @ x), np.asarray(rhs, dtype=float)


def block_jacobi(system: BlockSystem):
    """Preconditioner applying the inverse of each node's diagonal block."""
    inv = np.linalg.inv(system.block_diagonal())
    p, n = system.n_fields, system.n_nodes

    def apply(r):
        return np.einsum("jab,bj->aj", inv, np.reshape(r, (p, n))).ravel()

    return apply


@dataclass
class SolveInfo:
    iterations: int
    residual: float  # final relative residual ||b - Ax|| / ||b||
    history: list  # preconditioned residual norms, one per iteration


def solve_spd(system, tol: float = 1e-9, x0=None, max_iter: int | None = None, precondition=None):
    """Preconditioned conjugate residual method for SPD systems.

    ``system`` is a :class:`BlockSystem` (block-Jacobi preconditioned by
    default) or a ``(matrix, rhs)`` pair (Jacobi preconditioned).  Each
    iterate minimises the preconditioned residual norm over a growing Krylov
    space, so ``history`` is nonincreasing.  Iteration stops once the true
    relative residual is at most ``tol``.

    Returns ``(x, SolveInfo)``.
    """
    apply_a, b = _as_operator(system)
    if precondition is None:
        if isinstance(system, BlockSystem):
            precondition = block_jacobi(system)
        else:
            d = np.asarray(system[0].diagonal(), dtype=float)
            precondition = lambda r, d=d: r / d  # noqa: E731
    size = b.shape[0]
    if max_iter is None:
        max_iter = int(10 * math.sqrt(size)) + 1000
    b_norm = np.linalg.norm(b)
    x = np.zeros(size) if x0 is None else np.array(x0, dtype=float)
    if b_norm == 0.0:
        return np.zeros(size), SolveInfo(0, 0.0, [0.0])
    r = b - apply_a(x)
    z = precondition(r)
    az = apply_a(z)
    p, ap = z.copy(), az.copy()
    rz = z @ az
    history = [math.sqrt(max(r @ z, 0.0))]
    for it in range(max_iter + 1):
        rel = np.linalg.norm(r) / b_norm
        if rel <= tol:
            return x, SolveInfo(it, float(rel), history)
        if it == max_iter:
            break
        q = precondition(ap)
        denom = ap @ q
        if not denom > 0.0 or not rz > 0.0:
            raise SolverError("conjugate residual breakdown (system not SPD?)", history)
        alpha = rz / denom
        x += alpha * p
        r -= alpha * ap
        z -= alpha * q
        az = apply_a(z)
        rz_new = z @ az
        beta = rz_new / rz
        rz = rz_new
        p = z + beta * p
        ap = az + beta * ap
        history.append(math.sqrt(max(r @ z, 0.0)))
    raise SolverError(f"no convergence in {max_iter} iterations (relative residual {rel:.3e})", history)


class Factorization:
    """Sparse LU of a fixed matrix, reusable across right-hand sides."""

    def __init__(self, matrix):
        self.matrix = sp.csc_matrix(matrix)
        try:
            self._lu = spla.splu(self.matrix)
        except RuntimeError as exc:
            raise SolverError(f"singular system: {exc}") from exc

    def solve(self, rhs) -> np.ndarray:
        x = self._lu.solve(np.asarray(rhs, dtype=float))
        if not np.all(np.isfinite(x)):
            raise SolverError("direct solve produced non-finite values")
        return x


def _relative_residual(matrix, x, rhs) -> float:
    b_norm = np.linalg.norm(rhs)
    r = np.linalg.norm(rhs - matrix @ x)
    return float(r / b_norm) if b_norm else float(r)


def solve_direct(system, tol: float = 1e-9, factorization: Factorization | None = None):
    """Sparse LU solve; raises :class:`SolverError` if the residual exceeds ``tol``.

    Works for any nonsingular system; used for the indefinite and
    nonsymmetric systems.  Returns ``(x, SolveInfo)``.
    """
    if isinstance(system, BlockSystem):
        matrix, rhs = system.to_sparse(), system.rhs
    else:
        matrix, rhs = sp.csc_matrix(system[0]), np.asarray(system[1], dtype=float)
    if not np.any(rhs):
        return np.zeros(rhs.shape[0]), SolveInfo(0, 0.0, [0.0])
    fact = factorization or Factorization(matrix)
    x = fact.solve(rhs)
    rel = _relative_residual(matrix, x, rhs)
    if rel > tol:
        raise SolverError(f"direct solve residual {rel:.3e} above tolerance {tol:.1e}", [rel])
    return x, SolveInfo(1, rel, [rel])


def solve_saddle(system, tol: float = 1e-9, factorization: Factorization | None = None):
    """Symmetric indefinite systems, solved by sparse LU."""
    return solve_direct(system, tol, factorization)


def solve_gmres(
    system: BlockSystem, tol: float = 1e-9, x0=None, restart: int = 50, max_iter: int = 20, precondition=None
):
    """Preconditioned GMRES for nonsymmetric block systems (block Jacobi by default)."""
    b = system.rhs
    b_norm = np.linalg.norm(b)
    if b_norm == 0.0:
        return np.zeros_like(b), SolveInfo(0, 0.0, [0.0])
    op = spla.LinearOperator(system.shape, matvec=system.matvec)
    prec = spla.LinearOperator(system.shape, matvec=precondition or block_jacobi(system))
    history = []
    x, status = spla.gmres(
        op, b, x0=x0, rtol=tol, atol=0.0, restart=restart, maxiter=max_iter, M=prec,
        callback=history.append, callback_type="pr_norm",
    )
    rel = float(np.linalg.norm(b - system.matvec(x)) / b_norm)
    if status != 0 or rel > tol:
        raise SolverError(f"GMRES stopped at relative residual {rel:.3e}", history)
    return x, SolveInfo(len(history), rel, history)


def solve_linear(system: BlockSystem, tol: float = 1e-9):
    """Route by structure: conjugate residual for symmetric systems, GMRES otherwise.

    Either path falls back to sparse LU if the iteration fails (for example
    a symmetric system that is not positive definite).
    """
    try:
        if system.symmetric:
            return solve_spd(system, tol)
        return solve_gmres(system, tol)
    except SolverError:
        return solve_direct(system, tol)


@dataclass
class NewtonResult:
    x: np.ndarray
    iterations: int
    history: list  # residual norms, starting with the initial one
    linear_residual: float


class NewtonError(SolverError):
    pass


def newton_solve(
    residual_fn,
    jacobian_fn,
    x0,
    rel_tol: float = 1e-5,
    abs_tol: float = 1e-12,
    max_iter: int = 50,
    linear_solve=None,
    linear_tol: float = 1e-10,
):
    """Plain Newton iteration (no damping or line search).

    Stops when ``||r|| <= rel_tol * ||r0||`` or ``||r|| <= abs_tol``.
    ``jacobian_fn(x)`` may return a dense array, a sparse matrix or a
    :class:`BlockSystem` (its ``rhs`` is ignored).  ``linear_solve(J, r)``
    overrides the default dispatch and must return the Newton correction.
    """
    x = np.array(x0, dtype=float)
    r = np.atleast_1d(np.asarray(residual_fn(x), dtype=float))
    history = [float(np.linalg.norm(r))]
    lin_res = 0.0
    for it in range(max_iter + 1):
        norm = history[-1]
        if not np.isfinite(norm):
            raise NewtonError("Newton residual is not finite", history)
        if norm <= abs_tol or norm <= rel_tol * history[0]:
            return NewtonResult(x, it, history, lin_res)
        if it == max_iter:
            break
        jac = jacobian_fn(x)
        if linear_solve is not None:
            dx = linear_solve(jac, -r)
        elif isinstance(jac, BlockSystem):
            dx, info = solve_linear(jac.with_rhs(-r), linear_tol)
            lin_res = max(lin_res, info.residual)
        elif sp.issparse(jac):
            dx = spla.spsolve(sp.csc_matrix(jac), -r)
        else:
            dx = np.linalg.solve(np.atleast_2d(jac), -r)
        x = x + np.reshape(dx, x.shape)
        r = np.atleast_1d(np.asarray(residual_fn(x), dtype=float))
        history.append(float(np.linalg.norm(r)))
    raise NewtonError(f"Newton did not converge in {max_iter} iterations", history)
