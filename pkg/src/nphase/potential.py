"""Bulk multiphase potentials, their derivatives and secant forms.

All evaluators broadcast over leading axes: ``c`` has shape ``(..., N)``.
Off-simplex arguments are accepted everywhere.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .tension import SurfaceTensionMatrix, TensionError, validate_sigma


def f_scalar(c):
    """Double well ``c^2 (1 - c)^2``."""
    return c * c * (1.0 - c) ** 2


def f_prime(c):
    return 2.0 * c * (1.0 - c) * (1.0 - 2.0 * c)


def f_second(c):
    return 2.0 * (6.0 * c * c - 6.0 * c + 1.0)


def fd_scalar(c, c_star):
    """Secant slope of the double well, ``(f(c) - f(c*)) / (c - c*)``.

    Evaluated through the exact polynomial quotient, so there is no
    cancellation as ``c -> c*``; equal arguments return ``f'(c)``.
    """
    c = np.asarray(c, dtype=float)
    c_star = np.asarray(c_star, dtype=float)
    s1 = c + c_star
    s2 = c * c + c * c_star + c_star * c_star
    s3 = (c + c_star) * (c * c + c_star * c_star)
    out = s1 - 2.0 * s2 + s3
    return np.where(c == c_star, f_prime(c), out)


def fd_scalar_dc(c, c_star):
    """Derivative of :func:`fd_scalar` in its first argument."""
    return 1.0 - 2.0 * (2.0 * c + c_star) + (3.0 * c * c + 2.0 * c * c_star + c_star * c_star)


def _prod(c, idx):
    out = np.ones(c.shape[:-1])
    for i in idx:
        out = out * c[..., i]
    return out


def monomial(index_set, c):
    return _prod(np.asarray(c, dtype=float), tuple(index_set))


@dataclass(frozen=True, eq=False)
class _SecantTerms:
    """Precomputed subset expansion of the secant vector of one monomial."""

    index_set: tuple
    # per component: list of (weight, subset evaluated at c, rest evaluated at c*)
    terms: tuple

    @classmethod
    def build(cls, index_set):
        idx = tuple(index_set)
        if len(set(idx)) != len(idx):
            raise ValueError(f"duplicate indices in {idx}")
        k = len(idx)
        per_comp = []
        for l, il in enumerate(idx):
            others = idx[:l] + idx[l + 1:]
            terms = []
            for size in range(k):
                w = math.factorial(size) * math.factorial(k - size - 1) / math.factorial(k)
                for sub in itertools.combinations(others, size):
                    rest = tuple(i for i in others if i not in sub)
                    terms.append((w, sub, rest))
            per_comp.append((il, tuple(terms)))
        return cls(idx, tuple(per_comp))


_SECANT_CACHE: dict = {}


def _secant_terms(index_set) -> _SecantTerms:
    key = tuple(index_set)
    if key not in _SECANT_CACHE:
        _SECANT_CACHE[key] = _SecantTerms.build(key)
    return _SECANT_CACHE[key]


def monomial_fd(index_set, c, c_star):
    """Secant vector ``q[c, c*]`` of the monomial ``prod_{i in index_set} c_i``.

    Satisfies ``q(c) - q(c*) = q[c, c*] . (c - c*)`` identically.
    """
    c = np.asarray(c, dtype=float)
    c_star = np.asarray(c_star, dtype=float)
    st = _secant_terms(index_set)
    out = np.zeros(np.broadcast_shapes(c.shape, c_star.shape))
    for il, terms in st.terms:
        acc = 0.0
        for w, sub, rest in terms:
            acc = acc + w * _prod(c, sub) * _prod(c_star, rest)
        out[..., il] = acc
    return out


def monomial_fd_jacobian(index_set, c, c_star):
    """``d q[c, c*] / dc`` with shape ``(..., N, N)`` (row = component)."""
    c = np.asarray(c, dtype=float)
    c_star = np.asarray(c_star, dtype=float)
    n = c.shape[-1]
    st = _secant_terms(index_set)
    out = np.zeros(c.shape[:-1] + (n, n))
    for il, terms in st.terms:
        for w, sub, rest in terms:
            if not sub:
                continue
            r = _prod(c_star, rest)
            for m in sub:
                others = tuple(i for i in sub if i != m)
                out[..., il, m] += w * _prod(c, others) * r
    return out


def _monomial_grad(idx, c):
    g = np.zeros(c.shape)
    for m in idx:
        g[..., m] = _prod(c, tuple(i for i in idx if i != m))
    return g


def _monomial_hess(idx, c):
    n = c.shape[-1]
    h = np.zeros(c.shape[:-1] + (n, n))
    for a, b in itertools.permutations(idx, 2):
        h[..., a, b] = _prod(c, tuple(i for i in idx if i not in (a, b)))
    return h


HOMOGENEOUS = "homogeneous"
INHOMOGENEOUS = "inhomogeneous"


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    """Which bulk potential to use.

    ``homogeneous``: ``2 sigma sum f(c_i)`` plus, for four or more phases,
    ``8 sigma`` times the sum of all products of four distinct concentrations.

    ``inhomogeneous``: pairwise double wells weighted by the tensions plus
    ``s`` times the triple-product stabilization.  Sums over ordered pairs
    are evaluated as twice the sum over ``i < j``.
    """

    kind: str
    n_phases: int
    sigma: float = 1.0
    tensions: SurfaceTensionMatrix | None = None
    s: float = 0.0
    _pairs: tuple = field(init=False, repr=False, compare=False)
    _quads: tuple = field(init=False, repr=False, compare=False)
    _triples: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = self.n_phases
        if self.kind == HOMOGENEOUS:
            if not (np.isfinite(self.sigma) and self.sigma > 0):
                raise ValueError("homogeneous sigma must be positive")
            quads = tuple(itertools.combinations(range(n), 4))
            object.__setattr__(self, "_quads", quads)
            object.__setattr__(self, "_pairs", ())
            object.__setattr__(self, "_triples", ())
        elif self.kind == INHOMOGENEOUS:
            if self.tensions is None or self.tensions.n_phases != n:
                raise ValueError("inhomogeneous potential needs an N x N tension matrix")
            problems = validate_sigma(self.tensions)
            if problems:
                raise TensionError("; ".join(problems))
            if not (np.isfinite(self.s) and self.s >= 0):
                raise ValueError("stabilization s must be finite and >= 0")
            sig = self.tensions.sigma
            pairs = tuple((i, j, 2.0 * sig[i, j]) for i, j in itertools.combinations(range(n), 2))
            triples = tuple(
                ((a, b, c), 2.0 * (sig[a, b] + sig[a, c] + sig[b, c]))
                for a, b, c in itertools.combinations(range(n), 3)
            )
            object.__setattr__(self, "_pairs", pairs)
            object.__setattr__(self, "_triples", triples)
            object.__setattr__(self, "_quads", ())
        else:
            raise ValueError(f"unknown potential kind {self.kind!r}")

    @classmethod
    def homogeneous(cls, sigma: float, n_phases: int) -> "PotentialSpec":
        return cls(HOMOGENEOUS, n_phases, sigma=float(sigma))

    @classmethod
    def inhomogeneous(cls, tensions: SurfaceTensionMatrix, s: float = 0.0) -> "PotentialSpec":
        return cls(INHOMOGENEOUS, tensions.n_phases, tensions=tensions, s=float(s))

    @cached_property
    def scale(self) -> float:
        """Largest tension, used to normalise tolerances."""
        if self.kind == HOMOGENEOUS:
            return self.sigma
        return float(np.max(self.tensions.sigma))


def _check(spec, c):
    c = np.asarray(c, dtype=float)
    if c.shape[-1] != spec.n_phases:
        raise ValueError(f"expected {spec.n_phases} components, got {c.shape[-1]}")
    return c


def eval_F(spec: PotentialSpec, c):
    c = _check(spec, c)
    if spec.kind == HOMOGENEOUS:
        out = 2.0 * spec.sigma * np.sum(f_scalar(c), axis=-1)
        for q in spec._quads:
            out = out + 8.0 * spec.sigma * _prod(c, q)
        return out
    out = np.zeros(c.shape[:-1])
    for i, j, w in spec._pairs:
        ci, cj = c[..., i], c[..., j]
        out = out + w * (f_scalar(ci) + f_scalar(cj) - f_scalar(ci + cj))
    if spec.s:
        for t, w in spec._triples:
            out = out + spec.s * w * _prod(c, t) ** 2
    return out


def grad_F(spec: PotentialSpec, c):
    c = _check(spec, c)
    if spec.kind == HOMOGENEOUS:
        g = 2.0 * spec.sigma * f_prime(c)
        for q in spec._quads:
            g = g + 8.0 * spec.sigma * _monomial_grad(q, c)
        return g
    g = np.zeros(c.shape)
    for i, j, w in spec._pairs:
        ci, cj = c[..., i], c[..., j]
        fp = f_prime(ci + cj)
        g[..., i] += w * (f_prime(ci) - fp)
        g[..., j] += w * (f_prime(cj) - fp)
    if spec.s:
        for t, w in spec._triples:
            g = g + (2.0 * spec.s * w * _prod(c, t))[..., None] * _monomial_grad(t, c)
    return g


def hessian_F(spec: PotentialSpec, c):
    c = _check(spec, c)
    n = spec.n_phases
    diag = np.arange(n)
    if spec.kind == HOMOGENEOUS:
        h = np.zeros(c.shape + (n,))
        h[..., diag, diag] = 2.0 * spec.sigma * f_second(c)
        for q in spec._quads:
            h = h + 8.0 * spec.sigma * _monomial_hess(q, c)
        return h
    h = np.zeros(c.shape + (n,))
    for i, j, w in spec._pairs:
        ci, cj = c[..., i], c[..., j]
        fs = f_second(ci + cj)
        h[..., i, i] += w * (f_second(ci) - fs)
        h[..., j, j] += w * (f_second(cj) - fs)
        h[..., i, j] -= w * fs
        h[..., j, i] -= w * fs
    if spec.s:
        for t, w in spec._triples:
            q = _prod(c, t)
            dq = _monomial_grad(t, c)
            h = h + 2.0 * spec.s * w * (
                dq[..., :, None] * dq[..., None, :] + q[..., None, None] * _monomial_hess(t, c)
            )
    return h


def potential_fd(spec: PotentialSpec, c, c_star):
    """Secant vector ``F[c, c*]`` with ``F(c) - F(c*) = F[c, c*] . (c - c*)``."""
    c = _check(spec, c)
    c_star = _check(spec, c_star)
    if spec.kind == HOMOGENEOUS:
        out = 2.0 * spec.sigma * fd_scalar(c, c_star)
        for q in spec._quads:
            out = out + 8.0 * spec.sigma * monomial_fd(q, c, c_star)
        return out
    out = np.zeros(np.broadcast_shapes(c.shape, c_star.shape))
    for i, j, w in spec._pairs:
        ci, cj, si, sj = c[..., i], c[..., j], c_star[..., i], c_star[..., j]
        fs = fd_scalar(ci + cj, si + sj)
        out[..., i] += w * (fd_scalar(ci, si) - fs)
        out[..., j] += w * (fd_scalar(cj, sj) - fs)
    if spec.s:
        for t, w in spec._triples:
            weight = spec.s * w * (_prod(c, t) + _prod(c_star, t))
            out = out + weight[..., None] * monomial_fd(t, c, c_star)
    return out


def potential_fd_jacobian(spec: PotentialSpec, c, c_star):
    """``d F[c, c*] / dc`` (the derivative in the first argument), shape ``(..., N, N)``."""
    c = _check(spec, c)
    c_star = _check(spec, c_star)
    n = spec.n_phases
    diag = np.arange(n)
    jac = np.zeros(c.shape + (n,))
    if spec.kind == HOMOGENEOUS:
        jac[..., diag, diag] = 2.0 * spec.sigma * fd_scalar_dc(c, c_star)
        for q in spec._quads:
            jac = jac + 8.0 * spec.sigma * monomial_fd_jacobian(q, c, c_star)
        return jac
    for i, j, w in spec._pairs:
        ci, cj, si, sj = c[..., i], c[..., j], c_star[..., i], c_star[..., j]
        ds = fd_scalar_dc(ci + cj, si + sj)
        jac[..., i, i] += w * (fd_scalar_dc(ci, si) - ds)
        jac[..., j, j] += w * (fd_scalar_dc(cj, sj) - ds)
        jac[..., i, j] -= w * ds
        jac[..., j, i] -= w * ds
    if spec.s:
        for t, w in spec._triples:
            qsum = _prod(c, t) + _prod(c_star, t)
            qfd = monomial_fd(t, c, c_star)
            dq = _monomial_grad(t, c)
            jac = jac + spec.s * w * (
                qfd[..., :, None] * dq[..., None, :]
                + qsum[..., None, None] * monomial_fd_jacobian(t, c, c_star)
            )
    return jac


def simplex_grid(n_phases: int, spacing: float = 0.05, margin: float = 0.0) -> np.ndarray:
    """Barycentric lattice on ``{sum c = 1, -margin <= c_i <= 1 + margin}``."""
    total_f = (1.0 + n_phases * margin) / spacing
    upper_f = (1.0 + 2.0 * margin) / spacing
    total, upper = round(total_f), round(upper_f)
    if abs(total - total_f) > 1e-9 or abs(upper - upper_f) > 1e-9:
        raise ValueError("spacing must divide the dilated simplex evenly")

    def compositions(parts, remaining):
        if parts == 1:
            return np.array([[remaining]]) if remaining <= upper else np.zeros((0, 1), dtype=int)
        blocks = []
        for first in range(min(upper, remaining) + 1):
            rest = compositions(parts - 1, remaining - first)
            if len(rest):
                blocks.append(np.column_stack([np.full(len(rest), first), rest]))
        return np.vstack(blocks) if blocks else np.zeros((0, parts), dtype=int)

    return -margin + spacing * compositions(n_phases, total)


def hessian_bounds(spec: PotentialSpec, margin: float = 0.1, spacing: float = 0.05, chunk: int = 20000):
    """``(L1, L2)``: bounds on the upward and downward curvature of ``F``.

    ``L1`` is the largest positive eigenvalue of the Hessian and ``L2`` the
    magnitude of the most negative one (zero when there is none), maximised
    over a barycentric lattice of the simplex dilated by ``margin`` in every
    coordinate; ``margin=0`` samples the exact simplex.
    """
    pts = simplex_grid(spec.n_phases, spacing, margin)
    l1 = l2 = 0.0
    for start in range(0, len(pts), chunk):
        w = np.linalg.eigvalsh(hessian_F(spec, pts[start:start + chunk]))
        l1 = max(l1, float(np.max(w[:, -1])))
        l2 = max(l2, float(-np.min(w[:, 0])))
    return l1, l2
