"""Time steppers for the N-phase Cahn-Hilliard system in mixed form.

Unknowns are the reduced concentrations ``c`` and chemical potentials ``w``
(both ``(N-1, n_nodes)``).  With ``A = I + 11^T``, ``S = 9/2 * sigma_r`` and
``B = (2 M0 / 9) A sigma_r^{-1} A`` the schemes read

    (A x M_L)(c' - c) + k (B x K) w' = 0
    -(A x M_L) w' + eta (S x K) c~ + (1/eta) (I x M_L) g~ = 0

with ``c~`` and ``g~`` chosen per scheme as in :mod:`nphase.allen_cahn`
and ``M_L`` the lumped mass.
Multiplying the first row by ``-A^{-1}`` and writing ``v = A w`` turns the
pair into a symmetric saddle-point system in ``(c', v)``, which is what is
assembled and solved here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .allen_cahn import CRANK_NICOLSON, FULLY_IMPLICIT, SCHEMES, SEMI_IMPLICIT, StepInfo, _positive, _require_spd
from .fem import Mesh, PhaseField, ScalarOperators, capillary_matrix
from .potential import PotentialSpec, hessian_bounds
from .reduced import (
    kron_apply,
    reduced_gradient,
    reduced_hessian,
    reduced_secant,
    reduced_secant_jacobian,
)
from .sparsesolve import BlockSystem, Factorization, SolverError, newton_solve, solve_gmres, solve_saddle

DEFAULT_M0 = 3.0 / (2.0 * math.sqrt(2.0))


@dataclass(frozen=True)
class ChConfig:
    eta: float
    k: float
    m0: float = DEFAULT_M0
    scheme: str = SEMI_IMPLICIT
    newton_rtol: float = 1e-5
    newton_atol: float = 1e-12
    newton_max_iter: int = 50
    linear_tol: float = 1e-9

    def __post_init__(self):
        for name in ("eta", "k", "m0"):
            _positive(name, getattr(self, name))
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")


@dataclass(frozen=True, eq=False)
class ChemicalPotentialField:
    mesh: Mesh
    values: np.ndarray  # (N-1, n_nodes)

    def __post_init__(self):
        if self.values.shape[-1] != self.mesh.n_nodes:
            raise ValueError("chemical potential does not match the mesh")


def ones_plus_identity(p: int) -> np.ndarray:
    return np.eye(p) + np.ones((p, p))


def mobility_factor(coeff, m0: float) -> np.ndarray:
    """``B = (2 M0 / 9) A sigma_r^{-1} A`` with ``A = I + 11^T``."""
    a = ones_plus_identity(coeff.sigma_reduced.shape[0])
    return 2.0 * m0 / 9.0 * a @ np.linalg.solve(coeff.sigma_reduced, a)


class CahnHilliardSolver:
    """Advances ``(c, w)`` by one step for a fixed configuration."""

    def __init__(self, cfg: ChConfig, coeff, spec: PotentialSpec, ops: ScalarOperators):
        _require_spd(coeff)
        if spec.n_phases != coeff.n_phases:
            raise ValueError("potential and coefficient matrix disagree on N")
        self.cfg, self.coeff, self.spec, self.ops = cfg, coeff, spec, ops
        p = coeff.n_phases - 1
        self.p = p
        self.s_matrix = capillary_matrix(coeff)
        self.a_matrix = ones_plus_identity(p)
        # v-row coupling: (2 M0 / 9) sigma_r^{-1}, i.e. A^{-1} B A^{-1}
        self.q_matrix = 2.0 * cfg.m0 / 9.0 * np.linalg.inv(coeff.sigma_reduced)
        self.mass = ops.lumped_mass
        self._factor = {}
        self._krylov_ok = True

    def _terms(self, k, theta):
        p = self.p
        eye, zero = np.eye(p), np.zeros((p, p))
        mass = np.block([[zero, -eye], [-eye, zero]])
        stiff = np.block([[theta * self.cfg.eta * self.s_matrix, zero], [zero, -k * self.q_matrix]])
        return [(mass, self.mass), (stiff, self.ops.stiffness)]

    def _nodal(self, blocks):
        p, n = self.p, self.ops.lumped.shape[0]
        out = np.zeros((n, 2 * p, 2 * p))
        out[:, :p, :p] = (self.ops.lumped / self.cfg.eta)[:, None, None] * blocks
        return out

    def _factor_for(self, k, theta):
        """LU of the linear part of the step operator, cached for the last ``k``."""
        key = (k, theta)
        if key not in self._factor:
            system = BlockSystem(self._terms(k, theta), np.zeros(2 * self.p * self.ops.lumped.shape[0]))
            self._factor = {key: Factorization(system.to_sparse())}
        return self._factor[key]

    def chemical_potential(self, v: np.ndarray) -> np.ndarray:
        return np.linalg.solve(self.a_matrix, v)

    def dissipation(self, w: np.ndarray, k: float | None = None) -> float:
        """``k w^T (B x K) w``, the energy the step must dissipate."""
        k = self.cfg.k if k is None else k
        b = mobility_factor(self.coeff, self.cfg.m0)
        return k * float(np.sum(w * kron_apply(b, self.ops.stiffness, w)))

    def step(self, field: PhaseField, k: float | None = None):
        """Advance one step; returns ``(new_field, ChemicalPotentialField, StepInfo)``."""
        k = self.cfg.k if k is None else k
        if self.cfg.scheme == SEMI_IMPLICIT:
            c, v, info = self._semi(field.values, k)
        else:
            c, v, info = self._newton(field.values, k, self.cfg.scheme == CRANK_NICOLSON)
        w = ChemicalPotentialField(field.mesh, self.chemical_potential(v))
        return field.with_values(c), w, info

    def _split(self, x):
        x = x.reshape(2 * self.p, -1)
        return x[: self.p], x[self.p:]

    def _semi(self, c, k):
        cfg, ops = self.cfg, self.ops
        rhs = np.vstack([-ops.lumped / cfg.eta * reduced_gradient(self.spec, c), -(self.mass @ c.T).T])
        system = BlockSystem(self._terms(k, 1.0), rhs.ravel())
        x, info = solve_saddle(system, cfg.linear_tol, self._factor_for(k, 1.0))
        c_new, v_new = self._split(x)
        return c_new, v_new, StepInfo(0, info.residual)

    def _newton(self, c, k, crank_nicolson):
        cfg, ops, spec = self.cfg, self.ops, self.spec
        theta = 0.5 if crank_nicolson else 1.0
        terms = self._terms(k, theta)
        mass_c = (self.mass @ c.T).T
        stiff_c = kron_apply(self.s_matrix, ops.stiffness, c)

        def residual(x):
            cn, v = self._split(x)
            r_c = theta * cfg.eta * kron_apply(self.s_matrix, ops.stiffness, cn) - (self.mass @ v.T).T
            if crank_nicolson:
                r_c += 0.5 * cfg.eta * stiff_c + ops.lumped / cfg.eta * reduced_secant(spec, cn, c)
            else:
                r_c += ops.lumped / cfg.eta * reduced_gradient(spec, cn)
            r_v = mass_c - (self.mass @ cn.T).T - k * kron_apply(self.q_matrix, ops.stiffness, v)
            return np.vstack([r_c, r_v]).ravel()

        def jacobian(x):
            cn, _ = self._split(x)
            if crank_nicolson:
                blocks = reduced_secant_jacobian(spec, cn, c)
            else:
                blocks = reduced_hessian(spec, cn)
            return BlockSystem(terms, np.zeros(x.size), self._nodal(blocks), symmetric=not crank_nicolson)

        def linear_solve(jac, rhs):
            system = jac.with_rhs(rhs)
            if self._krylov_ok:
                # the step operator without the potential term is a good
                # preconditioner while k is small; once it stops being one,
                # stay with direct solves
                try:
                    return solve_gmres(
                        system, cfg.linear_tol, restart=60, max_iter=2, precondition=self._factor_for(k, theta).solve
                    )[0]
                except SolverError:
                    self._krylov_ok = False
            return solve_saddle(system, cfg.linear_tol)[0]

        v0 = np.zeros_like(c)
        result = newton_solve(
            residual,
            jacobian,
            np.vstack([c, v0]).ravel(),
            rel_tol=cfg.newton_rtol,
            abs_tol=cfg.newton_atol,
            max_iter=cfg.newton_max_iter,
            linear_solve=linear_solve,
        )
        c_new, v_new = self._split(result.x)
        return c_new, v_new, StepInfo(result.iterations, 0.0)


def _step_with(scheme, state, cfg, coeff, spec, ops):
    if cfg.scheme != scheme:
        cfg = replace(cfg, scheme=scheme)
    field, w, _ = CahnHilliardSolver(cfg, coeff, spec, ops).step(state)
    return field, w


def ch_step_semi_implicit(state, cfg, coeff, spec, ops):
    return _step_with(SEMI_IMPLICIT, state, cfg, coeff, spec, ops)


def ch_step_fully_implicit(state, cfg, coeff, spec, ops):
    return _step_with(FULLY_IMPLICIT, state, cfg, coeff, spec, ops)


def ch_step_crank_nicolson(state, cfg, coeff, spec, ops):
    return _step_with(CRANK_NICOLSON, state, cfg, coeff, spec, ops)


def ch_stable_step(cfg: ChConfig, coeff, spec: PotentialSpec, bounds=None):
    """Step-size bounds ``(k_semi, k_fully)``; ``bounds`` is an optional ``(L1, L2)``."""
    _require_spd(coeff)
    l1, l2 = hessian_bounds(spec) if bounds is None else bounds
    base = 8.0 * coeff.lambda_c_min ** 2 * cfg.eta ** 3 / cfg.m0

    def ratio(den):
        return math.inf if den == 0 else base / den ** 2

    return ratio(l1), ratio(l2)
