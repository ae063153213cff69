"""Per-step diagnostics: energy, phase masses, bounds and the discrete energy law."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .allen_cahn import AcConfig
from .cahn_hilliard import ChConfig, mobility_factor
from .fem import PhaseField, ScalarOperators, assemble_operators, capillary_matrix, integrate_energy
from .potential import PotentialSpec
from .reduced import kron_apply


@dataclass(frozen=True)
class StepReport:
    step: int
    time: float
    energy: float
    masses: tuple
    min_c: float
    max_c: float
    dissipation_residual: float
    newton_iterations: int = 0
    linear_residual: float = 0.0

    @staticmethod
    def csv_header(n_phases: int) -> str:
        masses = ",".join(f"mass_{i + 1}" for i in range(n_phases))
        return f"step,time,energy,{masses},min_c,max_c,dissipation_residual,newton_iters,lin_residual"

    def csv_row(self) -> str:
        def g(x):
            return format(float(x), ".17g")

        fields = [str(self.step), g(self.time), g(self.energy)]
        fields += [g(m) for m in self.masses]
        fields += [g(self.min_c), g(self.max_c), g(self.dissipation_residual)]
        fields += [str(self.newton_iterations), g(self.linear_residual)]
        return ",".join(fields)


def phase_masses(state: PhaseField, ops: ScalarOperators) -> np.ndarray:
    """``1^T M c_i`` for every phase."""
    return ops.lumped @ state.full()


def admissibility_violation(state: PhaseField) -> tuple[float, float]:
    """Largest undershoot below 0 and overshoot above 1 over all nodes and phases."""
    c = state.full()
    return max(0.0, -float(c.min())), max(0.0, float(c.max()) - 1.0)


def energy_change_target(state, prev_state, coeff, cfg, ops, potential=None, k=None) -> float:
    """The dissipation a step must produce for the Crank-Nicolson identity to hold.

    Allen-Cahn: ``(gamma/k) dc^T (S x M_L) dc``.  Cahn-Hilliard:
    ``k w'^T (B x K) w'`` (needs the new chemical potential).
    """
    k = cfg.k if k is None else k
    if isinstance(cfg, AcConfig):
        d = state.values - prev_state.values
        return cfg.gamma / k * float(np.sum(d * kron_apply(capillary_matrix(coeff), ops.lumped_mass, d)))
    if isinstance(cfg, ChConfig):
        if potential is None:
            return float("nan")
        w = potential.values
        return k * float(np.sum(w * kron_apply(mobility_factor(coeff, cfg.m0), ops.stiffness, w)))
    raise TypeError(f"unsupported config {type(cfg).__name__}")


def report(
    state: PhaseField,
    prev_state: PhaseField | None,
    coeff,
    spec: PotentialSpec,
    cfg,
    ops: ScalarOperators | None = None,
    *,
    step: int = 0,
    time: float = 0.0,
    info=None,
    potential=None,
    k: float | None = None,
    prev_energy: float | None = None,
) -> StepReport:
    """Diagnostics of ``state``; the dissipation residual compares it with ``prev_state``.

    The residual is ``|E(prev) - E(state) - D|`` with ``D`` from
    :func:`energy_change_target`; it is zero when there is no previous
    state.  It is an identity only for the Crank-Nicolson schemes.
    """
    if prev_state is not None and prev_state.mesh.n_cells != state.mesh.n_cells:
        raise ValueError("states live on different meshes")
    if ops is None:
        ops = assemble_operators(state.mesh)
    energy = integrate_energy(state, coeff, spec, cfg.eta, ops)
    residual = 0.0
    if prev_state is not None:
        if prev_energy is None:
            prev_energy = integrate_energy(prev_state, coeff, spec, cfg.eta, ops)
        target = energy_change_target(state, prev_state, coeff, cfg, ops, potential, k)
        residual = abs(prev_energy - energy - target)
    c = state.full()
    return StepReport(
        step=step,
        time=time,
        energy=energy,
        masses=tuple(float(m) for m in phase_masses(state, ops)),
        min_c=float(c.min()),
        max_c=float(c.max()),
        dissipation_residual=residual,
        newton_iterations=0 if info is None else info.newton_iterations,
        linear_residual=0.0 if info is None else info.linear_residual,
    )
