"""P1 finite elements on a uniform triangulation of the unit square."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .potential import PotentialSpec, eval_F


@dataclass(frozen=True, eq=False)
class Mesh:
    """``n x n`` squares, each cut along the diagonal from its lower-left corner.

    Node ``(i, j)`` sits at ``(i/n, j/n)`` and has index ``j*(n+1) + i``.
    """

    n_cells: int
    nodes: np.ndarray
    triangles: np.ndarray

    @property
    def h(self) -> float:
        return 1.0 / self.n_cells

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        """Node grid shape ``(rows, cols)``; reshape nodal data with it (row = y)."""
        return (self.n_cells + 1, self.n_cells + 1)


def build_uniform_mesh(n: int) -> Mesh:
    if n < 2:
        raise ValueError(f"need n >= 2 cells per side, got {n}")
    ticks = np.linspace(0.0, 1.0, n + 1)
    x, y = np.meshgrid(ticks, ticks)
    nodes = np.column_stack([x.ravel(), y.ravel()])
    i, j = np.meshgrid(np.arange(n), np.arange(n))
    v00 = (j * (n + 1) + i).ravel()
    v10, v01 = v00 + 1, v00 + n + 1
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper
    for arr in (nodes, triangles):
        arr.setflags(write=False)
    return Mesh(n, nodes, triangles)


@dataclass(frozen=True, eq=False)
class ScalarOperators:
    mass: sp.csr_matrix
    stiffness: sp.csr_matrix
    lumped: np.ndarray  # row sums of the mass matrix

    @property
    def lumped_mass(self) -> sp.csr_matrix:
        """Diagonal matrix of :attr:`lumped`, the nodal-quadrature mass."""
        return sp.diags(self.lumped, format="csr")


def assemble_operators(mesh: Mesh) -> ScalarOperators:
    """Consistent P1 mass and stiffness matrices with natural boundary conditions."""
    tri = mesh.triangles
    p = mesh.nodes[tri]  # (T, 3, 2)
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    area = 0.5 * det
    # barycentric gradients: rotate the opposite edge by -90 degrees
    opp = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)
    grads = np.stack([opp[..., 1], -opp[..., 0]], axis=-1) / det[:, None, None]
    k_loc = area[:, None, None] * np.einsum("tik,tjk->tij", grads, grads)
    m_ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
    m_loc = area[:, None, None] * m_ref
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    size = (mesh.n_nodes, mesh.n_nodes)
    mass = sp.coo_matrix((m_loc.ravel(), (rows, cols)), shape=size).tocsr()
    stiff = sp.coo_matrix((k_loc.ravel(), (rows, cols)), shape=size).tocsr()
    mass.sum_duplicates()
    stiff.sum_duplicates()
    lumped = np.asarray(mass.sum(axis=1)).ravel()
    return ScalarOperators(mass, stiff, lumped)


@dataclass(frozen=True, eq=False)
class PhaseField:
    """Concentrations on the mesh nodes.

    Only the first ``N-1`` components are stored (``values`` has shape
    ``(N-1, n_nodes)``); the last one is ``1 - sum`` of the others.
    """

    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape[1] != self.mesh.n_nodes:
            raise ValueError(f"values must have shape (N-1, {self.mesh.n_nodes}), got {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n_phases(self) -> int:
        return self.values.shape[0] + 1

    @classmethod
    def from_full(cls, mesh: Mesh, c) -> "PhaseField":
        """Build from an ``(n_nodes, N)`` array; its last column is discarded."""
        c = np.asarray(c, dtype=float)
        return cls(mesh, c[:, :-1].T)

    @classmethod
    def constant(cls, mesh: Mesh, c) -> "PhaseField":
        c = np.asarray(c, dtype=float)
        return cls(mesh, np.repeat(c[:-1, None], mesh.n_nodes, axis=1))

    def full(self) -> np.ndarray:
        """All ``N`` components as an ``(n_nodes, N)`` array."""
        last = 1.0 - self.values.sum(axis=0)
        return np.vstack([self.values, last]).T

    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def with_values(self, flat) -> "PhaseField":
        return PhaseField(self.mesh, np.reshape(flat, self.values.shape))


def capillary_matrix(coeff) -> np.ndarray:
    """``9/2`` times the reduced tension matrix, the coupling of the gradient energy."""
    return 4.5 * np.asarray(coeff.sigma_reduced)


def capillary_energy(values: np.ndarray, s_matrix: np.ndarray, ops: ScalarOperators, eta: float) -> float:
    kc = (ops.stiffness @ values.T).T
    return 0.5 * eta * float(np.sum(s_matrix * (values @ kc.T)))


def bulk_energy(c_full: np.ndarray, spec: PotentialSpec, ops: ScalarOperators, eta: float) -> float:
    return float(ops.lumped @ eval_F(spec, c_full)) / eta


def integrate_energy(field: PhaseField, coeff, spec: PotentialSpec, eta: float, ops: ScalarOperators | None = None) -> float:
    """Discrete free energy: gradient part with the stiffness matrix, bulk part by nodal quadrature."""
    if not coeff.is_spd:
        raise ValueError("coefficient matrix is not SPD on the tangent space")
    if ops is None:
        ops = assemble_operators(field.mesh)
    return capillary_energy(field.values, capillary_matrix(coeff), ops, eta) + bulk_energy(
        field.full(), spec, ops, eta
    )
