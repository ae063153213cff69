"""
Spinodal decomposition and contact between phases
=================================================

Three phases start as a noisy uniform mixture and separate under the
N-phase Cahn-Hilliard flow.  Mass of every phase is conserved to
round-off.  The second run raises the tension between phases 1 and 3;
the table compares how often those two phases share an interface.
"""
import sys
from importlib import resources

import numpy as np

from nphase.scenario import Simulation, load_config

steps = 500 if "--full" in sys.argv else 200
configs = resources.files("nphase") / "configs"


def interface_edges(sim, i, j):
    """Mesh edges whose endpoints are dominated by phases i and j."""
    label = np.argmax(sim.field.full(), axis=1).reshape(sim.mesh.shape)
    horizontal = (label[:, :-1], label[:, 1:])
    vertical = (label[:-1], label[1:])
    return sum(int(np.sum(((a == i) & (b == j)) | ((a == j) & (b == i)))) for a, b in (horizontal, vertical))


print(f"{'tensions':18s}{'E start':>10s}{'E end':>10s}{'mass drift':>12s}{'1-3 edges':>11s}{'1-2 edges':>11s}")
for name, label in (("spinodal", "all equal"), ("spinodal_repel", "sigma_13 = 1.69")):
    sim = Simulation(load_config(configs / f"{name}.cfg", [f"steps={steps}"]))
    reports = list(sim.reports())
    masses = np.array([r.masses for r in reports])
    drift = np.max(np.abs(masses - masses[0]) / masses[0])
    print(f"{label:18s}{reports[0].energy:10.4f}{reports[-1].energy:10.4f}{drift:12.1e}"
          f"{interface_edges(sim, 0, 2):11d}{interface_edges(sim, 0, 1):11d}")
