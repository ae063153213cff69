"""
A four-phase T-junction
=======================

Phases 1 and 2 meet along a vertical line that ends on phase 4; a strip
of phase 3 adds a second junction.  Changing the tension between phases
1 and 2 changes how strongly the junction pulls on that interface.  The
inhomogeneous potential with s = 30 keeps phases that are absent from an
interface from leaking into it.

This uses the same scenario machinery as ``nphase run`` and writes
``energy.csv`` plus PGM/PPM snapshots per tension layout.
"""
import sys
from importlib import resources

import numpy as np

from nphase.scenario import run, load_config

steps = 1000 if "--full" in sys.argv else 300
config = resources.files("nphase") / "configs" / "t_junction.cfg"

for value in ("1", "1.69", "2.56"):
    out = f"out/demo_t_junction/sigma12_{value}"
    cfg = load_config(config, [f"sigma.1.2={value}", f"steps={steps}", "snapshot_every=100"])
    status = run(cfg, out)
    data = np.loadtxt(f"{out}/energy.csv", delimiter=",", skiprows=1)
    energy, min_c = data[:, 2], data[:, 7]
    print(f"sigma_12 = {value:4s}  exit {status}  E {energy[0]:.4f} -> {energy[-1]:.4f}  "
          f"min c over run {min_c.min():+.3f}  -> {out}/")
