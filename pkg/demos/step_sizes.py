"""
Potentials, Hessian bounds and stable step sizes
================================================

The linear (semi-implicit) and fully implicit schemes are energy stable
below step sizes set by the curvature of the multi-well potential.  This
script evaluates the potential, samples its Hessian over the simplex and
turns the bounds into step sizes.
"""
import numpy as np

from nphase import AcConfig, ChConfig, PotentialSpec, SurfaceTensionMatrix, assemble_lambda_special
from nphase import ac_stable_step, ch_stable_step, eval_F, hessian_bounds

# The homogeneous potential vanishes at pure phases and peaks at the centre.
spec = PotentialSpec.homogeneous(1.0, 3)
for c in ([1, 0, 0], [0.5, 0.5, 0], [1 / 3, 1 / 3, 1 / 3]):
    print(f"F{tuple(round(x, 3) for x in c)} = {eval_F(spec, np.array(c)):.4f}")

# %%
# Hessian bounds: L1 caps positive curvature, L2 negative curvature.
# margin=0 samples the simplex itself, the default dilates it by 0.1.
print("\nexact simplex  L1 = %.4g, L2 = %.4g" % hessian_bounds(spec, margin=0.0))
print("dilated        L1 = %.4g, L2 = %.4g" % hessian_bounds(spec))

# %%
# Unequal tensions use the inhomogeneous potential; s adds a triple-well
# term that keeps absent phases out of two-phase interfaces, at the
# price of a much larger L1.
for s in (0.0, 30.0):
    t = SurfaceTensionMatrix.from_pairs(4, {(0, 1): 1.69})
    spec = PotentialSpec.inhomogeneous(t, s=s)
    coeff = assemble_lambda_special(t)
    k_semi, k_fully, k_convex = ac_stable_step(AcConfig(eta=0.02, k=1.0), coeff, spec)
    ch_semi, ch_fully = ch_stable_step(ChConfig(eta=0.02, k=1.0), coeff, spec)
    print("\ns = %g: L1 = %.4g, L2 = %.4g" % ((s,) + hessian_bounds(spec)))
    print(f"  Allen-Cahn    k_semi {k_semi:.3g}  k_fully {k_fully:.3g}  k_convex {k_convex:.3g}")
    print(f"  Cahn-Hilliard k_semi {ch_semi:.3g}  k_fully {ch_fully:.3g}")
