"""
Which surface tension sets are admissible?
==========================================

A set of pairwise tensions works with the N-phase models only when the
reduced tension matrix is positive definite.  Geometrically that means the
phases can be placed at the vertices of a simplex whose squared edge
lengths are the tensions.
"""
import numpy as np

from nphase import SurfaceTensionMatrix, assemble_lambda, assemble_lambda_special, spd_check
from nphase.tension import PhaseMap, triangle_condition

np.set_printoptions(precision=4, suppress=True)

# Three phases with one stronger pair.  sqrt(1.69) = 1.3 < 1 + 1, so the
# triangle closes and the check returns an explicit embedding.
t = SurfaceTensionMatrix.from_pairs(3, {(0, 2): 1.69})
report = spd_check(t)
print("sigma_13 = 1.69 admissible:", report.is_spd)
print("vertices:\n", report.witness)
d2 = np.sum((report.witness[:, None] - report.witness[None]) ** 2, axis=-1)
print("squared distances reproduce sigma:", np.allclose(d2, t.sigma))

# Push the same pair to 5: sqrt(5) > 2 breaks the triangle inequality.
bad = SurfaceTensionMatrix.from_pairs(3, {(0, 2): 5.0})
print("\nsigma_13 = 5 admissible:", spd_check(bad).is_spd, "| triangle holds:", triangle_condition(bad))

# %%
# The coefficient matrix depends on the chosen phase variables, but the
# operator it induces on concentrations does not.
rng = np.random.default_rng(0)
t4 = SurfaceTensionMatrix.from_pairs(4, {(0, 1): 2.56})
special = assemble_lambda_special(t4)
other = assemble_lambda(t4, PhaseMap(rng.normal(size=(4, 4)), np.zeros(4)))
print("\nLambda (special map):\n", special.lambda_tilde)
print("Lambda (random map):\n", other.lambda_tilde)
print("same concentration operator:", np.allclose(special.lambda_tilde_c, other.lambda_tilde_c))
print("smallest tangent eigenvalue:", round(special.lambda_c_min, 4))
