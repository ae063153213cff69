"""N-phase Allen-Cahn and Cahn-Hilliard phase-field solvers with pairwise surface tensions."""
from .allen_cahn import AcConfig, AllenCahnSolver, ac_stable_step
from .cahn_hilliard import ChConfig, CahnHilliardSolver, ChemicalPotentialField, ch_stable_step
from .diagnostics import StepReport, admissibility_violation, report
from .fem import Mesh, PhaseField, ScalarOperators, assemble_operators, build_uniform_mesh, integrate_energy
from .potential import PotentialSpec, eval_F, grad_F, hessian_bounds, hessian_F, potential_fd
from .scenario import RunConfig, Simulation, load_config, parse_config, run
from .tension import (
    CoefficientMatrix,
    PhaseMap,
    SurfaceTensionMatrix,
    assemble_lambda,
    assemble_lambda_special,
    reduced_sigma,
    spd_check,
    validate_sigma,
)

__version__ = "0.1.0"
