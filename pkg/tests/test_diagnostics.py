import numpy as np
import pytest

from nphase.allen_cahn import CRANK_NICOLSON, AcConfig, AllenCahnSolver
from nphase.cahn_hilliard import CahnHilliardSolver, ChConfig
from nphase.diagnostics import StepReport, admissibility_violation, phase_masses, report
from nphase.fem import PhaseField, build_uniform_mesh, integrate_energy
from nphase.potential import PotentialSpec
from nphase.tension import SurfaceTensionMatrix, assemble_lambda_special

from conftest import smooth_random_field

COEFF = assemble_lambda_special(SurfaceTensionMatrix.uniform(3))
SPEC = PotentialSpec.homogeneous(1.0, 3)


def test_report_pure_phase(mesh16, ops16):
    rep = report(PhaseField.constant(mesh16, [1.0, 0.0, 0.0]), None, COEFF, SPEC, AcConfig(eta=0.01, k=1e-4), ops16)
    assert rep.energy == 0
    np.testing.assert_allclose(rep.masses, [1, 0, 0], atol=1e-14)
    assert (rep.min_c, rep.max_c) == (0.0, 1.0)
    assert rep.dissipation_residual == 0 and rep.newton_iterations == 0


def test_report_uniform_mixture(mesh16):
    rep = report(PhaseField.constant(mesh16, np.full(3, 1 / 3)), None, COEFF, SPEC, AcConfig(eta=0.01, k=1e-4))
    assert rep.energy == pytest.approx(29.63, abs=5e-3)
    np.testing.assert_allclose(rep.masses, 1 / 3, rtol=1e-12)


def test_report_energy_is_integrate_energy(mesh16, ops16):
    field = smooth_random_field(mesh16, 3, seed=1)
    rep = report(field, None, COEFF, SPEC, AcConfig(eta=0.02, k=1e-4), ops16)
    assert rep.energy == integrate_energy(field, COEFF, SPEC, 0.02, ops16)
    assert sum(rep.masses) == pytest.approx(1.0, abs=1e-10)


def test_crank_nicolson_residual_small(mesh16, ops16):
    cfg = AcConfig(eta=0.02, k=1e-4, scheme=CRANK_NICOLSON, newton_rtol=1e-12, newton_atol=1e-13)
    prev = smooth_random_field(mesh16, 3, seed=2)
    new, info = AllenCahnSolver(cfg, COEFF, SPEC, ops16).step(prev)
    rep = report(new, prev, COEFF, SPEC, cfg, ops16, step=1, time=cfg.k, info=info)
    assert rep.dissipation_residual <= 1e-8 * abs(rep.energy)
    assert rep.newton_iterations == info.newton_iterations


def test_cahn_hilliard_residual_needs_potential(mesh16, ops16):
    cfg = ChConfig(eta=0.05, k=1e-5, scheme=CRANK_NICOLSON, newton_rtol=1e-12, newton_atol=1e-13)
    prev = smooth_random_field(mesh16, 3, seed=3)
    new, w, _ = CahnHilliardSolver(cfg, COEFF, SPEC, ops16).step(prev)
    rep = report(new, prev, COEFF, SPEC, cfg, ops16, potential=w)
    assert rep.dissipation_residual <= 1e-8 * max(1.0, abs(rep.energy))
    np.testing.assert_allclose(phase_masses(new, ops16), phase_masses(prev, ops16), rtol=1e-11)
    assert np.isnan(report(new, prev, COEFF, SPEC, cfg, ops16).dissipation_residual)


def test_report_rejects_mesh_mismatch(mesh16):
    other = PhaseField.constant(build_uniform_mesh(8), [1.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        report(PhaseField.constant(mesh16, [1.0, 0.0, 0.0]), other, COEFF, SPEC, AcConfig(eta=0.01, k=1e-4))


def test_admissibility_examples(mesh16):
    assert admissibility_violation(smooth_random_field(mesh16, 3, seed=4)) == (0.0, 0.0)
    c = np.tile([0.5, 0.3, 0.2], (mesh16.n_nodes, 1))
    c[5] = [-0.03, 0.5, 0.53]
    c[9] = [0.0, 1.02, -0.02]
    under, over = admissibility_violation(PhaseField.from_full(mesh16, c))
    assert under == pytest.approx(0.03) and over == pytest.approx(0.02)


def test_csv_row_round_trips():
    rep = StepReport(3, 1 / 3, 2 / 7, (0.1, 0.9), -1e-3, 1.0, 5e-17, 4, 1e-11)
    header = StepReport.csv_header(2).split(",")
    row = rep.csv_row().split(",")
    assert header == [
        "step", "time", "energy", "mass_1", "mass_2", "min_c", "max_c",
        "dissipation_residual", "newton_iters", "lin_residual",
    ]
    assert float(row[1]) == 1 / 3 and float(row[2]) == 2 / 7
    assert row[0] == "3" and row[8] == "4"
