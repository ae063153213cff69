import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nphase.tension import (
    PhaseMap,
    SurfaceTensionMatrix,
    TensionError,
    assemble_lambda,
    assemble_lambda_special,
    coefficient_gram,
    reduced_is_spd,
    reduced_sigma,
    simplex_embedding,
    spd_check,
    triangle_condition,
    validate_sigma,
)

from conftest import random_tensions


def test_validate_accepts_two_phases():
    assert validate_sigma(SurfaceTensionMatrix.uniform(2)) == []


def test_validate_reports_negative_entry():
    t = SurfaceTensionMatrix.from_pairs(3, {(0, 1): -1.0})
    assert validate_sigma(t) == ["negative off-diagonal (1,2)"]


def test_validate_reports_asymmetry():
    sigma = SurfaceTensionMatrix.uniform(3).sigma.copy()
    sigma[0, 1] = 2.0
    assert validate_sigma(SurfaceTensionMatrix(sigma)) == ["asymmetric (1,2)"]


def test_validate_reports_diagonal_and_zero():
    sigma = SurfaceTensionMatrix.uniform(3).sigma.copy()
    sigma[2, 2] = 1.0
    sigma[0, 2] = sigma[2, 0] = 0.0
    problems = validate_sigma(SurfaceTensionMatrix(sigma))
    assert "nonzero diagonal (3,3)" in problems
    assert "zero off-diagonal (1,3)" in problems


def test_non_square_sigma_rejected():
    with pytest.raises(TensionError):
        SurfaceTensionMatrix(np.zeros((2, 3)))


@pytest.mark.parametrize(
    "tensions, m, expected",
    [
        (SurfaceTensionMatrix.uniform(3), 2, [[1, 0.5], [0.5, 1]]),
        (SurfaceTensionMatrix.uniform(2), 1, [[1]]),
        (
            SurfaceTensionMatrix.from_pairs(4, {(0, 1): 2.56}),
            3,
            [[1, -0.28, 0.5], [-0.28, 1, 0.5], [0.5, 0.5, 1]],
        ),
    ],
)
def test_reduced_sigma_examples(tensions, m, expected):
    np.testing.assert_allclose(reduced_sigma(tensions, m), expected, atol=1e-15)


def test_reduced_sigma_index_range():
    with pytest.raises(IndexError):
        reduced_sigma(SurfaceTensionMatrix.uniform(3), 3)


def test_spd_equilateral_witness():
    report = spd_check(SurfaceTensionMatrix.uniform(3))
    assert report.is_spd
    np.testing.assert_allclose(np.sort(report.eigenvalues), [0.5, 1.5])
    p = report.witness
    d = np.linalg.norm(p[:, None] - p[None], axis=-1)
    np.testing.assert_allclose(d[np.triu_indices(3, 1)], 1.0, rtol=1e-12)


def test_spd_rejects_triangle_violation():
    t = SurfaceTensionMatrix.from_pairs(3, {(0, 1): 5.0})
    report = spd_check(t)
    assert not report.is_spd and report.witness is None
    np.testing.assert_allclose(np.sort(report.eigenvalues), [-0.5, 2.5])
    assert not triangle_condition(t)


@pytest.mark.parametrize("value", [1.69, 2.56])
def test_spd_t_junction_tensions(value):
    report = spd_check(SurfaceTensionMatrix.from_pairs(4, {(0, 1): value}))
    assert report.is_spd and report.witness.shape == (4, 3)


def test_boundary_tie_is_not_spd():
    # sqrt(4) = sqrt(1) + sqrt(1): degenerate simplex
    assert not spd_check(SurfaceTensionMatrix.from_pairs(3, {(0, 1): 4.0})).is_spd


def test_lambda_three_phase_uniform():
    coeff = assemble_lambda(SurfaceTensionMatrix.uniform(3), PhaseMap.special(3))
    p_c = np.eye(3) - 1.0 / 3.0
    np.testing.assert_allclose(coeff.lambda_tilde_c, 2.25 * p_c, atol=1e-12)
    np.testing.assert_allclose(coeff.lambda_c_dagger, p_c / 2.25, atol=1e-12)
    assert coeff.lambda_c_min == pytest.approx(2.25)


def test_lambda_two_phase():
    expected = [[4.5, 0], [0, 0]]
    t = SurfaceTensionMatrix.uniform(2)
    np.testing.assert_allclose(assemble_lambda(t, PhaseMap.special(2)).lambda_tilde, expected, atol=1e-12)
    np.testing.assert_allclose(assemble_lambda_special(t).lambda_tilde, expected, atol=0)


def test_lambda_special_closed_form():
    coeff = assemble_lambda_special(SurfaceTensionMatrix.uniform(3))
    np.testing.assert_allclose(coeff.lambda_tilde, [[4.5, 2.25, 0], [2.25, 4.5, 0], [0, 0, 0]])


def test_singular_phase_map_rejected():
    with pytest.raises(TensionError):
        PhaseMap(np.ones((3, 3)), None)


def test_phase_map_invariants():
    a = np.random.default_rng(3).normal(size=(4, 4)) + 3 * np.eye(4)
    pm = PhaseMap(a, np.zeros(4))
    np.testing.assert_allclose(pm.d_vector, np.linalg.solve(a.T, np.ones(4)))
    p = pm.projector
    np.testing.assert_allclose(p, p.T, atol=1e-14)
    np.testing.assert_allclose(p @ p, p, atol=1e-12)
    np.testing.assert_allclose(p @ pm.d_vector, 0, atol=1e-12)


def _random_map(rng, n):
    while True:
        a = rng.normal(size=(n, n))
        if abs(np.linalg.det(a)) > 0.1:
            return PhaseMap(a, rng.normal(size=n))


@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_lambda_matches_pair_constraints(n, seed):
    rng = np.random.default_rng(seed)
    t = random_tensions(rng, n)
    pm = _random_map(rng, n)
    coeff = assemble_lambda(t, pm)
    lam = coeff.lambda_tilde
    for k, l in itertools.combinations(range(n), 2):
        e = pm.edge(k, l)
        assert e @ lam @ e == pytest.approx(4.5 * t.sigma[k, l], rel=1e-9)
    scale = np.max(np.abs(lam))
    np.testing.assert_allclose(lam @ pm.d_vector, 0, atol=1e-10 * scale * np.max(np.abs(pm.d_vector)))
    ones = np.ones(n)
    np.testing.assert_allclose(coeff.lambda_tilde_c @ ones, 0, atol=1e-9 * scale)
    assert np.linalg.cond(coefficient_gram(pm)) < 1e12


@given(st.integers(3, 6), st.integers(0, 2**32 - 1))
def test_lambda_c_independent_of_map(n, seed):
    rng = np.random.default_rng(seed)
    t = random_tensions(rng, n)
    c1 = assemble_lambda(t, _random_map(rng, n)).lambda_tilde_c
    c2 = assemble_lambda(t, _random_map(rng, n)).lambda_tilde_c
    c3 = assemble_lambda_special(t).lambda_tilde_c
    np.testing.assert_allclose(c1, c2, atol=1e-9 * np.max(np.abs(c3)))
    np.testing.assert_allclose(c1, c3, atol=1e-9 * np.max(np.abs(c3)))


@given(st.integers(3, 5), st.integers(0, 2**32 - 1))
def test_lambda_matches_gram_expansion(n, seed):
    # expand in the rank-one basis directly, pairs in a shuffled order
    rng = np.random.default_rng(seed)
    t = random_tensions(rng, n)
    pm = PhaseMap(np.eye(n) + 0.3 * rng.normal(size=(n, n)) / n, np.zeros(n))
    pairs = list(itertools.combinations(range(n), 2))
    pairs = [pairs[i] for i in rng.permutation(len(pairs))]
    alpha = np.linalg.solve(coefficient_gram(pm, pairs), [4.5 * t.sigma[k, l] for k, l in pairs])
    expanded = sum(a * np.outer(pm.edge(k, l), pm.edge(k, l)) for a, (k, l) in zip(alpha, pairs))
    lam = assemble_lambda(t, pm).lambda_tilde
    np.testing.assert_allclose(lam, expanded, atol=1e-10 * np.max(np.abs(lam)))


@given(st.integers(3, 5), st.integers(0, 2**32 - 1))
def test_pseudo_inverse_on_tangent_space(n, seed):
    rng = np.random.default_rng(seed)
    t = random_tensions(rng, n, 0.8, 1.2)
    coeff = assemble_lambda_special(t)
    assert coeff.is_spd and coeff.lambda_c_min > 0
    p_c = np.eye(n) - 1.0 / n
    np.testing.assert_allclose(coeff.lambda_tilde_c @ coeff.lambda_c_dagger, p_c, atol=1e-9)
    np.testing.assert_allclose(coeff.lambda_c_dagger @ coeff.lambda_tilde_c, p_c, atol=1e-9)


@given(st.integers(3, 5), st.integers(0, 2**32 - 1))
def test_spd_statements_agree(n, seed):
    rng = np.random.default_rng(seed)
    t = random_tensions(rng, n)
    verdicts = {reduced_is_spd(t, m) for m in range(n)}
    verdicts.add(simplex_embedding(t) is not None)
    assert len(verdicts) == 1
    if spd_check(t).is_spd:
        assert triangle_condition(t)


def test_non_spd_still_assembles():
    t = SurfaceTensionMatrix.from_pairs(3, {(0, 1): 5.0})
    coeff = assemble_lambda_special(t)
    assert not coeff.is_spd
    assert coeff.lambda_c_min < 0
