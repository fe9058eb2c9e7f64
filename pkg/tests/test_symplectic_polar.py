import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tamegeom import symplectic_polar as sp
from tamegeom.errors import (DegenerateForm, DimensionMismatch, NotAlmostComplex, NotSPD,
                             NotTame, SingularMatrix, Unclassifiable)


def test_standard_form():
    O = sp.SymplecticForm.standard(4)
    assert O([1, 0, 0, 0], [0, 1, 0, 0]) == 1.0
    assert O([1, 0, 0, 0], [0, 0, 1, 0]) == 0.0
    with pytest.raises(DimensionMismatch):
        sp.SymplecticForm.standard(3)
    with pytest.raises(DegenerateForm):
        sp.SymplecticForm(np.zeros((2, 2)))
    with pytest.raises(DegenerateForm):
        sp.SymplecticForm(np.eye(2))


def test_polar_of_standard_metric():
    O = sp.SymplecticForm.standard(2)
    pd = sp.polar_decomposition(O, np.eye(2))
    assert np.allclose(pd.J, -O.matrix)
    assert np.allclose(pd.eigenvalues, 1.0)
    assert max(pd.residuals(O).values()) < 1e-14


def test_polar_of_diagonal_metric():
    O = sp.SymplecticForm.standard(2)
    G = np.diag([2.0, 0.5])
    pd = sp.polar_decomposition(O, G)
    # det G = 1 so A A* = Id and A is already a complex structure
    assert np.allclose(pd.AAstar, np.eye(2))
    assert np.allclose(pd.J, pd.A)
    assert np.allclose(sp.metric_from_J(O, pd.J), G)


@given(seed=st.integers(0, 10_000), dim=st.sampled_from([2, 3, 5]))
@settings(max_examples=40, deadline=None)
def test_spd_sqrt(seed, dim):
    rng = np.random.default_rng(seed)
    G = sp.random_spd(dim, rng)
    B = sp.random_spd(dim, rng)
    S = np.linalg.solve(G, B)  # G-symmetric and positive
    R = sp.spd_sqrt(S, G)
    assert np.allclose(R @ R, S, atol=1e-9 * np.abs(S).max())
    assert np.allclose(G @ R, (G @ R).T, atol=1e-9 * np.abs(G @ R).max())


def test_spd_sqrt_rejects_indefinite():
    with pytest.raises(NotSPD):
        sp.spd_sqrt(np.diag([1.0, -1.0]))


@given(seed=st.integers(0, 10_000), dim=st.sampled_from([2, 4, 6]))
@settings(max_examples=30, deadline=None)
def test_retraction_round_trip(seed, dim):
    O = sp.SymplecticForm.standard(dim)
    J = sp.random_compatible_J(O, np.random.default_rng(seed))
    assert sp.retraction_check(O, J) <= 1e-10


def test_metric_from_J_rejects_anti_tame():
    O = sp.SymplecticForm.standard(2)
    with pytest.raises(NotTame):
        sp.metric_from_J(O, O.matrix)
    with pytest.raises(NotAlmostComplex):
        sp.metric_from_J(O, np.eye(2))


def test_case_classification():
    tagged = sp.case_classification([2.0, 0.5, np.exp(0.3j), np.exp(-0.3j)])
    assert [t for _, t in tagged] == [sp.REAL, sp.REAL, sp.UNIT, sp.UNIT]
    with pytest.raises(Unclassifiable):
        sp.case_classification([2.0 + 1.0j])
    with pytest.raises(Unclassifiable):
        sp.case_classification([-3.0])


def test_pinching_bounds_and_diag_example():
    real, unit = sp.pinching_bounds(2.0)
    assert real == (1.0, 0.5 + 2.5 / 4) and unit == (0.5, 1.0)
    O = sp.SymplecticForm.standard(2)
    d = sp.interpolate_J_path(O, np.eye(2), np.diag([2.0, 0.5]), vectors=500)
    assert d.C == pytest.approx(2.0)
    assert d.passed, d.checks()
    # the real-case upper bound is attained at t = 1/2
    assert d.measured[5].max() == pytest.approx(real[1], abs=1e-12)


@pytest.mark.parametrize("dim", [2, 4, 6])
def test_random_paths(dim):
    O = sp.SymplecticForm.standard(dim)
    for seed in range(5):
        g0, g1 = sp.random_compatible_pair(O, seed)
        d = sp.interpolate_J_path(O, g0, g1, vectors=500, seed=seed)
        assert d.passed, d.checks()
        assert set(d.tags) == {sp.REAL}
        for row in d.csv_rows():
            assert row[6] - 1e-10 <= row[2] <= row[7] + 1e-10


def test_rotated_pair_has_unit_modulus_eigenvalues():
    phi = 0.4
    O, J0, J1 = sp.rotated_tame_pair(phi)
    sp.metric_from_J(O, J1)  # tame
    lam = np.linalg.eigvals(-J1 @ J0)
    assert np.allclose(np.abs(lam), 1.0)
    assert np.allclose(np.sort(np.abs(np.angle(lam))), phi)
    assert {t for _, t in sp.case_classification(lam)} == {sp.UNIT}
    assert sp.inverse_identity_check(J0, J1)
    # reciprocals stay in the unit-modulus interval
    for t in np.linspace(0, 1, 11):
        r = sp.predicted_reciprocals(lam, t)
        assert np.all(r >= 0.5) and np.all(r <= 1.0 + 1e-15)


def test_sandwich_check_detects_violation():
    rep = sp.sandwich_check(np.eye(2), 3.0 * np.eye(2), [1.0, 4.0], samples=100)
    assert rep.violations == 100
    ok = sp.sandwich_check(np.eye(2), 1.5 * np.eye(2), [1.0, 4.0], samples=100)
    assert ok.passed


def test_jordan_block_examples():
    rep = sp.jordan_sum_eigenvalues(np.array([[2.0, 1.0], [0.0, 2.0]]))
    assert rep.passed
    assert np.allclose(np.sort(rep.mus.real), [2.5, 2.5])
    M = np.array([[-1.0, 1.0, 0.0], [0.0, -1.0, 1.0], [0.0, 0.0, -1.0]])
    assert sp.jordan_sum_eigenvalues(M).passed
    with pytest.raises(SingularMatrix):
        sp.jordan_sum_eigenvalues(np.zeros((2, 2)))


def test_jordan_random_batch():
    mats = sp.jordan_test_matrices(60, seed=3)
    reps = [sp.jordan_sum_eigenvalues(M) for M in mats]
    assert all(r.passed for r in reps)
    assert any(r.precision != "double" for r in reps)


def test_defective_test_matrix_has_given_spectrum():
    M = sp.jordan_test_matrix(4, np.random.default_rng(0), True)
    lam = np.linalg.eigvals(M)
    assert all(min(abs(l - v) for v in sp._JORDAN_VALUES) < 1e-3 for l in lam)
    assert math.isclose(abs(np.linalg.det(M)), abs(np.prod(lam)), rel_tol=1e-6)
