import math

import numpy as np
import pytest

from tamegeom import metric_fields as mf
from tamegeom import qift
from tamegeom.errors import NonPositiveInput, SingularJacobian


def test_bounds_example():
    b = qift.ift_bounds(1.0, 1.0, 1.0, 1.0)
    assert b.R1 == 0.5
    assert b.R2 == pytest.approx(1 / 3)
    assert b.R3 == pytest.approx(1 / 6)


def test_bounds_without_curvature():
    b = qift.ift_bounds(2.0, 0.5, 0.0, 3.0)
    assert b.R1 == 3.0
    assert b.R2 == pytest.approx(1 / 3)
    assert b.R3 == pytest.approx(1 / 12)


@pytest.mark.parametrize("args", [(0, 1, 1, 1), (1, -1, 1, 1), (1, 1, -1, 1), (1, 1, 1, 0),
                                  (1, 1, math.nan, 1)])
def test_bounds_reject_bad_input(args):
    with pytest.raises(NonPositiveInput):
        qift.ift_bounds(*args)


def test_verbatim_R2_is_not_monotone_in_K():
    # 1/R1 grows when R1 shrinks, so adding curvature can enlarge R2
    a = qift.ift_bounds(1.0, 1.0, 0.0, 4.0)
    b = qift.ift_bounds(1.0, 1.0, 0.2, 4.0)
    assert a.R2 == pytest.approx(0.25) and b.R2 == pytest.approx(1 / 3)
    assert b.alt_R2 <= a.alt_R2


def test_alt_R2_monotone_in_K():
    prev = math.inf
    for K in np.linspace(0, 5, 51):
        r = qift.ift_bounds(1.5, 0.7, K, 2.0).alt_R2
        assert r <= prev + 1e-15
        prev = r


def test_constants_of_linear_maps():
    s = qift.estimate_map_constants(lambda X: 2.0 * X, np.zeros(2), 1.0)
    assert s.L == pytest.approx(2.0) and s.M == pytest.approx(0.5)
    assert s.K < 1e-6
    assert s.identity_defect() < 1e-12


def test_constants_of_quadratic():
    s = qift.estimate_map_constants(lambda X: X + X ** 2, np.zeros(1), 0.25)
    assert s.L == pytest.approx(1.0, rel=1e-8)
    assert s.K == pytest.approx(2.0, rel=1e-6)


def test_singular_jacobian():
    with pytest.raises(SingularJacobian):
        qift.estimate_map_constants(lambda X: X ** 2, np.zeros(1), 0.5)


def test_second_differences_of_bilinear_map():
    F = lambda X: np.stack([X[:, 0] * X[:, 1], X[:, 0] ** 2], axis=1)
    H = qift.second_differences(F, np.zeros((1, 2)), 1e-3)[0]
    assert np.allclose(H[0], [[0, 1], [1, 0]], atol=1e-8)
    assert np.allclose(H[1], [[2, 0], [0, 0]], atol=1e-8)


def test_certificate_for_quadratic():
    s = qift.estimate_map_constants(lambda X: X + X ** 2, np.zeros(1), 0.25)
    b = s.bounds()
    c = qift.certify_injectivity(s, b, pair_samples=2000, seed=1)
    assert c.injective_pass and c.collisions == 0
    assert c.lipschitz_pass and c.inverse_failures == 0


def test_invert_map_roundtrip():
    F = lambda X: X + 0.1 * np.sin(X)
    s = qift.estimate_map_constants(F, np.zeros(2), 0.5)
    Y = F(np.array([[0.1, -0.2], [0.05, 0.3]]))
    X, ok = qift.invert_map(s, Y)
    assert ok.all() and np.allclose(F(X), Y, atol=1e-12)


def test_identity_transition():
    g = mf.polyrand(3, 0.3)
    Fm = qift.TransitionMap(g, g, [0.1, 0.0], radius=0.25)
    X = qift.ball_grid(np.zeros(2), 0.25, 5)
    assert np.allclose(Fm(X), X, atol=1e-11)


def test_scaled_transition_halves():
    # flat chart vs. the same chart scaled by 4: orthonormal frames differ by 1/2
    Fm = qift.TransitionMap(mf.flat(), mf.scaled_flat(4.0), [0.0, 0.0], radius=0.5)
    X = np.array([[0.2, 0.1], [-0.3, 0.4]])
    assert np.allclose(Fm(X), X / 2, atol=1e-13)


def test_transition_inverse_under_swap():
    ga, gb = mf.flat(), mf.polyrand(7, 0.3)
    p = [0.05, -0.05]
    fwd = qift.TransitionMap(ga, gb, p, radius=0.2)
    back = qift.TransitionMap(gb, ga, p, fwd.frame_b, fwd.frame_a, radius=0.2)
    X = qift.ball_grid(np.zeros(2), 0.2, 5)
    assert np.allclose(back(fwd(X)), X, atol=1e-10)


def test_second_derivative_refinement_is_stable():
    rep = qift.second_derivative_bound_check(mf.flat(), mf.polyrand(7, 0.05), [[0.0, 0.0]],
                                             S=1.0, S1=1.0, grid=5)
    assert rep.finite and rep.stable and rep.premise_ok
    assert rep.max_fine == pytest.approx(rep.max_coarse, rel=0.1)
