import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tamegeom import convex_interp as ci
from tamegeom import metric_fields as mf


@pytest.mark.parametrize("s", [0.0, 0.3, 0.5, 1.0])
def test_formula_matches_direct(s):
    g0, g1 = mf.polyrand(1, 0.6), mf.polyrand(2, 0.6)
    x = [0.2, -0.1]
    u, v = [1.0, 0.2], [0.3, -1.0]
    a = ci.curvature_via_formula(g0, g1, s, x, u, v)
    b = ci.curvature_direct(g0, g1, s, x, u, v)
    assert a == pytest.approx(b, rel=1e-10, abs=1e-12)


def test_symmetric_pairing_drops_the_bracket():
    g0, g1 = mf.polyrand(1, 0.6), mf.polyrand(2, 0.6)
    x, u, v = [0.2, -0.1], [1.0, 0.2], [0.3, -1.0]
    direct = ci.curvature_direct(g0, g1, 0.5, x, u, v)
    sym = ci.curvature_via_formula(g0, g1, 0.5, x, u, v, pairing="symmetric")
    lin = 0.5 * (ci.curvature_direct(g0, g1, 0.0, x, u, v)
                 + ci.curvature_direct(g0, g1, 1.0, x, u, v))
    assert sym == pytest.approx(lin)
    assert abs(sym - direct) > 1e-6


def test_constant_scaling_pair_has_zero_curvature():
    r = ci.convex_path_sweep(mf.flat(), mf.scaled_flat(4.0), mf.flat().domain.sample(10, 0),
                             np.linspace(0, 1, 5))
    assert r.max_abs_err == 0.0 and r.bound_ok


def test_sweep_bound_and_accuracy():
    g0, g1 = mf.flat(), mf.polyrand(7, 0.05)
    r = ci.convex_path_sweep(g0, g1, g0.domain.grid(6), np.linspace(0, 1, 6))
    assert r.max_rel_err <= 1e-6
    assert r.bound_ok
    for row in r.per_s:
        assert row["sup_norm_Rs"] <= row["bound"] * (1 + 1e-9)


def test_rs_bound_endpoints():
    assert ci.rs_bound(2.0, 3.0, 5.0, 0.5, 0.0) == 2.0
    assert ci.rs_bound(2.0, 3.0, 5.0, 0.5, 1.0) == 3.0
    assert ci.rs_bound(0, 0, 1.0, 0.5, 0.5) == pytest.approx(2 * 0.25 / 0.5)


@given(s=st.floats(0.0, 1.0), a=st.floats(0.1, 10.0), b=st.floats(0.1, 10.0))
@settings(max_examples=50, deadline=None)
def test_inverse_norm_bound(s, a, b):
    g0 = mf.flat()
    dom = g0.domain
    g1 = mf.MetricField.from_callable(lambda x: np.diag([a, b]), 2, dom)
    P = ci.endo_P(g0, g1, [0.0, 0.0])
    assert ci.inverse_norm_bound(P, s).holds


def test_quasi_isometric_ratio():
    q = ci.quasi_isometric_ratio(mf.flat(), mf.scaled_flat(4.0), mf.flat().domain.sample(3, 0))
    assert q.A == pytest.approx(2.0)
    assert q.A_quadratic == pytest.approx(4.0)
    assert q.log_relation_defect < 1e-12


def test_bilipschitz_convex_distances():
    d0 = lambda p, q: float(np.linalg.norm(np.subtract(p, q)))
    d1 = lambda p, q: 2.0 * d0(p, q)
    rng = np.random.default_rng(0)
    pairs = [(rng.uniform(-0.5, 0.5, 2), rng.uniform(-0.5, 0.5, 2)) for _ in range(20)]
    for s in (0.0, 0.4, 1.0):
        assert ci.distance_convex_bilipschitz_check(d0, d1, 2.0, s, pairs).passed
