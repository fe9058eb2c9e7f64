import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tamegeom import metric_fields as mf
from tamegeom.errors import DimensionMismatch, NotSPD, OutOfDomain, StepTooLarge


def test_flat_metric_is_identity():
    g = mf.flat(3)
    assert np.array_equal(g.metric([0.1, 0.2, -0.3]), np.eye(3))
    dg, d2g = g.partials([0.0, 0.0, 0.0], 2)
    assert np.all(dg == 0) and np.all(d2g == 0)


def test_sphere_coefficients_and_partials():
    g = mf.sphere(2.0)
    x = np.array([1.1, 0.4])
    assert np.allclose(g.metric(x), np.diag([4.0, 4.0 * np.sin(1.1) ** 2]))
    dg = g.partials(x, 1)[0]
    # derivative index is last
    assert dg[1, 1, 0] == pytest.approx(8.0 * np.sin(1.1) * np.cos(1.1))
    assert dg[1, 1, 1] == 0.0


def test_half_plane_partial():
    g = mf.half_plane()
    dg = g.partials([0.0, 1.0], 1)[0]
    assert dg[0, 0, 1] == pytest.approx(-2.0)


def test_out_of_domain_and_fd_margin():
    g = mf.poincare_disk()
    with pytest.raises(OutOfDomain):
        g.metric([0.95, 0.0])
    gf = g.with_fd(0.05)
    with pytest.raises(StepTooLarge):
        gf.partials([0.85, 0.0], 2)


def test_not_spd_callable():
    dom = mf.ChartDomain((0.0, 0.0), 1.0)
    bad = mf.MetricField.from_callable(lambda x: np.diag([1.0, -1.0]), 2, dom)
    with pytest.raises(NotSPD):
        bad.metric([0.0, 0.0])


def test_convex_sum_requires_same_chart():
    with pytest.raises(DimensionMismatch):
        mf.convex_sum(mf.flat(), mf.sphere(), 0.5)


def test_convex_sum_values():
    a, b = mf.flat(), mf.scaled_flat(4.0)
    g = mf.convex_sum(a, b, 0.25)
    assert np.allclose(g.metric([0.1, 0.1]), 1.75 * np.eye(2))
    assert mf.convex_sum(a, b, 0.0) is a


@pytest.mark.parametrize("label", mf.GALLERY_LABELS)
def test_fd_matches_analytic(label):
    g = mf.from_label(label)
    X = g.domain.sample(6, seed=3, fill=0.6)
    an = g.jet(X, 3)
    fd = g.with_fd().jet(X, 3)
    for k in (1, 2):
        scale = max(1.0, np.max(np.abs(an[k])))
        assert np.max(np.abs(an[k] - fd[k])) <= 1e-4 * scale


@given(seed=st.integers(0, 10_000), amp=st.floats(0.0, 0.9))
@settings(max_examples=20, deadline=None)
def test_polyrand_is_spd_on_chart(seed, amp):
    g = mf.polyrand(seed, amp)
    X = g.domain.sample(40, seed)
    lam = np.linalg.eigvalsh(g.values(X))
    assert lam.min() >= 1.0 - amp - 1e-12


def test_polyrand_smooth_at_origin():
    g = mf.polyrand(7, 0.05)
    assert np.all(np.isfinite(g.jet(np.zeros((1, 2)), 3)[3]))


def test_generalized_eigenvalues_and_quasi_isometry():
    lam = mf.generalized_eigenvalues(np.eye(2), np.diag([2.0, 0.5]))
    assert np.allclose(lam, [0.5, 2.0])
    X = mf.flat().domain.sample(5, 0)
    assert mf.quadratic_quasi_isometry_constant(mf.flat(), mf.scaled_flat(4.0), X) == 4.0


def test_periodic_wrap():
    g = mf.cylinder(1.0)
    d = g.domain.wrap(np.array([2 * np.pi - 0.1, 0.0]))
    assert d[0] == pytest.approx(-0.1)


def test_taylor_normal_metric_roundtrip():
    R = mf.constant_curvature_tensor(1.0, 2)
    mf.check_curvature_symmetries(R)
    g = mf.taylor_normal_metric(R)
    assert np.allclose(g.metric([0.0, 0.0]), np.eye(2))
    assert np.allclose(g.partials([0.0, 0.0], 1)[0], 0.0)


def test_from_label_rejects_unknown():
    with pytest.raises(ValueError):
        mf.from_label("torus:3")
