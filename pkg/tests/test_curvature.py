import numpy as np
import pytest

from tamegeom import curvature as cv
from tamegeom import metric_fields as mf


def test_half_plane_christoffels():
    G = cv.christoffel(mf.half_plane(), [0.0, 2.0])
    y = 2.0
    assert G[0, 0, 1] == pytest.approx(-1 / y)
    assert G[1, 0, 0] == pytest.approx(1 / y)
    assert G[1, 1, 1] == pytest.approx(-1 / y)


@pytest.mark.parametrize("label,K", [("sphere:1", 1.0), ("sphere:2", 0.25),
                                     ("poincare-disk", -1.0), ("half-plane", -1.0),
                                     ("flat", 0.0), ("cylinder:1", 0.0), ("scaled:4", 0.0)])
def test_constant_sectional_curvature(label, K):
    g = mf.from_label(label)
    for x in g.domain.sample(5, seed=1):
        assert cv.sectional(g, x, [1.0, 0.3], [-0.2, 1.0]) == pytest.approx(K, abs=1e-10)


def test_space_forms_are_parallel():
    for g in (mf.sphere(1.0), mf.poincare_disk()):
        DR, norm = cv.covariant_derivative_R(g, g.domain.sample(1, 2)[0])
        assert norm < 1e-9


def test_riemann_symmetries_polyrand():
    g = mf.polyrand(3, 0.5, dim=3)
    X = g.domain.sample(10, 0)
    geo = cv.geometry(g, X, with_derivative=True)
    d = cv.symmetry_defects(geo["riemann"])
    assert max(d.values()) < 1e-12
    assert cv.second_bianchi_defect(geo["covd_riemann"]) < 1e-10


def test_riemann_sign_convention_sphere():
    g = mf.sphere(1.0)
    x = [1.0, 0.0]
    R = cv.riemann(g, x)
    G = g.metric(x)
    # R(u, v, v, u) = K (|u|^2 |v|^2 - g(u, v)^2) with K = 1
    assert R[0, 1, 1, 0] == pytest.approx(G[0, 0] * G[1, 1])


def test_tensor_norm_frame_invariance():
    g = mf.polyrand(5, 0.4)
    X = g.domain.sample(4, 0)
    geo = cv.geometry(g, X)
    n1 = cv.tensor_norm(geo["riemann"], geo["g"], "llll")
    # scaling the metric by c scales |R|_{llll} by 1/c (R lowered scales by c)
    g2 = 4.0 * geo["g"]
    n2 = cv.tensor_norm(4.0 * geo["riemann"], g2, "llll")
    assert np.allclose(n2, n1 / 4.0)


def test_degenerate_plane():
    from tamegeom.errors import DegeneratePlane
    with pytest.raises(DegeneratePlane):
        cv.sectional(mf.flat(), [0.0, 0.0], [1.0, 0.0], [2.0, 0.0])


def test_fd_curvature_close_to_analytic():
    g = mf.polyrand(9, 0.5)
    X = g.domain.sample(8, 4)
    a = cv.geometry(g, X, with_derivative=True)
    f = cv.geometry(g.with_fd(), X, with_derivative=True)
    assert np.max(np.abs(a["riemann"] - f["riemann"])) < 1e-5
    assert np.max(np.abs(a["covd_riemann"] - f["covd_riemann"])) < 1e-3


def test_norm_estimate_and_samples():
    g = mf.sphere(1.0)
    X = g.domain.grid(5)
    est = cv.curvature_norm_estimate(g, X)
    assert est.sectional_min == pytest.approx(1.0) and est.sectional_max == pytest.approx(1.0)
    s = cv.curvature_sample(g, X[0])
    assert len(s.csv_row()) == len(s.csv_header(2))
    assert '"norms"' in s.to_json()


def test_taylor_metric_reproduces_curvature():
    for K in (1.0, -0.5):
        g = mf.taylor_normal_metric(mf.constant_curvature_tensor(K, 3))
        k = cv.sectional(g, [0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0])
        assert k == pytest.approx(K, abs=1e-12)
