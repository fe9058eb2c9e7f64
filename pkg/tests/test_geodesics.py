import numpy as np
import pytest

from tamegeom import geodesics as gd
from tamegeom import metric_fields as mf
from tamegeom.errors import LeftDomain, OutOfDomain, StepRejected


def test_flat_exp_map_is_translation():
    g = mf.flat()
    assert np.allclose(gd.exp_map(g, [0.1, 0.2], [0.3, -0.4]), [0.4, -0.2])


def test_scaled_flat_exp_map():
    g = mf.scaled_flat(4.0)
    # straight lines, parameterized by coordinates
    assert np.allclose(gd.exp_map(g, [0.0, 0.0], [0.5, 0.0]), [0.5, 0.0])


def test_sphere_equator_returns_after_full_turn():
    g = mf.sphere(1.0)
    tr = gd.integrate_geodesic(g, gd.GeodesicState.from_xv(g, [np.pi / 2, 0.0], [0.0, 1.0]),
                               2 * np.pi)
    assert not tr.left_domain
    assert np.allclose(g.domain.wrap(tr.x[-1] - tr.x[0]), 0.0, atol=1e-10)


@pytest.mark.parametrize("label", mf.GALLERY_LABELS)
def test_energy_drift(label):
    g = mf.from_label(label)
    for x in g.domain.sample(3, 5, fill=0.5):
        v = gd.unit_directions(g, x, 3)[0]
        tr = gd.integrate_geodesic(g, gd.GeodesicState.from_xv(g, x, v), 10.0)
        assert tr.relative_energy_drift() <= 1e-7


def test_leaving_the_chart():
    g = mf.flat()
    with pytest.raises(LeftDomain):
        gd.exp_map(g, [0.0, 0.0], [2.0, 0.0])
    tr = gd.integrate_geodesic(g, gd.GeodesicState.from_xv(g, [0.0, 0.0], [1.0, 0.0]), 5.0)
    assert tr.left_domain and tr.exit_time == pytest.approx(1.0, abs=0.02)
    with pytest.raises(OutOfDomain):
        gd.integrate_geodesic(g, gd.GeodesicState.from_xv(g, [0.0, 0.0], [1.0, 0.0]).__class__(
            np.array([2.0, 0.0]), np.array([1.0, 0.0]), 0.5), 1.0)


def test_step_guard():
    with pytest.raises(StepRejected):
        gd.flow(mf.flat(), [[0.0, 0.0]], [[1.0, 0.0]], 1.0, h=0.5)


def test_orthonormal_frame():
    g = mf.polyrand(4, 0.5)
    F = gd.Frame.orthonormal(g, [0.2, 0.1])
    assert F.defect(g) < 1e-12
    U = gd.unit_directions(g, [0.2, 0.1], 16)
    G = g.metric([0.2, 0.1])
    assert np.allclose(np.einsum("bi,ij,bj->b", U, G, U), 1.0)


def test_sphere_conjugate_radius_and_loop():
    g = mf.sphere(1.0)
    p = [np.pi / 2, 0.0]
    c = gd.jacobi_conjugate_radius(g, p, directions=32)
    assert c.value == pytest.approx(np.pi, rel=1e-3)
    est = gd.injectivity_radius_estimate(g, p, directions=32)
    assert est.lower_bound == pytest.approx(np.pi, rel=0.02)


def test_cylinder_loop_binds():
    est = gd.injectivity_radius_estimate(mf.cylinder(1.0), [0.0, 0.0], directions=32)
    assert est.conjugate_capped
    assert est.half_loop_length == pytest.approx(np.pi, rel=0.02)


def test_disk_and_flat_are_capped():
    disk = gd.injectivity_radius_estimate(mf.poincare_disk(), [0.0, 0.0], directions=32)
    assert disk.capped and disk.lower_bound == 5.0
    flat = gd.injectivity_radius_estimate(mf.flat(), [0.0, 0.0], r_max=10.0, directions=16)
    assert flat.capped and flat.lower_bound == 10.0
    assert flat.min_exit_radius == pytest.approx(1.0, abs=0.02)


def test_distances():
    assert gd.geodesic_distance(mf.flat(), [0.0, 0.0], [0.3, 0.4]) == pytest.approx(0.5)
    d = gd.geodesic_distance(mf.poincare_disk(), [0.0, 0.0], [0.5, 0.0])
    assert d == pytest.approx(np.log(3.0), rel=1e-6)


def test_psi_map_uses_frame():
    g = mf.scaled_flat(4.0)
    F = gd.Frame.orthonormal(g, [0.0, 0.0])
    assert np.allclose(gd.psi_map(g, [0.0, 0.0], F, [0.2, 0.0]), [0.1, 0.0])
