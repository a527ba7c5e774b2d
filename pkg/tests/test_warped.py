import math

import numpy as np
import pytest

from soliton_forge import expr as ex
from soliton_forge import geometry as geo
from soliton_forge import warped


@pytest.mark.parametrize("kind", warped.FIBER_KINDS)
def test_fiber_catalog_invariants(kind):
    fb = warped.fiber(kind)
    v = warped.validate_fiber(fb, fb.chart.sample(30, 0))
    assert v["scalar_error"].max() <= 1e-8
    assert v["weyl"].max() <= 1e-9
    if fb.einstein:
        assert v["einstein_error"].max() <= 1e-8
    else:
        assert v["traceless_ricci"].min() > 0.1


def test_fiber_parameters():
    assert warped.fiber("S3", kappa=4.0).scalar == 24.0
    assert warped.fiber("S3", radius=2.0).kappa == 0.25
    assert warped.fiber("H3", kappa=-2.0).scalar == -12.0
    assert warped.fiber("S2xE1", radius=2.0).scalar == 0.5
    for kind, kw in (("S3", {"kappa": -1.0}), ("H3", {"kappa": 1.0}), ("S2xE1", {"radius": -1.0}), ("T3", {})):
        with pytest.raises(warped.WarpedError):
            warped.fiber(kind, **kw)
    fb = warped.fiber("H3", kappa=-2.0)
    v = warped.validate_fiber(fb, fb.chart.sample(10, 1))
    assert v["einstein_error"].max() <= 1e-8


def test_block_structure_is_literal():
    w = warped.build_warped("cosh(r)", warped.fiber("H3"), (0, 1))
    g = w.chart.g
    assert g[0][0] == ex.Num(1.0)
    assert all(g[0][a] == ex.Num(0.0) and g[a][0] == ex.Num(0.0) for a in range(1, 4))


def test_build_rejects_bad_warp():
    with pytest.raises(warped.WarpedError):
        warped.build_warped("r - 1", warped.fiber("S3"), (0, 2))
    with pytest.raises(warped.WarpedError):
        warped.build_warped("1 + a2", warped.fiber("S3"), (0, 2))
    with pytest.raises(warped.WarpedError):
        warped.build_warped("1", warped.fiber("S3"), (1, 1))


def test_cylinder_and_cone():
    cyl = warped.build_warped("1", warped.fiber("S3"), (0, 5))
    assert np.abs(geo.curvature(cyl.chart, cyl.chart.sample(20, 2)).R - 6).max() <= 1e-8
    cone = warped.build_warped("r", warped.fiber("S3"), (0.5, 3))
    b = geo.curvature(cone.chart, cone.chart.sample(20, 3))
    assert geo.orthonormal_norm(b.Riem, b.g_inv, 4).max() <= 1e-8


def test_hyperbolic_space():
    w = warped.build_warped("cosh(r)", warped.fiber("H3"), (0, 1))
    pts = w.chart.sample(20, 4)
    b = geo.curvature(w.chart, pts)
    rng = np.random.default_rng(5)
    K = geo.sectional_from(b, rng.standard_normal((20, 4)), rng.standard_normal((20, 4)))
    assert np.abs(K + 1).max() <= 1e-7


@pytest.mark.parametrize("kind,phi", [("S3", "sin(r)"), ("R3", "cosh(r)"), ("H3", "exp(r/2)")])
def test_weyl_identity_space_forms(kind, phi):
    w = warped.build_warped(phi, warped.fiber(kind), (0.3, 1.5))
    res = warped.warped_weyl_identity(w, w.chart.sample(30, 6))
    assert res.residual.max() <= 1e-8
    assert np.abs(res.lhs).max() <= 1e-8 and np.abs(res.rhs).max() <= 1e-8


def test_weyl_identity_s2xe1_constant_warp():
    w = warped.build_warped("1", warped.fiber("S2xE1"), (0, 1))
    res = warped.warped_weyl_identity(w, w.chart.sample(30, 7))
    expected = np.diag([-1 / 3, -1 / 3, 2 / 3])
    assert np.abs(res.rhs_frame - expected).max() <= 1e-7
    assert np.abs(res.lhs_frame - expected).max() <= 1e-7


def test_weyl_identity_s2xe1_exponential_warp():
    w = warped.build_warped("exp(r)", warped.fiber("S2xE1"), (0, 1))
    res = warped.warped_weyl_identity(w, w.chart.sample(30, 8))
    assert np.all(res.residual <= 1e-6 * (1 + res.riem_norm))
    assert geo.tensor_norm(res.lhs_frame, 2).min() > 0.1
    assert geo.tensor_norm(res.rhs_frame, 2).min() > 0.1


def test_weyl_identity_s2xe1_radius():
    w = warped.build_warped("1 + r^2", warped.fiber("S2xE1", radius=2.0), (0, 1))
    res = warped.warped_weyl_identity(w, w.chart.sample(20, 9))
    assert np.abs(res.rhs_frame - np.diag([-1, -1, 2]) / 12).max() <= 1e-9
    assert np.all(res.residual <= 1e-6 * (1 + res.riem_norm))


@pytest.mark.parametrize("kind,phi", [("S3", "2 + sin(r)"), ("H3", "cosh(r)"), ("R3", "1 + r^2")])
def test_ricci_closed_form(kind, phi):
    w = warped.build_warped(phi, warped.fiber(kind), (0, 1))
    out = warped.warped_ricci_oracle(w, w.chart.sample(20, 10))
    assert max(v.max() for v in out.values()) <= 1e-7


def test_ricci_oracle_needs_space_form():
    w = warped.build_warped("1", warped.fiber("S2xE1"), (0, 1))
    with pytest.raises(warped.WarpedError):
        warped.warped_ricci_oracle(w, w.chart.sample(2, 0))


def test_levelset_constancy():
    cyl = warped.build_warped("1", warped.fiber("S3"), (0, 5))
    assert warped.levelset_constancy(cyl, cyl.chart.parse("r"), 1.0) <= 1e-10
    w = warped.build_warped("2 + sin(r)", warped.fiber("S3"), (0, 2))
    assert warped.levelset_constancy(w, w.chart.parse("exp(r) + r^2"), 3.0) <= 1e-10


def test_levelset_errors():
    cyl = warped.build_warped("1", warped.fiber("S3"), (0, 5))
    with pytest.raises(warped.WarpedError):
        warped.levelset_constancy(cyl, cyl.chart.parse("r"), 10.0)
    with pytest.raises(warped.WarpedError):
        warped.levelset_constancy(cyl, cyl.chart.parse("r"), 1.0, count=5)
    with pytest.raises(warped.WarpedError):
        warped.levelset_constancy(cyl, cyl.chart.parse("(r - 2)^2"), 0.0)


def test_radial_jet():
    w = warped.build_warped("cosh(r)", warped.fiber("H3"), (0, 1))
    v, d1, d2 = warped.radial_jet(w, np.array([0.2, 0.7]), w.phi)
    r = np.array([0.2, 0.7])
    assert np.allclose(v, np.cosh(r)) and np.allclose(d1, np.sinh(r)) and np.allclose(d2, np.cosh(r))
    assert math.isclose(w.interval[1], 1.0)
