"""Warped products dr^2 + phi(r)^2 gbar over a small catalog of 3d fibers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import expr as ex
from . import geometry as geo
from .duality import orthonormal_frame_from_metric

FIBER_KINDS = ("S3", "R3", "H3", "S2xE1")


class WarpedError(ValueError):
    pass


@dataclass
class FiberSpec:
    kind: str
    chart: geo.Chart
    kappa: float          # sectional curvature for space forms, nan otherwise
    scalar: float         # constant scalar curvature of the fiber
    einstein: bool

    @property
    def kappa_eff(self) -> float:
        """Scalar curvature over 6: the constant entering the profile equation."""
        return self.scalar / 6.0


def fiber(kind: str, kappa: float | None = None, radius: float | None = None) -> FiberSpec:
    """Catalog fiber. ``S3``/``H3`` take ``kappa`` (or ``radius``), ``S2xE1`` takes ``radius``."""
    lo, hi = 0.2, math.pi - 0.2
    if kind == "S3":
        if kappa is None:
            kappa = 1.0 if radius is None else 1.0 / radius**2
        if kappa <= 0:
            raise WarpedError("S3 fiber needs kappa > 0")
        c = f"{1.0 / kappa!r}"
        g = [[c, "0", "0"],
             ["0", f"{c}*sin(a2)^2", "0"],
             ["0", "0", f"{c}*sin(a2)^2*sin(a3)^2"]]
        chart = geo.Chart.from_strings("S3", ("a2", "a3", "a4"), [[lo, hi], [lo, hi], [0.0, 2 * math.pi]], g)
        return FiberSpec("S3", chart, kappa, 6.0 * kappa, True)
    if kind == "R3":
        g = [["1" if i == j else "0" for j in range(3)] for i in range(3)]
        chart = geo.Chart.from_strings("R3", ("y2", "y3", "y4"), [[-1.0, 1.0]] * 3, g)
        return FiberSpec("R3", chart, 0.0, 0.0, True)
    if kind == "H3":
        if kappa is None:
            kappa = -1.0 if radius is None else -1.0 / radius**2
        if kappa >= 0:
            raise WarpedError("H3 fiber needs kappa < 0")
        conf = f"4/({-kappa!r}*(1 - y2^2 - y3^2 - y4^2)^2)"
        g = [[conf if i == j else "0" for j in range(3)] for i in range(3)]
        # box half-width 0.45 keeps the Poincare radius below 0.8
        chart = geo.Chart.from_strings("H3", ("y2", "y3", "y4"), [[-0.45, 0.45]] * 3, g)
        return FiberSpec("H3", chart, kappa, 6.0 * kappa, True)
    if kind == "S2xE1":
        radius = 1.0 if radius is None else float(radius)
        if radius <= 0:
            raise WarpedError("S2xE1 fiber needs radius > 0")
        c = f"{radius**2!r}"
        g = [[c, "0", "0"], ["0", f"{c}*sin(a2)^2", "0"], ["0", "0", "1"]]
        chart = geo.Chart.from_strings("S2xE1", ("a2", "a3", "z4"), [[lo, hi], [0.0, 2 * math.pi], [-1.0, 1.0]], g)
        return FiberSpec("S2xE1", chart, math.nan, 2.0 / radius**2, False)
    raise WarpedError(f"unknown fiber {kind!r}; expected one of {FIBER_KINDS}")


def validate_fiber(spec: FiberSpec, points) -> dict:
    """Einstein / non-Einstein and W = 0 checks of a fiber on sample points."""
    b = geo.curvature(spec.chart, points)
    gi = b.g_inv
    traceless = geo.orthonormal_norm(b.Ric - (b.R / 3.0)[..., None, None] * b.g, gi, 2)
    out = {
        "scalar_error": np.abs(b.R - spec.scalar),
        "traceless_ricci": traceless,
        "weyl": geo.orthonormal_norm(b.W, gi, 4),
    }
    if spec.einstein:
        out["einstein_error"] = geo.orthonormal_norm(b.Ric - 2.0 * spec.kappa * b.g, gi, 2)
    return out


@dataclass
class WarpedChart:
    interval: tuple
    phi: ex.Expr
    fiber: FiberSpec
    chart: geo.Chart

    def split(self, points):
        pts = np.asarray(points, dtype=float)
        return pts[..., 0], pts[..., 1:]


def build_warped(phi, fiber_spec: FiberSpec, interval, params=None, functions=None,
                 name: str | None = None, check_samples: int = 64) -> WarpedChart:
    """Assemble the 4d chart (r, fiber coords) with g_rr = 1, g_ra = 0, g_ab = phi^2 gbar_ab.

    ``phi`` is a string or an Expr in the variable ``r`` (it may call user
    functions supplied in ``functions``).
    """
    params = dict(params or {})
    functions = dict(functions or {})
    fc = fiber_spec.chart
    coords = ("r",) + fc.coords
    if isinstance(phi, str):
        phi_e = ex.parse(phi, coords, params, functions)
    else:
        phi_e = ex.rebind(phi, coords)
    extra = ex.free_names(phi_e) - {"r"} - set(params) - set(functions)
    if extra:
        raise WarpedError(f"warping function may depend on r only, found {sorted(extra)}")
    r0, r1 = (float(v) for v in interval)
    if not r0 < r1:
        raise WarpedError("empty base interval")
    sq = ex.BinOp("^", phi_e, ex.Num(2.0))
    zero, one = ex.Num(0.0), ex.Num(1.0)
    g = [[one, zero, zero, zero]]
    for a in range(3):
        row = [zero]
        for b in range(3):
            gb = fc.g[a][b]
            row.append(zero if gb == ex.Num(0.0) else ex.BinOp("*", sq, ex.rebind(gb, coords)))
        g.append(row)
    merged = {**fc.params, **params}
    chart = geo.Chart(name or f"warped-{fiber_spec.kind}", coords,
                      np.concatenate([[r0], fc.lo]), np.concatenate([[r1], fc.hi]),
                      g, merged, functions)
    rs = np.linspace(r0, r1, check_samples)
    probe = np.zeros((check_samples, 4))
    probe[:, 0] = rs
    probe[:, 1:] = 0.5 * (fc.lo + fc.hi)
    vals = ex.evaluate(phi_e, probe, merged, functions)
    if np.any(vals <= 0.0):
        raise WarpedError(f"warping function not positive at r = {rs[np.argmax(vals <= 0)]:.6g}")
    return WarpedChart((r0, r1), phi_e, fiber_spec, chart)


def fiber_frame(gbar) -> np.ndarray:
    return orthonormal_frame_from_metric(gbar)


@dataclass
class WarpedWeylResult:
    residual: np.ndarray    # Frobenius over a, b in coordinate components
    lhs: np.ndarray         # 2 W(d_r, theta_a, d_r, theta_b)
    rhs: np.ndarray         # (Rbar / 3) gbar_ab - Ricbar_ab
    lhs_frame: np.ndarray   # both sides in an orthonormal fiber frame
    rhs_frame: np.ndarray
    riem_norm: np.ndarray


def warped_weyl_identity(wchart: WarpedChart, points, backend="jet",
                         bundle: geo.CurvatureBundle | None = None) -> WarpedWeylResult:
    """Compare 2 W(dr, a, dr, b) against (Rbar/3) gbar_ab - Ricbar_ab at each point.

    Fiber curvature comes from the 3d pipeline at the fiber point, so the
    comparison exercises both pipelines independently.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    b = bundle if bundle is not None else geo.curvature(wchart.chart, pts, backend)
    fb = geo.curvature(wchart.fiber.chart, pts[:, 1:], backend)
    lhs = 2.0 * b.W[:, 0, 1:, 0, 1:]
    rhs = (fb.R / 3.0)[:, None, None] * fb.g - fb.Ric
    F = fiber_frame(fb.g)
    return WarpedWeylResult(
        residual=geo.tensor_norm(lhs - rhs, 2),
        lhs=lhs, rhs=rhs,
        lhs_frame=geo.to_frame(lhs, F, 2),
        rhs_frame=geo.to_frame(rhs, F, 2),
        riem_norm=geo.orthonormal_norm(b.Riem, b.g_inv, 4),
    )


def radial_jet(wchart: WarpedChart, r, e: ex.Expr):
    """(value, d/dr, d^2/dr^2) of an r-only expression at radii r."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    pts = np.zeros((r.size, 4))
    pts[:, 0] = r
    pts[:, 1:] = 0.5 * (wchart.chart.lo[1:] + wchart.chart.hi[1:])
    J = ex.eval_jet2(e, pts, wchart.chart.params, wchart.chart.functions)
    return J.value, J.grad[:, 0], J.hess[:, 0, 0]


def warped_ricci_oracle(wchart: WarpedChart, points) -> dict:
    """Closed-form Ricci of dr^2 + phi^2 gbar with a space-form fiber vs the engine."""
    if not wchart.fiber.einstein:
        raise WarpedError("closed-form Ricci needs a space-form fiber")
    pts = np.atleast_2d(points)
    b = geo.curvature(wchart.chart, pts)
    p, dp, ddp = radial_jet(wchart, pts[:, 0], wchart.phi)
    k = wchart.fiber.kappa
    rr = -3.0 * ddp / p
    fb = geo.curvature(wchart.fiber.chart, pts[:, 1:])
    ab = (2 * k - p * ddp - 2 * dp**2)[:, None, None] * fb.g
    return {
        "rr": np.abs(b.Ric[:, 0, 0] - rr) / (1 + np.abs(rr)),
        "mixed": np.max(np.abs(b.Ric[:, 0, 1:]), axis=-1),
        "fiber": geo.tensor_norm(b.Ric[:, 1:, 1:] - ab, 2) / (1 + geo.tensor_norm(ab, 2)),
    }


def levelset_constancy(wchart: WarpedChart, f: ex.Expr, c: float, count: int = 20,
                       seed: int = 0, backend="jet") -> float:
    """Relative spread of |grad f|^2 over fiber points of the level set f = c.

    ``f`` must depend on r only. The level radius is found by bracketing on
    the base interval; critical values are rejected.
    """
    if count < 20:
        raise WarpedError("level-set spread needs at least 20 fiber points")
    ch = wchart.chart
    r0, r1 = wchart.interval
    mid = 0.5 * (ch.lo[1:] + ch.hi[1:])

    def fval(r):
        return float(ex.evaluate(f, np.concatenate([[r], mid]), ch.params, ch.functions)) - c

    a, b_ = r0 + 1e-9 * (r1 - r0), r1 - 1e-9 * (r1 - r0)
    fa, fb = fval(a), fval(b_)
    if fa * fb > 0:
        raise WarpedError(f"level {c} not attained on the base interval")
    rc = brentq(fval, a, b_, xtol=1e-14, rtol=1e-15) if fa != 0 else a
    fiber_pts = wchart.fiber.chart.sample(count, seed)
    pts = np.column_stack([np.full(count, rc), fiber_pts])
    fj = geo.gradient(ch, pts, f, backend)
    if np.max(np.abs(fj.grad[:, 0])) <= 1e-10:
        raise WarpedError(f"{c} is a critical value of the potential")
    g, _, _ = geo.metric_jets(ch, pts, backend)
    gi = np.linalg.inv(g)
    sq = np.einsum("pi,pij,pj->p", fj.grad, gi, fj.grad)
    return float((sq.max() - sq.min()) / max(abs(sq.mean()), 1e-300))
