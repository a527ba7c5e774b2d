"""Check suites: turn numerical results into report checks.

Each builder takes a loaded spec, sample points and tolerances and returns
a list of :class:`report.Check`. Curvature bundles are computed in chunks on
a thread pool; chunk boundaries do not depend on the worker count, so
results are identical however many workers run.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import duality as du
from . import expr as ex
from . import geometry as geo
from . import soliton as so
from . import synthesize as sy
from . import warped
from .report import check
from .specfile import LoadedSpec, Tolerances

CHUNK = 16
BUNDLE_FIELDS = ("point", "g", "g_inv", "Gamma", "Riem", "Ric", "R", "W", "dg")


def worker_count() -> int:
    env = os.environ.get("SOLITON_FORGE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return min(4, os.cpu_count() or 1)


def pooled_curvature(chart: geo.Chart, points, backend="jet") -> geo.CurvatureBundle:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    chunks = [pts[i:i + CHUNK] for i in range(0, len(pts), CHUNK)]
    workers = min(worker_count(), len(chunks))
    if workers <= 1:
        parts = [geo.curvature(chart, c, backend) for c in chunks]
    else:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda c: geo.curvature(chart, c, backend), chunks))
    return geo.CurvatureBundle(*(np.concatenate([getattr(p, f) for p in parts])
                                 for f in BUNDLE_FIELDS))


def _rel(a, b, rank):
    return geo.tensor_norm(a - b, rank) / (1.0 + geo.tensor_norm(a, rank))


# ----------------------------------------------------------------- curvature

def curvature_checks(spec: LoadedSpec, pts, tol: Tolerances, b: geo.CurvatureBundle,
                     seed: int = 0) -> list:
    sub = spec.name
    out = []
    sym = geo.riemann_symmetry_residuals(b)
    for key, anchor in (("antisymmetry", "Riemann antisymmetry"),
                        ("pair_symmetry", "Riemann pair symmetry"),
                        ("first_bianchi", "first Bianchi identity")):
        out.append(check(f"riemann {key}", anchor, sym[key], tol.riemann_symmetry, subject=sub))
    out.append(check("weyl trace-free", "Weyl tensor definition", geo.weyl_trace_residual(b),
                     tol.weyl_trace, subject=sub))
    gi = b.g_inv
    wn = geo.orthonormal_norm(b.W, gi, 4)
    if b.n == 3:
        out.append(check("weyl vanishes (3d)", "Weyl tensor in dimension 3", wn, tol.weyl_3d, subject=sub))
    exp = spec.expect
    if "scalar" in exp:
        out.append(check("scalar curvature", "closed form", np.abs(b.R - exp["scalar"]),
                         1e-8 * (1 + abs(exp["scalar"])), subject=sub))
    if "einstein" in exp:
        dev = geo.orthonormal_norm(b.Ric - exp["einstein"] * b.g, gi, 2)
        out.append(check("ricci = c g", "closed form", dev, 1e-8 * (1 + abs(exp["einstein"])), subject=sub))
    if exp.get("weyl_zero"):
        out.append(check("weyl vanishes", "conformally flat", wn, 1e-8, subject=sub))
    if "weyl_min" in exp:
        out.append(check("weyl nonzero", "not conformally flat", wn, exp["weyl_min"],
                         subject=sub, comparison=">"))
    K = _sectional_samples(b, seed)
    if "sectional" in exp:
        out.append(check("sectional curvature", "constant curvature", np.abs(K - exp["sectional"]),
                         1e-8 * (1 + abs(exp["sectional"])), subject=sub))
    out.append(check("sectional positivity", "sampled planes", K.min(axis=-1), 0.0, subject=sub,
                     comparison=">", diagnostic=True,
                     note="minimum over 6 random planes per point; informational"))
    return out


def _sectional_samples(b: geo.CurvatureBundle, seed: int, planes: int = 6) -> np.ndarray:
    rng = np.random.default_rng(seed + 1)
    P, n = b.g.shape[0], b.n
    K = np.empty((P, planes))
    for k in range(planes):
        u = rng.standard_normal((P, n))
        v = rng.standard_normal((P, n))
        K[:, k] = geo.sectional_from(b, u, v)
    return K


# ----------------------------------------------------------------- duality

def algebra_checks(subject="bivectors") -> list:
    """Point-independent checks of the Hodge star and its eigenspaces."""
    S = du.hodge_star().astype(float)
    Pp, Pm = du.projectors()
    I6 = np.eye(6)
    ranks = [np.linalg.matrix_rank(Pp), np.linalg.matrix_rank(Pm)]
    return [
        check("hodge star squares to identity", "Hodge star on 2-forms", np.abs(S @ S - I6).max(), 0.0,
              subject=subject),
        check("P+ and P- idempotent", "projections onto Lambda+-",
              max(np.abs(Pp @ Pp - Pp).max(), np.abs(Pm @ Pm - Pm).max()), 1e-15, subject=subject),
        check("P+ P- = 0, P+ + P- = I", "projections onto Lambda+-",
              max(np.abs(Pp @ Pm).max(), np.abs(Pp + Pm - I6).max()), 1e-15, subject=subject),
        check("dim Lambda+ = dim Lambda- = 3", "splitting of Lambda^2",
              abs(ranks[0] - 3) + abs(ranks[1] - 3), 0.0, subject=subject),
        check("star eigenvalues on Lambda+-", "splitting of Lambda^2",
              max(np.abs(S @ Pp - Pp).max(), np.abs(S @ Pm + Pm).max()), 1e-15, subject=subject),
    ]


def duality_checks(spec: LoadedSpec, pts, tol: Tolerances, b: geo.CurvatureBundle) -> list:
    sub = spec.name
    rep = du.analyse(spec.chart, pts, b)
    rev = du.analyse(spec.chart.with_orientation(-spec.chart.orientation), pts, b)
    scale = 1.0 + rep.W_norm
    sp = rep.split
    inst = 0.5 * (rep.W_1234 + rep.W_1212)
    out = [
        check("W+_1234 = (W_1234 + W_1212)/2", "self-dual part, componentwise",
              np.maximum(np.abs(sp.Wplus_1234 - inst), np.abs(sp.Wplus_1234_block - inst)),
              tol.duality_route, subject=sub),
        check("W+ routes agree", "block vs dual-pair assembly", sp.route_gap, tol.duality_route, subject=sub),
        check("weyl operator off-blocks", "W preserves Lambda+-", sp.off_block / scale,
              tol.duality_block, subject=sub),
        check("tr W+ = tr W- = 0", "trace-free blocks",
              np.maximum(np.abs(np.trace(sp.Wplus, axis1=-2, axis2=-1)),
                         np.abs(np.trace(sp.Wminus, axis1=-2, axis2=-1))) / scale,
              tol.duality_block, subject=sub),
        check("orientation reversal swaps W+-", "Hodge star changes sign",
              np.maximum(np.abs(rep.wplus_norm - rev.wminus_norm),
                         np.abs(rep.wminus_norm - rev.wplus_norm)) / scale,
              tol.duality_block, subject=sub),
    ]
    hf = spec.expect.get("half_flat")
    riem = 1.0 + rep.Riem_norm
    if hf in ("self-dual", "conformally-flat"):
        out.append(check("W- vanishes", "self-dual", rep.wminus_norm / (1 + rep.wplus_norm),
                         1e-6, subject=sub))
    if hf in ("anti-self-dual", "conformally-flat"):
        out.append(check("W+ vanishes", "anti-self-dual", rep.wplus_norm / (1 + rep.wminus_norm),
                         1e-6, subject=sub))
    out.append(check("half-flatness", "min(|W+|, |W-|) / (1 + |Riem|)",
                     np.minimum(rep.wplus_norm, rep.wminus_norm) / riem, tol.half_flat,
                     subject=sub, diagnostic=True,
                     note=f"ASD at {int(np.sum(du.is_anti_self_dual(rep, tol.half_flat)))}, "
                          f"SD at {int(np.sum(du.is_self_dual(rep, tol.half_flat)))} "
                          f"of {len(rep.W_norm)} points"))
    return out


def half_flat_kind(rep: du.DualityReport, tau: float) -> str | None:
    asd = bool(np.all(du.is_anti_self_dual(rep, tau)))
    sd = bool(np.all(du.is_self_dual(rep, tau)))
    if asd and sd:
        return "conformally-flat"
    if asd:
        return "anti-self-dual"
    if sd:
        return "self-dual"
    return None


# ----------------------------------------------------------------- soliton

def soliton_checks(spec: LoadedSpec, pts, tol: Tolerances, b: geo.CurvatureBundle,
                   backend="jet") -> list:
    sub = spec.name
    s = spec.soliton
    a = so.analyse(spec.chart, pts, s, backend, tol.soliton, bundle=b)
    scale = 1.0 + a.riem_norm
    out = []
    if s.expect_soliton:
        out.append(check("soliton residual", "soliton equation", a.residual / scale, tol.soliton, subject=sub))
    else:
        out.append(check("soliton residual", "soliton equation", a.residual / scale, tol.soliton,
                         subject=sub, diagnostic=True, note="flagged non-soliton; informational"))
    out.append(check("D skew in first pair", "D-tensor definition", a.D_skew, 0.0, subject=sub))
    out.append(check("D traces vanish", "D-tensor definition",
                     a.D_traces.max(axis=-1) / (1.0 + a.D_norm), tol.d_trace, subject=sub))
    held = a.hypothesis
    gap = a.d_weyl_gap / scale
    if np.all(held):
        out.append(check("D = W(grad f)", "soliton hypothesis holds", gap, tol.d_weyl, subject=sub))
    else:
        note = (f"hypothesis violated at {int(np.sum(~held))} of {len(held)} points, diagnostic; "
                "negative control expects a large residual")
        out.append(check("D = W(grad f)", "hypothesis violated", gap[~held], tol.negative_control,
                         subject=sub, diagnostic=True, comparison=">", note=note))
        if np.any(held):
            out.append(check("D = W(grad f) where hypothesis holds", "soliton hypothesis holds",
                             gap[held], tol.d_weyl, subject=sub))
    if spec.chart.n == 4:
        c = a.chain
        dscale = 1.0 + a.D_norm
        out.append(check("D_ijk = 0, distinct indices", "Ricci-diagonal frame", c["distinct"] / dscale,
                         tol.chain, subject=sub))
        out.append(check("ricci diagonal in frame", "Ricci-diagonal frame", c["ricci_offdiag"] / (
            1.0 + np.abs(c["ricci_eigenvalues"]).max(axis=-1)), tol.chain, subject=sub))
        kind = half_flat_kind(du.analyse(spec.chart, pts, b), tol.half_flat) if np.all(held) else None
        if kind in ("anti-self-dual", "conformally-flat"):
            out.append(check("D_ijk + D_(dual ij)k = 0", "anti-self-dual chain", c["dual_plus"] / dscale,
                             tol.chain, subject=sub))
        if kind in ("self-dual", "conformally-flat"):
            out.append(check("D_ijk - D_(dual ij)k = 0", "self-dual chain", c["dual_minus"] / dscale,
                             tol.chain, subject=sub))
        if kind is None:
            out.append(check("dual-pair sums of D", "half-flat chain",
                             np.minimum(c["dual_plus"], c["dual_minus"]) / dscale, tol.chain,
                             subject=sub, diagnostic=True,
                             note="neither half-flat nor a soliton everywhere; informational"))
    return out


# ----------------------------------------------------------------- warped

def warped_checks(spec: LoadedSpec, pts, tol: Tolerances, b: geo.CurvatureBundle,
                  backend="jet", seed: int = 0) -> list:
    sub = spec.name
    w = spec.wchart
    out = []
    res = warped.warped_weyl_identity(w, pts, backend, bundle=b)
    out.append(check("2 W(dr,a,dr,b) = (Rbar/3) gbar - Ricbar", "warped Weyl identity",
                     res.residual / (1.0 + res.riem_norm), tol.warped_identity, subject=sub))
    fb = w.fiber
    fv = warped.validate_fiber(fb, pts[:, 1:])
    out.append(check("fiber scalar curvature", "fiber catalog", fv["scalar_error"] / (1 + abs(fb.scalar)),
                     tol.fiber, subject=sub))
    out.append(check("fiber weyl vanishes", "Weyl tensor in dimension 3", fv["weyl"], tol.fiber, subject=sub))
    if fb.einstein:
        out.append(check("fiber einstein", "space form", fv["einstein_error"], tol.fiber, subject=sub))
        ric = warped.warped_ricci_oracle(w, pts)
        worst = np.maximum(np.maximum(ric["rr"], ric["mixed"]), ric["fiber"])
        out.append(check("ricci vs closed form", "warped product Ricci", worst, 1e-7, subject=sub))
    else:
        out.append(check("fiber not einstein", "designed non-Einstein fiber", fv["traceless_ricci"], 0.1,
                         subject=sub, comparison=">"))
        c = fb.scalar / 2.0   # S2 x E1 with radius rho: Ricbar = diag(1, 1, 0) / rho^2
        expected = np.diag([2.0 * c / 3.0 - c, 2.0 * c / 3.0 - c, 2.0 * c / 3.0])
        dev = geo.tensor_norm(res.lhs_frame - expected, 2)
        out.append(check("lhs = diag(-1/3, -1/3, 2/3) / rho^2", "warped Weyl identity, exact rhs",
                         dev, 1e-7, subject=sub))
    out.extend(levelset_checks(spec, tol, backend, seed))
    return out


def levelset_checks(spec: LoadedSpec, tol: Tolerances, backend="jet", seed: int = 0) -> list:
    s = spec.soliton
    if s is None:
        return []
    w = spec.wchart
    names = ex.free_names(s.f) - set(w.chart.functions) - set(w.chart.params)
    if not names <= {"r"} or "r" not in names:
        return []
    r0, r1 = w.interval
    spreads = []
    for t in (0.25, 0.5, 0.75):
        r = r0 + t * (r1 - r0)
        c = float(ex.evaluate(s.f, np.array([r] + list(0.5 * (w.chart.lo[1:] + w.chart.hi[1:]))),
                              w.chart.params, w.chart.functions))
        spreads.append(warped.levelset_constancy(w, s.f, c, 20, seed, backend))
    return [check("|grad f|^2 constant on level sets", "level sets of the potential", spreads,
                  tol.levelset, subject=spec.name, points=60)]


# ----------------------------------------------------------------- backends

def backend_checks(spec: LoadedSpec, pts, tol: Tolerances, b_jet: geo.CurvatureBundle) -> list:
    sub = spec.name
    b_fd = pooled_curvature(spec.chart, pts, "fd")
    dev = np.maximum(_rel(b_jet.Riem, b_fd.Riem, 4), _rel(b_jet.Gamma, b_fd.Gamma, 3))
    # On an interpolated profile the jets of the warp come from the ODE, while
    # finite differences see the third derivative of the quintic interpolant.
    interp = spec.profile is not None
    note = "interpolated profile: fd differentiates the interpolant; informational" if interp else ""
    out = [check("jet vs fd curvature", "backend agreement", dev, tol.backend, subject=sub,
                 diagnostic=interp, note=note)]
    if spec.soliton is not None:
        hj = geo.hessian_from(b_jet, geo.gradient(spec.chart, pts, spec.soliton.f, "jet"))
        hf = geo.hessian_from(b_fd, geo.gradient(spec.chart, pts, spec.soliton.f, "fd"))
        out.append(check("jet vs fd hessian of f", "backend agreement", _rel(hj, hf, 2),
                         tol.backend, subject=sub, diagnostic=interp, note=note))
    return out


# ----------------------------------------------------------------- synthesis

def profile_checks(label: str, prof: sy.SolitonProfile) -> list:
    E = np.exp(-prof.f * prof.params.inv_m)
    phi = prof.warp()[0]
    out = [
        check("phi = f' exp(-f/m)", "profile invariant", np.abs(phi - prof.fp * E), 1e-12, subject=label),
        check("f' > 0 and phi > 0", "no critical points", np.minimum(prof.fp, phi).min(), 0.0,
              subject=label, comparison=">"),
    ]
    r0, r1 = prof.meta.get("requested", prof.interval)
    out.append(check("profile reaches interval end", "integrator halting",
                     abs(prof.interval[1] - r1), 0.0, subject=label, diagnostic=True,
                     note=prof.halted or "complete"))
    return out


def integrator_order_check(steps=(0.1, 0.05, 0.025)) -> list:
    """Fixed-step RK4 error ratio under halving against the quasi-cylinder closed form."""
    p = sy.ProfileParams(6.0, 2.0, 1.0)
    errs = []
    for h in steps:
        prof = sy.integrate_profile((0.0, 1.0, 0.5), p, (0.0, 1.0), tol=None, step=h)
        exact = -2.0 * np.log(1.0 - prof.r / 2.0)
        errs.append(np.max(np.abs(prof.f - exact)))
    ratios = [errs[i] / errs[i + 1] for i in range(len(errs) - 1)]
    return [check("RK4 error ratio under step halving", "fourth-order convergence",
                  np.abs(np.array(ratios) - 16.0), 4.0, subject="integrator",
                  note="ratios " + ", ".join(f"{q:.2f}" for q in ratios))]


def closed_form_profile_checks() -> list:
    out = []
    p = sy.ProfileParams(6.0, math.inf, 1.0)
    prof = sy.integrate_profile((0.0, 1.0, 0.0), p, (0.0, 5.0))
    out.append(check("cylinder profile f = r", "closed form", np.abs(prof.f - prof.r), 1e-10,
                     subject="integrator"))
    p = sy.ProfileParams(6.0, 2.0, 1.0)
    prof = sy.integrate_profile((0.0, 1.0, 0.5), p, (0.0, 1.0))
    out.append(check("quasi-cylinder profile", "closed form",
                     np.abs(prof.f + 2.0 * np.log(1.0 - prof.r / 2.0)), 1e-9, subject="integrator"))
    return out
