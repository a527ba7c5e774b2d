"""Manufacture warped (quasi) Yamabe gradient solitons.

On dr^2 + phi(r)^2 gbar with gbar of constant scalar curvature 6*kappa and a
radial potential f(r), the fiber block of the soliton equation forces
phi = f' exp(-f/m) (up to a constant absorbed into the fiber), and the radial
block is the scalar-curvature constraint R = lambda + f'' - f'^2/m. Together
they give a third-order ODE for f, integrated here by classical RK4 with
step-doubling error control.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from . import geometry as geo
from . import warped
from .soliton import SolitonData

CRITICAL_EPS = 1e-8
CSV_COLUMNS = ("r", "f", "f'", "f''", "phi", "phi'", "phi''")


class ProfileError(ValueError):
    pass


@dataclass(frozen=True)
class ProfileParams:
    lam: float
    m: float = math.inf
    kappa: float = 1.0

    @property
    def inv_m(self) -> float:
        return 0.0 if math.isinf(self.m) else 1.0 / self.m

    def __post_init__(self):
        if self.m == 0 or math.isnan(self.m):
            raise ProfileError("m must be non-zero or infinite")


def warp_from_state(f, fp, fpp, fppp, p: ProfileParams):
    """phi, phi', phi'' from (f, f', f'', f''') with phi = f' exp(-f/m)."""
    im = p.inv_m
    E = np.exp(-np.asarray(f) * im)
    phi = fp * E
    dphi = (fpp - im * fp**2) * E
    ddphi = (fppp - 3.0 * im * fp * fpp + im**2 * fp**3) * E
    return phi, dphi, ddphi


def profile_rhs(state, p: ProfileParams):
    """Third derivative of f implied by the soliton equation on the warped ansatz."""
    f, fp, fpp = (np.asarray(s, dtype=float) for s in state)
    if np.any(fp <= 0.0):
        raise ProfileError("f' <= 0: critical point of the potential")
    im = p.inv_m
    E = np.exp(-f * im)
    phi = fp * E
    dphi = (fpp - im * fp**2) * E
    ddphi = (p.kappa - dphi**2) / phi - phi * (p.lam + fpp - im * fp**2) / 6.0
    return ddphi / E + 3.0 * im * fp * fpp - im**2 * fp**3


def _deriv(y, p):
    return np.array([y[1], y[2], profile_rhs(y, p)])


def rk4_step(y, h, p):
    k1 = _deriv(y, p)
    k2 = _deriv(y + 0.5 * h * k1, p)
    k3 = _deriv(y + 0.5 * h * k2, p)
    k4 = _deriv(y + h * k3, p)
    return y + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0


# quintic Hermite basis on [0, 1]: rows are basis functions, columns powers t^0..t^5
_HERMITE = np.array([
    [1, 0, 0, -10, 15, -6],
    [0, 1, 0, -6, 8, -3],
    [0, 0, 0.5, -1.5, 1.5, -0.5],
    [0, 0, 0, 10, -15, 6],
    [0, 0, 0, -4, 7, -3],
    [0, 0, 0, 0.5, -1, 0.5],
], dtype=float)


def hermite5(r_nodes, y, dy, ddy, r):
    """Quintic Hermite interpolant and its first two derivatives at r."""
    r = np.asarray(r, dtype=float)
    i = np.clip(np.searchsorted(r_nodes, r, side="right") - 1, 0, len(r_nodes) - 2)
    h = r_nodes[i + 1] - r_nodes[i]
    t = (r - r_nodes[i]) / h
    data = np.stack([y[i], h * dy[i], h**2 * ddy[i], y[i + 1], h * dy[i + 1], h**2 * ddy[i + 1]], -1)
    coef = data @ _HERMITE  # (..., 6) polynomial coefficients in t
    powers = np.arange(6)
    tp = t[..., None] ** powers
    v = np.sum(coef * tp, -1)
    d1 = np.sum(coef[..., 1:] * powers[1:] * t[..., None] ** (powers[1:] - 1), -1) / h
    d2 = np.sum(coef[..., 2:] * (powers[2:] * (powers[2:] - 1)) * t[..., None] ** (powers[2:] - 2), -1) / h**2
    return v, d1, d2


@dataclass
class SolitonProfile:
    r: np.ndarray
    f: np.ndarray
    fp: np.ndarray
    fpp: np.ndarray
    params: ProfileParams
    tol: float | None = None
    step: float | None = None
    halted: str | None = None
    rejected_steps: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def fppp(self):
        return profile_rhs((self.f, self.fp, self.fpp), self.params)

    def warp(self):
        return warp_from_state(self.f, self.fp, self.fpp, self.fppp, self.params)

    @property
    def interval(self):
        return float(self.r[0]), float(self.r[-1])

    def state(self, r):
        """Interpolated (f, f', f'') at r; NaN outside the integrated range."""
        r = np.asarray(r, dtype=float)
        out = hermite5(self.r, self.f, self.fp, self.fpp, r)
        bad = (r < self.r[0]) | (r > self.r[-1])
        return tuple(np.where(bad, np.nan, x) for x in out)

    def potential_fn(self, r):
        return self.state(r)

    def warp_fn(self, r):
        f, fp, fpp = self.state(r)
        ok = np.isfinite(f) & (fp > 0)
        fppp = np.full_like(f, np.nan)
        if np.any(ok):
            fppp[ok] = profile_rhs((f[ok], fp[ok], fpp[ok]), self.params)
        return warp_from_state(f, fp, fpp, fppp, self.params)

    def functions(self) -> dict:
        """User functions ``F`` (potential) and ``phi`` (warp) for expressions."""
        return {"F": self.potential_fn, "phi": self.warp_fn}

    def to_csv(self, path) -> None:
        phi, dphi, ddphi = self.warp()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for row in zip(self.r, self.f, self.fp, self.fpp, phi, dphi, ddphi):
                w.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path, params: ProfileParams) -> "SolitonProfile":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or tuple(rows[0]) != CSV_COLUMNS:
            raise ProfileError(f"{path}: expected header {','.join(CSV_COLUMNS)}")
        data = np.array([[float(v) for v in row] for row in rows[1:]])
        if data.shape[0] < 2:
            raise ProfileError(f"{path}: need at least two profile rows")
        return cls(data[:, 0], data[:, 1], data[:, 2], data[:, 3], params, meta={"source": str(path)})


def _admissible(y, p):
    if not np.all(np.isfinite(y)):
        return "non-finite state"
    if y[1] <= CRITICAL_EPS:
        return "critical point: f' reached 0"
    if y[1] * math.exp(-y[0] * p.inv_m) <= CRITICAL_EPS:
        return "warping function reached 0"
    return None


def integrate_profile(init, params: ProfileParams, interval, tol: float | None = 1e-10,
                      step: float | None = None, max_steps: int = 100000) -> SolitonProfile:
    """Integrate (f, f', f'') from ``init`` across ``interval``.

    With ``tol`` set, steps are controlled by comparing one full RK4 step to
    two half steps (Richardson estimate |y_half - y_full| / 15). A step of
    length h is accepted when the estimate is below ``tol * h / L`` for an
    interval of length L, so each local error stays below ``tol`` and their
    sum stays near it. The two-half-step value is kept. With ``tol=None`` a fixed
    ``step`` is used. Integration halts at a critical point of f or a zero
    of the warp and returns the partial profile with ``halted`` set.
    """
    r0, r1 = (float(v) for v in interval)
    y = np.array(init, dtype=float)
    if y.shape != (3,):
        raise ProfileError("initial state is (f, f', f'')")
    reason = _admissible(y, params)
    if reason:
        raise ProfileError(f"inadmissible initial state: {reason}")
    rs, ys = [r0], [y.copy()]
    r = r0
    rejected = 0
    halted = None
    if tol is None:
        if not step or step <= 0:
            raise ProfileError("fixed-step integration needs step > 0")
        nsteps = max(1, int(round((r1 - r0) / step)))
        h = (r1 - r0) / nsteps
        for k in range(nsteps):
            try:
                y = rk4_step(y, h, params)
            except ProfileError as err:
                halted = str(err)
                break
            halted = _admissible(y, params)
            if halted:
                break
            r = r0 + (k + 1) * h
            rs.append(r)
            ys.append(y.copy())
    else:
        h = step or min(0.05, (r1 - r0) / 10)
        hmin = 1e-12 * max(1.0, abs(r1 - r0))
        for _ in range(max_steps):
            if r >= r1 - 1e-14 * max(1.0, abs(r1)):
                break
            h = min(h, r1 - r)
            try:
                full = rk4_step(y, h, params)
                mid = rk4_step(y, 0.5 * h, params)
                half = rk4_step(mid, 0.5 * h, params)
                err = float(np.max(np.abs(half - full))) / 15.0
            except ProfileError:
                err = math.inf
            if not math.isfinite(err):
                err = math.inf
            allowed = tol * min(1.0, h / (r1 - r0))
            if err <= allowed:
                for rr, yy in ((r + 0.5 * h, mid), (r + h, half)):
                    halted = _admissible(yy, params)
                    if halted:
                        break
                    rs.append(rr)
                    ys.append(yy.copy())
                if halted:
                    break
                r += h
                y = half
                grow = 2.0 if err == 0 else min(2.0, 0.9 * (allowed / err) ** 0.25)
                h *= max(grow, 1.0)
            else:
                rejected += 1
                h *= 0.5 if not math.isfinite(err) else max(0.1, 0.9 * (allowed / err) ** 0.25)
                if h < hmin:
                    halted = "step underflow"
                    break
        else:
            halted = "step budget exhausted"
    Y = np.array(ys)
    return SolitonProfile(np.array(rs), Y[:, 0], Y[:, 1], Y[:, 2], params, tol=tol, step=step,
                          halted=halted, rejected_steps=rejected, meta={"requested": (r0, r1)})


def fiber_for_profile(kind: str = "S3", kappa: float | None = None,
                      radius: float | None = None) -> warped.FiberSpec:
    """Fiber whose scalar curvature is 6 * kappa (``radius`` wins for S2xE1)."""
    kappa = 1.0 if kappa is None and radius is None else kappa
    if kind == "S2xE1":
        if radius is None:
            if kappa <= 0:
                raise ProfileError("S2xE1 fiber needs kappa > 0")
            radius = 1.0 / math.sqrt(3.0 * kappa)
        return warped.fiber(kind, radius=radius)
    if kind == "R3":
        if kappa not in (None, 0.0):
            raise ProfileError("R3 fiber is flat: kappa must be 0")
        return warped.fiber(kind)
    return warped.fiber(kind, kappa=kappa, radius=radius)


def assemble(profile: SolitonProfile, fiber_spec: warped.FiberSpec | None = None,
             name: str = "synthesized") -> tuple[warped.WarpedChart, SolitonData]:
    """Warped chart dr^2 + phi(r)^2 gbar and the soliton data carried by a profile."""
    if fiber_spec is None:
        fiber_spec = warped.fiber("S3", kappa=profile.params.kappa)
    if not math.isclose(fiber_spec.kappa_eff, profile.params.kappa, rel_tol=1e-12, abs_tol=1e-15):
        raise ProfileError(f"fiber scalar curvature {fiber_spec.scalar} does not match "
                           f"profile kappa {profile.params.kappa}")
    fns = profile.functions()
    coords = ("r",) + fiber_spec.chart.coords
    phi = ex.parse("phi(r)", coords, functions=fns)
    wchart = warped.build_warped(phi, fiber_spec, profile.interval, functions=fns, name=name)
    f = ex.parse("F(r)", coords, functions=fns)
    s = SolitonData(f, profile.params.lam, profile.params.m, True, name)
    return wchart, s


def random_inits(seed: int, count: int = 5, interval=(0.0, 1.0)):
    """Seeded admissible initial data that integrate across at least half the interval."""
    rng = np.random.default_rng(seed)
    out = []
    attempts = 0
    while len(out) < count:
        attempts += 1
        if attempts > 50 * count:
            raise ProfileError("could not draw admissible initial data")
        init = (rng.uniform(-0.2, 0.2), rng.uniform(0.6, 1.4), rng.uniform(-0.3, 0.3))
        m = [math.inf, 2.0, 3.0, -3.0][rng.integers(4)]
        params = ProfileParams(lam=rng.uniform(2.0, 8.0), m=m, kappa=1.0)
        prof = integrate_profile(init, params, interval)
        if prof.r[-1] - interval[0] >= 0.5 * (interval[1] - interval[0]):
            out.append((init, params, prof))
    return out


# ----------------------------------------------------------------- catalog

CATALOG = ("cylinder-shrinker", "flat-yamabe", "round-sphere-trivial", "quasi-cylinder",
           "fubini-study", "s2xs2")
SOLITON_ENTRIES = ("cylinder-shrinker", "flat-yamabe", "round-sphere-trivial", "quasi-cylinder")

_X = ("x1", "x2", "x3", "x4")


def _diag(n, entry):
    return [[entry if i == j else "0" for j in range(n)] for i in range(n)]


def flat_chart(name="flat"):
    return geo.Chart.from_strings(name, _X, [[-1.0, 1.0]] * 4, _diag(4, "1"))


def sphere_chart(name="round-sphere"):
    """Unit S^4 in stereographic coordinates."""
    return geo.Chart.from_strings(name, _X, [[-1.0, 1.0]] * 4,
                                  _diag(4, "4/(1 + x1^2 + x2^2 + x3^2 + x4^2)^2"))


def fubini_study_chart(name="fubini-study"):
    """CP^2 in the affine chart z1 = x1 + i y1, z2 = x2 + i y2 (Ric = 6 g)."""
    c = ("x1", "y1", "x2", "y2")
    rho = "(1 + x1^2 + y1^2 + x2^2 + y2^2)^2"
    a = f"(-(x1*x2 + y1*y2))/{rho}"
    b = f"(-(x1*y2 - x2*y1))/{rho}"
    d1 = f"(1 + x2^2 + y2^2)/{rho}"
    d2 = f"(1 + x1^2 + y1^2)/{rho}"
    g = [[d1, "0", a, b],
         ["0", d1, f"-({b})", a],
         [a, f"-({b})", d2, "0"],
         [b, a, "0", d2]]
    return geo.Chart.from_strings(name, c, [[-1.0, 1.0]] * 4, g)


def s2xs2_chart(name="s2xs2"):
    c = ("t1", "p1", "t2", "p2")
    lo, hi = 0.2, math.pi - 0.2
    g = [["1", "0", "0", "0"], ["0", "sin(t1)^2", "0", "0"],
         ["0", "0", "1", "0"], ["0", "0", "0", "sin(t2)^2"]]
    return geo.Chart.from_strings(name, c, [[lo, hi], [0, 2 * math.pi], [lo, hi], [0, 2 * math.pi]], g)


def catalog(name: str):
    """(Chart, SolitonData) for a named catalog entry."""
    if name == "cylinder-shrinker":
        w = warped.build_warped("1", warped.fiber("S3"), (0.0, 5.0), name=name)
        return w.chart, SolitonData(w.chart.parse("r"), 6.0, math.inf, True, name)
    if name == "quasi-cylinder":
        w = warped.build_warped("1", warped.fiber("S3"), (0.0, 1.0), name=name)
        return w.chart, SolitonData(w.chart.parse("-2*log(1 - r/2)"), 6.0, 2.0, True, name)
    if name == "flat-yamabe":
        ch = flat_chart(name)
        return ch, SolitonData(ch.parse("x1^2 + x2^2 + x3^2 + x4^2"), -2.0, math.inf, True, name)
    if name == "round-sphere-trivial":
        ch = sphere_chart(name)
        return ch, SolitonData(ch.parse("0"), 12.0, math.inf, True, name)
    if name == "fubini-study":
        ch = fubini_study_chart(name)
        return ch, SolitonData(ch.parse("x1"), 24.0, math.inf, False, name)
    if name == "s2xs2":
        ch = s2xs2_chart(name)
        return ch, SolitonData(ch.parse("t1"), 4.0, math.inf, False, name)
    raise KeyError(f"unknown catalog entry {name!r}; expected one of {CATALOG}")


def catalog_warped(name: str) -> warped.WarpedChart:
    """Warped view of the cylinder-type catalog entries."""
    if name == "cylinder-shrinker":
        return warped.build_warped("1", warped.fiber("S3"), (0.0, 5.0), name=name)
    if name == "quasi-cylinder":
        return warped.build_warped("1", warped.fiber("S3"), (0.0, 1.0), name=name)
    raise KeyError(f"{name!r} is not a warped catalog entry")


# profiles used by the suite: (label, init, params, fiber kind, interval)
SYNTH_PROFILES = (
    ("synth-yamabe", (0.0, 1.0, 0.3), ProfileParams(6.0, math.inf, 1.0), "S3", (0.0, 1.0)),
    ("synth-quasi", (0.0, 1.0, 0.2), ProfileParams(6.0, 2.0, 1.0), "S3", (0.0, 1.0)),
    ("synth-expander", (0.5, 1.0, 0.5), ProfileParams(-1.0, math.inf, 1.0), "S3", (1.0, 2.0)),
    ("synth-quasi-neg", (0.1, 0.8, -0.2), ProfileParams(4.0, -3.0, 1.0), "S3", (0.0, 1.0)),
    ("synth-s2xe1", (0.0, 1.0, 0.1), ProfileParams(2.0, math.inf, 1.0 / 3.0), "S2xE1", (0.0, 1.0)),
)


def synthesized(label: str):
    """Integrate and assemble one of the built-in synthesized solitons."""
    for lab, init, params, fiber_kind, interval in SYNTH_PROFILES:
        if lab == label:
            prof = integrate_profile(init, params, interval)
            wchart, s = assemble(prof, warped.fiber(fiber_kind), lab)
            return prof, wchart, s
    raise KeyError(f"unknown synthesized profile {label!r}")
