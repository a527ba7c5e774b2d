"""Per-point curvature pipeline on a coordinate chart.

Sign conventions (see docs/conventions.md):

    R^l_{ijk} = d_i G^l_{jk} - d_j G^l_{ik} + G^l_{im} G^m_{jk} - G^l_{jm} G^m_{ik}
    R_{ijkl}  = -g_{lm} R^m_{ijk}        (so R_{ijij} = +K on a space form)
    Ric_{jl}  = g^{ik} R_{ijkl},   R = g^{jl} Ric_{jl}

With these, the Ricci decomposition of R_{ijkl} used for the Weyl tensor
holds verbatim and the unit sphere has positive sectional curvature.

Every function accepts a single point ``(n,)`` or a batch ``(P, n)``;
outputs carry the same leading batch shape.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import expr as ex

BACKENDS = ("jet", "fd")


class GeometryError(ValueError):
    pass


class DegenerateMetricError(GeometryError):
    def __init__(self, chart_name, points):
        pts = np.atleast_2d(points)
        super().__init__(f"metric of {chart_name!r} is not positive definite at "
                         f"{len(pts)} point(s), first {pts[0].tolist()}")
        self.points = pts


@dataclass(eq=False)
class Chart:
    """Coordinate patch carrying metric component expressions."""

    name: str
    coords: tuple
    lo: np.ndarray
    hi: np.ndarray
    g: tuple  # n x n nested tuples of Expr
    params: Mapping[str, float] = field(default_factory=dict)
    functions: Mapping = field(default_factory=dict)
    orientation: int = 1

    def __post_init__(self):
        self.coords = tuple(self.coords)
        self.lo = np.asarray(self.lo, dtype=float)
        self.hi = np.asarray(self.hi, dtype=float)
        n = len(self.coords)
        if n not in (3, 4):
            raise GeometryError(f"dimension {n} unsupported (3 or 4)")
        if self.lo.shape != (n,) or self.hi.shape != (n,) or np.any(self.lo >= self.hi):
            raise GeometryError("domain must be n intervals [lo, hi] with lo < hi")
        if len(self.g) != n or any(len(row) != n for row in self.g):
            raise GeometryError(f"metric must be {n}x{n}")
        if self.orientation not in (1, -1):
            raise GeometryError("orientation must be +1 or -1")
        self.g = tuple(tuple(row) for row in self.g)
        self._asym = [(i, j) for i in range(n) for j in range(i + 1, n)
                      if self.g[i][j] != self.g[j][i]]

    @property
    def n(self) -> int:
        return len(self.coords)

    @classmethod
    def from_strings(cls, name, coords, domain, metric, params=None, functions=None,
                     orientation=1):
        params = dict(params or {})
        functions = dict(functions or {})
        g = [[ex.parse(str(s), coords, params, functions) for s in row] for row in metric]
        domain = np.asarray(domain, dtype=float)
        return cls(name, tuple(coords), domain[:, 0], domain[:, 1], g, params, functions,
                   orientation)

    def with_orientation(self, orientation):
        return Chart(self.name, self.coords, self.lo, self.hi, self.g, self.params,
                     self.functions, orientation)

    def parse(self, source: str) -> ex.Expr:
        return ex.parse(source, self.coords, self.params, self.functions)

    def sample(self, count: int, seed: int, margin: float = 0.05) -> np.ndarray:
        """Seeded uniform points inside the domain box shrunk by ``margin``."""
        rng = np.random.default_rng(seed)
        width = self.hi - self.lo
        return self.lo + margin * width + rng.random((count, self.n)) * (1 - 2 * margin) * width

    def contains(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return np.all((pts >= self.lo) & (pts <= self.hi), axis=-1)


def _check_metric_symmetry(chart, points):
    for i, j in chart._asym:
        a = ex.evaluate(chart.g[i][j], points, chart.params, chart.functions)
        b = ex.evaluate(chart.g[j][i], points, chart.params, chart.functions)
        if np.any(np.abs(a - b) > 1e-14 * (1 + np.abs(a))):
            raise GeometryError(f"metric of {chart.name!r} not symmetric in ({i},{j})")


def metric_jets(chart: Chart, points, backend: str = "jet", h=None):
    """Metric with first and second coordinate derivatives.

    Returns ``(g, dg, d2g)`` with ``dg[..., k, i, j] = d_k g_ij`` and
    ``d2g[..., k, l, i, j] = d_k d_l g_ij``.
    """
    pts = np.asarray(points, dtype=float)
    n = chart.n
    if pts.shape[-1] != n:
        raise GeometryError(f"point dimension {pts.shape[-1]} != chart dimension {n}")
    if np.any(~chart.contains(pts)):
        raise GeometryError(f"point outside the domain of {chart.name!r}")
    _check_metric_symmetry(chart, pts)
    batch = pts.shape[:-1]
    g = np.zeros(batch + (n, n))
    dg = np.zeros(batch + (n, n, n))
    d2g = np.zeros(batch + (n, n, n, n))
    if backend == "jet":
        def jet(e):
            return ex.eval_jet2(e, pts, chart.params, chart.functions)
    elif backend == "fd":
        stencil, combine = ex.fd_stencil(pts, h)
        if np.any(~chart.contains(stencil)):
            raise GeometryError(f"finite-difference stencil leaves the domain of {chart.name!r}")

        def jet(e):
            return combine(ex.evaluate(e, stencil, chart.params, chart.functions))
    else:
        raise GeometryError(f"unknown backend {backend!r}")
    for i in range(n):
        for j in range(i, n):
            J = jet(chart.g[i][j])
            for a, b in ((i, j), (j, i)):
                g[..., a, b] = J.value
                dg[..., :, a, b] = J.grad
                d2g[..., :, :, a, b] = J.hess
    return g, dg, d2g


def positive_definite(g) -> np.ndarray:
    """Boolean mask: Cholesky-style test via the smallest eigenvalue."""
    return np.linalg.eigvalsh(g)[..., 0] > 0.0


@dataclass
class CurvatureBundle:
    point: np.ndarray
    g: np.ndarray
    g_inv: np.ndarray
    Gamma: np.ndarray  # Gamma[..., k, i, j] = G^k_ij
    Riem: np.ndarray   # fully covariant R_ijkl
    Ric: np.ndarray
    R: np.ndarray
    W: np.ndarray
    dg: np.ndarray = field(repr=False, default=None)

    @property
    def n(self):
        return self.g.shape[-1]

    def index(self, k):
        """Bundle at the k-th point of a batch."""
        return CurvatureBundle(*(getattr(self, f)[k] for f in
                                 ("point", "g", "g_inv", "Gamma", "Riem", "Ric", "R", "W", "dg")))


def _christoffel_lowered(dg):
    # G_{l,ij} = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)
    t1 = np.einsum("...ijl->...lij", dg)  # d_i g_jl at [l, i, j]
    t2 = np.einsum("...jil->...lij", dg)  # d_j g_il at [l, i, j]
    return 0.5 * ((t1 + t2) - dg)


def christoffel_from_jets(g, dg):
    g_inv = np.linalg.inv(g)
    low = _christoffel_lowered(dg)
    G = np.einsum("...kl,...lij->...kij", g_inv, low)
    return g_inv, 0.5 * (G + np.swapaxes(G, -1, -2))


def _riemann_from_jets(g, dg, d2g):
    g_inv, G = christoffel_from_jets(g, dg)
    low = _christoffel_lowered(dg)
    # d_m G_{l,ij}
    dlow = 0.5 * ((np.einsum("...mijl->...mlij", d2g) + np.einsum("...mjil->...mlij", d2g))
                  - d2g)
    # d_m g^{kl} = -g^{ka} d_m g_ab g^{bl}
    dginv = -np.einsum("...ka,...mab,...bl->...mkl", g_inv, dg, g_inv)
    dG = (np.einsum("...mkl,...lij->...mkij", dginv, low)
          + np.einsum("...kl,...mlij->...mkij", g_inv, dlow))
    # T[i, j, k, l] = g_lm (d_i G^m_jk + G^m_ia G^a_jk);  R^m_ijk = T_i.. - T_j..
    T = np.einsum("...lm,...imjk->...ijkl", g, dG) \
        + np.einsum("...lm,...mia,...ajk->...ijkl", g, G, G)
    Riem = -(T - np.swapaxes(T, -4, -3))
    return g_inv, G, Riem


def weyl_from(g, Riem, Ric, R):
    """Weyl tensor from the Ricci decomposition of the curvature tensor."""
    n = g.shape[-1]
    Rs = np.asarray(R)[..., None, None, None, None]
    kn = (np.einsum("...ik,...jl->...ijkl", Ric, g) + np.einsum("...jl,...ik->...ijkl", Ric, g)
          - np.einsum("...il,...jk->...ijkl", Ric, g) - np.einsum("...jk,...il->...ijkl", Ric, g))
    gg = np.einsum("...jl,...ik->...ijkl", g, g) - np.einsum("...il,...jk->...ijkl", g, g)
    return Riem - kn / (n - 2) + Rs * gg / ((n - 1) * (n - 2))


def curvature(chart: Chart, points, backend: str = "jet", h=None) -> CurvatureBundle:
    """Full curvature bundle at one point or a batch of points."""
    pts = np.asarray(points, dtype=float)
    g, dg, d2g = metric_jets(chart, pts, backend, h)
    pd = positive_definite(g)
    if not np.all(pd):
        raise DegenerateMetricError(chart.name, pts[~pd] if pts.ndim > 1 else pts)
    g_inv, G, Riem = _riemann_from_jets(g, dg, d2g)
    Ric = np.einsum("...ik,...ijkl->...jl", g_inv, Riem)
    R = np.einsum("...jl,...jl->...", g_inv, Ric)
    W = weyl_from(g, Riem, Ric, R)
    return CurvatureBundle(pts, g, g_inv, G, Riem, Ric, R, W, dg)


def split_degenerate(chart: Chart, points, backend="jet"):
    """Partition points into (usable, rejected) by positive definiteness."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    g, _, _ = metric_jets(chart, pts, backend)
    pd = positive_definite(g)
    return pts[pd], pts[~pd]


def christoffel(chart: Chart, point, backend="jet") -> np.ndarray:
    g, dg, _ = metric_jets(chart, point, backend)
    if not np.all(positive_definite(g)):
        raise DegenerateMetricError(chart.name, point)
    return christoffel_from_jets(g, dg)[1]


def riemann(chart: Chart, point, backend="jet") -> np.ndarray:
    return curvature(chart, point, backend).Riem


def ricci_scalar(chart: Chart, point, backend="jet"):
    b = curvature(chart, point, backend)
    return b.Ric, b.R


def weyl(chart: Chart, point, backend="jet") -> np.ndarray:
    return curvature(chart, point, backend).W


def gradient(chart: Chart, point, f: ex.Expr, backend="jet"):
    """Coordinate jet (value, d_i f, d_i d_j f) of a potential."""
    if backend == "jet":
        return ex.eval_jet2(f, point, chart.params, chart.functions)
    return ex.eval_fd(f, point, None, chart.params, chart.functions)


def hessian_from(bundle: CurvatureBundle, fjet: ex.Jet2) -> np.ndarray:
    H = fjet.hess - np.einsum("...kij,...k->...ij", bundle.Gamma, fjet.grad)
    return 0.5 * (H + np.swapaxes(H, -1, -2))


def hessian(chart: Chart, point, f: ex.Expr, backend="jet") -> np.ndarray:
    """Covariant Hessian d_i d_j f - G^k_ij d_k f."""
    b = curvature(chart, point, backend)
    return hessian_from(b, gradient(chart, point, f, backend))


def sectional_from(bundle: CurvatureBundle, u, v) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    g = bundle.g
    uu = np.einsum("...i,...ij,...j->...", u, g, u)
    vv = np.einsum("...i,...ij,...j->...", v, g, v)
    uv = np.einsum("...i,...ij,...j->...", u, g, v)
    den = uu * vv - uv**2
    if np.any(den <= 1e-12 * uu * vv):
        raise GeometryError("degenerate plane: vectors are (nearly) parallel")
    num = np.einsum("...ijkl,...i,...j,...k,...l->...", bundle.Riem, u, v, u, v)
    return num / den


def sectional(chart: Chart, point, u: Sequence[float], v: Sequence[float], backend="jet"):
    """Sectional curvature of the plane spanned by u, v."""
    return sectional_from(curvature(chart, point, backend), u, v)


def tensor_norm(T, rank: int) -> np.ndarray:
    """Frobenius norm over the last ``rank`` axes."""
    T = np.asarray(T, dtype=float)
    return np.sqrt(np.sum(T**2, axis=tuple(range(-rank, 0))))


def to_frame(T, E, rank: int) -> np.ndarray:
    """Components of a covariant tensor in a frame whose rows are E[..., a, :]."""
    letters = "abcd"[:rank]
    idx = "ijkl"[:rank]
    spec = ",".join(f"...{a}{i}" for a, i in zip(letters, idx))
    return np.einsum(f"{spec},...{idx}->...{letters}", *([E] * rank), T)


def riemann_symmetry_residuals(bundle: CurvatureBundle) -> dict:
    """Residuals of the algebraic symmetries of R_ijkl, scaled by (1 + |Riem|)."""
    Rm = bundle.Riem
    scale = 1.0 + tensor_norm(Rm, 4)
    pair = np.maximum(tensor_norm(Rm + np.swapaxes(Rm, -4, -3), 4),
                      tensor_norm(Rm + np.swapaxes(Rm, -2, -1), 4))
    swap = tensor_norm(Rm - np.einsum("...ijkl->...klij", Rm), 4)
    bianchi = tensor_norm(Rm + np.einsum("...ijkl->...iklj", Rm)
                          + np.einsum("...ijkl->...iljk", Rm), 4)
    return {"antisymmetry": pair / scale, "pair_symmetry": swap / scale,
            "first_bianchi": bianchi / scale}


def weyl_trace_residual(bundle: CurvatureBundle) -> np.ndarray:
    """|g^{ik} W_ijkl| / (1 + |W|) per point."""
    tr = np.einsum("...ik,...ijkl->...jl", bundle.g_inv, bundle.W)
    return tensor_norm(tr, 2) / (1.0 + tensor_norm(bundle.W, 4))


def orthonormal_norm(T, g_inv, rank: int) -> np.ndarray:
    """Frame-invariant norm of a covariant tensor, sqrt(T_{i..} T^{i..})."""
    lower = "ijkl"[:rank]
    upper = "abcd"[:rank]
    spec = ",".join(f"...{a}{i}" for a, i in zip(upper, lower))
    raised = np.einsum(f"{spec},...{lower}->...{upper}", *([g_inv] * rank), T)
    return np.sqrt(np.maximum(np.einsum(f"...{upper},...{upper}->...", raised, T), 0.0))
