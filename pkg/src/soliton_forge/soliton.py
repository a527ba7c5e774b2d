"""Gradient (quasi) Yamabe soliton residuals and the D-tensor.

A triple (g, f, lambda, m) is a quasi Yamabe gradient soliton when

    Hess f - (1/m) df (x) df = (R - lambda) g,

and a gradient Yamabe soliton in the limit m = inf. The D-tensor is

    D_ijk = (Ric_jk f_i - Ric_ik f_j) / (n-2)
          + (Ric_il f^l g_jk - Ric_jl f^l g_ik) / ((n-1)(n-2))
          - R (g_jk f_i - g_ik f_j) / ((n-1)(n-2))

and on solitons it equals the contraction W_ijkl f^l.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import duality
from . import expr as ex
from . import geometry as geo

TAU_SOL = 1e-6
TRIVIAL_GRAD = 1e-12


class SolitonError(ValueError):
    pass


@dataclass
class SolitonData:
    """Potential, soliton constant and quasi constant (``math.inf`` for Yamabe)."""

    f: ex.Expr
    lam: float
    m: float = math.inf
    expect_soliton: bool = True
    label: str = ""

    def __post_init__(self):
        self.lam = float(self.lam)
        self.m = float(self.m)
        if self.m == 0.0 or math.isnan(self.m):
            raise SolitonError("quasi constant m must be non-zero (use inf for the Yamabe case)")

    @property
    def inv_m(self) -> float:
        return 0.0 if math.isinf(self.m) else 1.0 / self.m


def residual_from(bundle: geo.CurvatureBundle, fjet: ex.Jet2, s: SolitonData) -> np.ndarray:
    H = geo.hessian_from(bundle, fjet)
    df = fjet.grad
    R = np.asarray(bundle.R)[..., None, None]
    return H - s.inv_m * (df[..., :, None] * df[..., None, :]) - (R - s.lam) * bundle.g


def soliton_residual(chart: geo.Chart, point, s: SolitonData, backend="jet") -> np.ndarray:
    """res_ij = Hess_ij f - (1/m) f_i f_j - (R - lambda) g_ij in coordinates."""
    b = geo.curvature(chart, point, backend)
    return residual_from(b, geo.gradient(chart, point, s.f, backend), s)


def d_tensor_from(bundle: geo.CurvatureBundle, df: np.ndarray) -> np.ndarray:
    n = bundle.n
    g, Ric = bundle.g, bundle.Ric
    R = np.asarray(bundle.R)[..., None, None, None]
    ric_df = np.einsum("...il,...lm,...m->...i", Ric, bundle.g_inv, df)
    # A_ijk; D_ijk = A_ijk - A_jik keeps D exactly skew in (i, j)
    A = (np.einsum("...jk,...i->...ijk", Ric, df) / (n - 2)
         + np.einsum("...i,...jk->...ijk", ric_df, g) / ((n - 1) * (n - 2))
         - R * np.einsum("...jk,...i->...ijk", g, df) / ((n - 1) * (n - 2)))
    return A - np.swapaxes(A, -3, -2)


def d_tensor(chart: geo.Chart, point, s: SolitonData, backend="jet") -> np.ndarray:
    b = geo.curvature(chart, point, backend)
    return d_tensor_from(b, geo.gradient(chart, point, s.f, backend).grad)


def weyl_contraction(bundle: geo.CurvatureBundle, df: np.ndarray) -> np.ndarray:
    """W_ijkl g^{lm} d_m f."""
    return np.einsum("...ijkl,...lm,...m->...ijk", bundle.W, bundle.g_inv, df)


def d_traces(bundle: geo.CurvatureBundle, D: np.ndarray) -> np.ndarray:
    """Norms of the three traces g^{ij}D_ijk, g^{ik}D_ijk, g^{jk}D_ijk, stacked last."""
    gi = bundle.g_inv
    t = [np.einsum("...ij,...ijk->...k", gi, D),
         np.einsum("...ik,...ijk->...j", gi, D),
         np.einsum("...jk,...ijk->...i", gi, D)]
    return np.stack([geo.orthonormal_norm(x, gi, 1) for x in t], axis=-1)


@dataclass
class SolitonAnalysis:
    """Per-point results for one potential on one chart (arrays over points)."""

    points: np.ndarray
    residual: np.ndarray        # frame norm of the soliton residual
    riem_norm: np.ndarray
    grad_norm: np.ndarray
    hypothesis: np.ndarray      # residual <= tau_sol (1 + |Riem|)
    D: np.ndarray
    D_skew: np.ndarray          # max |D_ijk + D_jik|
    D_norm: np.ndarray
    D_traces: np.ndarray        # (P, 3)
    weyl_df: np.ndarray         # W(., ., ., grad f) norm
    d_weyl_gap: np.ndarray      # |D - W(., ., ., grad f)|
    chain: dict = field(default_factory=dict)

    @property
    def trivial(self) -> bool:
        return bool(np.all(self.grad_norm <= TRIVIAL_GRAD))


def chain_in_frame(D_frame: np.ndarray, WdF_frame: np.ndarray) -> dict:
    """Frame-component diagnostics of the half-flat argument.

    ``distinct``: max |D_ijk| over pairwise distinct i, j, k.
    ``dual_plus`` / ``dual_minus``: max |D_ijk +- D_{ib jb k}| over the three
    dual pairs (12|34), (13|42), (14|23).
    ``iji`` and ``iij``: max |D_iji| and |D_iij|.
    """
    idx = range(4)
    distinct = [(i, j, k) for i in idx for j in idx for k in idx if len({i, j, k}) == 3]
    dmax = np.max(np.abs(np.stack([D_frame[..., i, j, k] for i, j, k in distinct], -1)), -1)
    pairs = [((0, 1), (2, 3)), ((0, 2), (3, 1)), ((0, 3), (1, 2))]
    plus = []
    minus = []
    for (i, j), (a, b) in pairs:
        plus.append(np.abs(D_frame[..., i, j, :] + D_frame[..., a, b, :]))
        minus.append(np.abs(D_frame[..., i, j, :] - D_frame[..., a, b, :]))
    iji = np.max(np.abs(np.stack([D_frame[..., i, j, i] for i in idx for j in idx], -1)), -1)
    iij = np.max(np.abs(np.stack([D_frame[..., i, i, j] for i in idx for j in idx], -1)), -1)
    return {
        "distinct": dmax,
        "dual_plus": np.max(np.concatenate(plus, -1), -1),
        "dual_minus": np.max(np.concatenate(minus, -1), -1),
        "iji": iji,
        "iij": iij,
        "D_norm": geo.tensor_norm(D_frame, 3),
        "weyl_df": geo.tensor_norm(WdF_frame, 3),
    }


def analyse(chart: geo.Chart, points, s: SolitonData, backend="jet",
            tau_sol: float = TAU_SOL, bundle: geo.CurvatureBundle | None = None) -> SolitonAnalysis:
    """Residual, D-tensor identities and the D = W(grad f) comparison at points."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    b = bundle if bundle is not None else geo.curvature(chart, pts, backend)
    fj = geo.gradient(chart, pts, s.f, backend)
    res = residual_from(b, fj, s)
    gi = b.g_inv
    res_n = geo.orthonormal_norm(res, gi, 2)
    riem_n = geo.orthonormal_norm(b.Riem, gi, 4)
    D = d_tensor_from(b, fj.grad)
    WdF = weyl_contraction(b, fj.grad)
    skew = np.max(np.abs(D + np.swapaxes(D, -3, -2)), axis=(-1, -2, -3))
    analysis = SolitonAnalysis(
        points=pts,
        residual=res_n,
        riem_norm=riem_n,
        grad_norm=geo.orthonormal_norm(fj.grad, gi, 1),
        hypothesis=res_n <= tau_sol * (1.0 + riem_n),
        D=D,
        D_skew=skew,
        D_norm=geo.orthonormal_norm(D, gi, 3),
        D_traces=d_traces(b, D),
        weyl_df=geo.orthonormal_norm(WdF, gi, 3),
        d_weyl_gap=geo.orthonormal_norm(D - WdF, gi, 3),
    )
    if chart.n == 4:
        F, mu = duality.ricci_diagonal_frame_from(b, chart.orientation)
        analysis.chain = chain_in_frame(geo.to_frame(D, F, 3), geo.to_frame(WdF, F, 3))
        analysis.chain["ricci_offdiag"] = _offdiag(geo.to_frame(b.Ric, F, 2))
        analysis.chain["ricci_eigenvalues"] = mu
    return analysis


def _offdiag(M):
    n = M.shape[-1]
    mask = ~np.eye(n, dtype=bool)
    return np.max(np.abs(M[..., mask]), axis=-1)


def d_weyl_residual(chart: geo.Chart, point, s: SolitonData, backend="jet",
                    tau_sol: float = TAU_SOL):
    """|D - W(., ., ., grad f)| at each point and whether the soliton hypothesis held."""
    a = analyse(chart, point, s, backend, tau_sol)
    return a.d_weyl_gap, a.hypothesis


def halfflat_chain_check(chart: geo.Chart, point, s: SolitonData, backend="jet") -> dict:
    """Frame diagnostics of the half-flat argument in a Ricci-diagonal frame."""
    if chart.n != 4:
        raise SolitonError("the half-flat chain needs a 4-dimensional chart")
    return analyse(chart, point, s, backend).chain
