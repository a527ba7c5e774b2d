"""Bivectors in dimension four: Hodge star, the splitting of 2-forms into
self-dual and anti-self-dual parts, and the Weyl curvature operator.

Bivector basis order is fixed as ``[12, 13, 14, 23, 24, 34]`` (1-based frame
indices) and the volume form has ``eps_1234 = +1``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import geometry as geo

PAIRS = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
_PAIR_INDEX = {p: k for k, p in enumerate(PAIRS)}
SQRT2 = np.sqrt(2.0)


class DualityError(ValueError):
    pass


def permutation_sign(perm) -> int:
    perm = list(perm)
    sign = 1
    for i in range(len(perm)):
        for j in range(i + 1, len(perm)):
            if perm[i] > perm[j]:
                sign = -sign
    return sign


def levi_civita() -> np.ndarray:
    eps = np.zeros((4, 4, 4, 4))
    for p in itertools.permutations(range(4)):
        eps[p] = permutation_sign(p)
    return eps


def dual_pair(p: int, q: int) -> tuple[int, int]:
    """The ordered pair (pb, qb) with (pb, qb, p, q) an even permutation of (0, 1, 2, 3)."""
    if p == q:
        raise DualityError("dual of a degenerate pair")
    rest = [k for k in range(4) if k not in (p, q)]
    for a, b in (rest, rest[::-1]):
        if permutation_sign((a, b, p, q)) == 1:
            return a, b
    raise AssertionError("unreachable")


def _basis_vector(i, j) -> np.ndarray:
    v = np.zeros(6)
    if i < j:
        v[_PAIR_INDEX[(i, j)]] = 1.0
    else:
        v[_PAIR_INDEX[(j, i)]] = -1.0
    return v


def hodge_star() -> np.ndarray:
    """Matrix of * on the ordered bivector basis; column k is *(basis_k)."""
    eps = levi_civita()
    S = np.zeros((6, 6), dtype=int)
    for col, (i, j) in enumerate(PAIRS):
        for row, (k, l) in enumerate(PAIRS):
            S[row, col] = int(eps[i, j, k, l])
    return S


def pm_basis() -> np.ndarray:
    """6x6 orthogonal matrix; columns 0-2 span the self-dual forms, 3-5 the anti-self-dual.

    Self-dual:      (e12 + e34), (e13 + e42), (e32 + e41), each over sqrt 2.
    Anti-self-dual: (e12 - e34), (e13 - e42), (e32 - e41), each over sqrt 2.
    """
    e = _basis_vector
    plus = [e(0, 1) + e(2, 3), e(0, 2) + e(3, 1), e(2, 1) + e(3, 0)]
    minus = [e(0, 1) - e(2, 3), e(0, 2) - e(3, 1), e(2, 1) - e(3, 0)]
    return np.column_stack(plus + minus) / SQRT2


def projectors() -> tuple[np.ndarray, np.ndarray]:
    """P+ and P- = (Id +- *) / 2 on the ordered basis."""
    S = hodge_star().astype(float)
    I = np.eye(6)
    return 0.5 * (I + S), 0.5 * (I - S)


@dataclass
class Frame:
    """Orthonormal frame; rows of ``vectors`` are frame vectors in coordinate components."""

    vectors: np.ndarray
    orientation: int = 1

    def components(self, T, rank: int) -> np.ndarray:
        return geo.to_frame(T, self.vectors, rank)


def _oriented(E, g, orientation):
    det = np.linalg.det(E) * np.sqrt(np.linalg.det(g))
    flip = (np.sign(det) * orientation) < 0
    E = E.copy()
    E[flip, -1, :] *= -1.0
    return E


def orthonormal_frame_from_metric(g, orientation: int = 1) -> np.ndarray:
    """Gram-Schmidt on the coordinate basis; batch-aware, returns rows e_a."""
    g = np.asarray(g, dtype=float)
    batched = g.ndim == 3
    G = g if batched else g[None]
    P, n, _ = G.shape
    E = np.zeros((P, n, n))
    for a in range(n):
        v = np.zeros((P, n))
        v[:, a] = 1.0
        for b in range(a):
            proj = np.einsum("pi,pij,pj->p", v, G, E[:, b])
            v = v - proj[:, None] * E[:, b]
        norm2 = np.einsum("pi,pij,pj->p", v, G, v)
        if np.any(norm2 <= 1e-14 * np.abs(G[:, a, a])):
            raise DualityError("Gram-Schmidt breakdown: metric is nearly degenerate")
        E[:, a] = v / np.sqrt(norm2)[:, None]
    E = _oriented(E, G, orientation)
    return E if batched else E[0]


def orthonormal_frame(chart: geo.Chart, point) -> Frame:
    g, _, _ = geo.metric_jets(chart, point)
    return Frame(orthonormal_frame_from_metric(g, chart.orientation), chart.orientation)


def weyl_operator(W_frame: np.ndarray, tol: float = 1e-7) -> np.ndarray:
    """Bivector matrix M[(ij), (kl)] = W_ijkl over ordered pairs i<j, k<l.

    ``W_frame`` must be expressed in an orthonormal frame. Inputs that lack
    the algebraic curvature symmetries beyond ``tol`` (relative) are rejected.
    """
    W = np.asarray(W_frame, dtype=float)
    if W.shape[-4:] != (4, 4, 4, 4):
        raise DualityError("Weyl operator needs a 4-dimensional tensor")
    scale = 1.0 + geo.tensor_norm(W, 4)
    asym = geo.tensor_norm(W + np.swapaxes(W, -4, -3), 4) + geo.tensor_norm(W + np.swapaxes(W, -2, -1), 4)
    swap = geo.tensor_norm(W - np.einsum("...ijkl->...klij", W), 4)
    if np.any((asym + swap) > tol * scale):
        raise DualityError("tensor lacks curvature symmetries; not a Weyl tensor")
    return _pair_matrix(W)


@dataclass
class PMSplit:
    Wplus: np.ndarray
    Wminus: np.ndarray
    off_block: np.ndarray       # norm of the mixed blocks
    route_gap: np.ndarray       # block route vs componentwise route
    Wplus_1234: np.ndarray      # componentwise instance, frame indices 1234
    Wplus_1234_block: np.ndarray


def componentwise_plus(W: np.ndarray) -> np.ndarray:
    """W+_pqrs = (W_pqrs + W_{pb qb rs}) / 2 with (pb qb) the dual pair of (p q)."""
    Wp = np.zeros_like(W)
    for p in range(4):
        for q in range(4):
            if p == q:
                continue
            pb, qb = dual_pair(p, q)
            Wp[..., p, q, :, :] = 0.5 * (W[..., p, q, :, :] + W[..., pb, qb, :, :])
    return Wp


def project_pm(M: np.ndarray, W_frame: np.ndarray | None = None, tol: float = 1e-9,
               strict: bool = True) -> PMSplit:
    """Blocks of a bivector operator in the self-dual / anti-self-dual bases.

    When the frame tensor is supplied, W+ is also assembled componentwise
    from dual index pairs and both routes must agree to ``tol`` (relative).
    """
    B = pm_basis()
    Mpm = np.einsum("ai,...ab,bj->...ij", B, M, B)
    Wplus = Mpm[..., :3, :3]
    Wminus = Mpm[..., 3:, 3:]
    off = np.sqrt(np.sum(Mpm[..., :3, 3:]**2, axis=(-1, -2)) + np.sum(Mpm[..., 3:, :3]**2, axis=(-1, -2)))
    Bp = B[:, :3]
    block_full = np.einsum("ia,...ab,jb->...ij", Bp, Wplus, Bp)  # P+ M P+ on the ordered basis
    w1234_block = block_full[..., 0, 5]
    gap = np.zeros(M.shape[:-2])
    w1234 = np.full(M.shape[:-2], np.nan)
    if W_frame is not None:
        Wp = componentwise_plus(W_frame)
        comp = _pair_matrix(Wp)
        gap = np.sqrt(np.sum((comp - block_full)**2, axis=(-1, -2))) / (1.0 + np.sqrt(np.sum(M**2, axis=(-1, -2))))
        if strict and np.any(gap > tol):
            raise DualityError(f"self-dual part: routes disagree by {gap.max():.3e}")
        w1234 = Wp[..., 0, 1, 2, 3]
    return PMSplit(Wplus, Wminus, off, gap, w1234, w1234_block)


def _pair_matrix(W):
    M = np.zeros(W.shape[:-4] + (6, 6))
    for r, (i, j) in enumerate(PAIRS):
        for c, (k, l) in enumerate(PAIRS):
            M[..., r, c] = W[..., i, j, k, l]
    return M


def ricci_diagonal_frame_from(bundle: geo.CurvatureBundle, orientation: int = 1):
    """Frame diagonalising Ricci; returns (rows e_a, eigenvalues mu_a ascending)."""
    E = orthonormal_frame_from_metric(bundle.g, orientation)
    Ric = geo.to_frame(bundle.Ric, E, 2)
    Ric = 0.5 * (Ric + np.swapaxes(Ric, -1, -2))
    try:
        mu, V = np.linalg.eigh(Ric)
    except np.linalg.LinAlgError as err:
        raise DualityError(f"eigensolver failed: {err}") from err
    F = np.einsum("...ba,...bi->...ai", V, E)
    F = _oriented(F if F.ndim == 3 else F[None], bundle.g if bundle.g.ndim == 3 else bundle.g[None],
                  orientation)
    return (F if E.ndim == 3 else F[0]), mu


def ricci_diagonal_frame(chart: geo.Chart, point) -> Frame:
    b = geo.curvature(chart, point)
    F, _ = ricci_diagonal_frame_from(b, chart.orientation)
    return Frame(F, chart.orientation)


@dataclass
class DualityReport:
    frame: np.ndarray
    M: np.ndarray
    split: PMSplit
    W_frame: np.ndarray
    Riem_norm: np.ndarray
    W_norm: np.ndarray
    W_1234: np.ndarray
    W_1212: np.ndarray

    @property
    def wplus_norm(self):
        return np.sqrt(np.sum(self.split.Wplus**2, axis=(-1, -2)))

    @property
    def wminus_norm(self):
        return np.sqrt(np.sum(self.split.Wminus**2, axis=(-1, -2)))


def analyse(chart: geo.Chart, points, bundle: geo.CurvatureBundle | None = None) -> DualityReport:
    """Weyl operator, its self-dual/anti-self-dual blocks and related instances."""
    if chart.n != 4:
        raise DualityError("duality needs a 4-dimensional chart")
    b = bundle if bundle is not None else geo.curvature(chart, points)
    E = orthonormal_frame_from_metric(b.g, chart.orientation)
    Wf = geo.to_frame(b.W, E, 4)
    M = weyl_operator(Wf)
    split = project_pm(M, Wf, strict=False)
    return DualityReport(E, M, split, Wf, geo.orthonormal_norm(b.Riem, b.g_inv, 4),
                         geo.tensor_norm(Wf, 4), Wf[..., 0, 1, 2, 3], Wf[..., 0, 1, 0, 1])


def is_anti_self_dual(rep: DualityReport, tau: float = 1e-7) -> np.ndarray:
    return rep.wplus_norm <= tau * (1.0 + rep.Riem_norm)


def is_self_dual(rep: DualityReport, tau: float = 1e-7) -> np.ndarray:
    return rep.wminus_norm <= tau * (1.0 + rep.Riem_norm)
