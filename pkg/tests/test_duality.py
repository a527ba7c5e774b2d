import numpy as np
import pytest

from soliton_forge import duality as du
from soliton_forge import geometry as geo
from soliton_forge import synthesize as sy


def jacobi_eigenvalues(A, tol=1e-15, sweeps=50):
    """Cyclic Jacobi rotations; reference eigensolver for symmetric matrices."""
    A = np.array(A, dtype=float)
    n = len(A)
    for _ in range(sweeps):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off <= tol * np.linalg.norm(A):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if A[p, q] == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2 * A[p, q])
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta**2 + 1)) if theta != 0 else 1.0
                c = 1 / np.sqrt(t**2 + 1)
                s = t * c
                J = np.eye(n)
                J[p, p] = J[q, q] = c
                J[p, q], J[q, p] = s, -s
                A = J.T @ A @ J
    return np.sort(np.diag(A))


def test_jacobi_oracle_itself():
    M = np.array([[4.0, 1, 2], [1, 3, 0], [2, 0, 1]])
    assert np.allclose(jacobi_eigenvalues(M), np.linalg.eigvalsh(M), atol=1e-13)


def test_hodge_star_anchor_and_involution():
    S = du.hodge_star()
    e12, e34 = du.PAIRS.index((0, 1)), du.PAIRS.index((2, 3))
    assert S[e34, e12] == 1 and np.count_nonzero(S[:, e12]) == 1
    assert np.array_equal(S @ S, np.eye(6, dtype=S.dtype))
    assert np.issubdtype(S.dtype, np.integer)


def test_pm_bases_are_eigenvectors():
    S = du.hodge_star()
    B = du.pm_basis()
    assert np.allclose(S @ B[:, :3], B[:, :3]) and np.allclose(S @ B[:, 3:], -B[:, 3:])
    assert np.allclose(B.T @ B, np.eye(6), atol=1e-15)
    Pp, Pm = du.projectors()
    assert np.array_equal(Pp @ Pp, Pp) and np.array_equal(Pm @ Pm, Pm)
    assert np.array_equal(Pp + Pm, np.eye(6)) and not np.any(Pp @ Pm)
    assert np.linalg.matrix_rank(Pp) == 3 and np.linalg.matrix_rank(Pm) == 3


def test_dual_pairs_and_signs():
    assert du.dual_pair(0, 1) == (2, 3)
    assert du.dual_pair(0, 2) == (3, 1)
    assert du.dual_pair(0, 3) == (1, 2)
    assert du.permutation_sign((1, 0, 2, 3)) == -1
    eps = du.levi_civita()
    assert eps[0, 1, 2, 3] == 1 and eps[1, 0, 2, 3] == -1


def test_orthonormal_frames_on_catalog():
    for name in sy.CATALOG:
        ch, _ = sy.catalog(name)
        pts = ch.sample(10, 1)
        F = du.orthonormal_frame(ch, pts)
        g = geo.metric_jets(ch, pts)[0]
        gram = np.einsum("pai,pij,pbj->pab", F.vectors, g, F.vectors)
        assert np.abs(gram - np.eye(4)).max() <= 1e-12, name
        assert np.all(np.linalg.det(F.vectors) * np.sqrt(np.linalg.det(g)) > 0), name


def test_euclidean_frame_is_identity():
    ch = sy.flat_chart()
    F = du.orthonormal_frame(ch, np.zeros(4))
    assert np.allclose(F.vectors, np.eye(4))


def test_weyl_operator_examples():
    sph = sy.sphere_chart()
    rep = du.analyse(sph, sph.sample(10, 2))
    assert np.abs(rep.M).max() <= 1e-8
    assert rep.wplus_norm.max() <= 1e-8 and rep.wminus_norm.max() <= 1e-8
    s22 = sy.s2xs2_chart()
    rep = du.analyse(s22, s22.sample(10, 3))
    S = du.hodge_star()
    comm = np.linalg.norm(rep.M @ S - S @ rep.M, axis=(-1, -2))
    assert np.all(comm <= 1e-8 * np.linalg.norm(rep.M, axis=(-1, -2)))
    assert np.abs(rep.M - np.swapaxes(rep.M, -1, -2)).max() <= 1e-10


def test_weyl_operator_rejects_non_curvature_tensors():
    T = np.random.default_rng(0).standard_normal((4, 4, 4, 4))
    with pytest.raises(du.DualityError):
        du.weyl_operator(T)


def test_plus_instance_and_routes_on_catalog():
    for name in sy.CATALOG:
        ch, _ = sy.catalog(name)
        rep = du.analyse(ch, ch.sample(20, 4))
        sp = rep.split
        inst = 0.5 * (rep.W_1234 + rep.W_1212)
        assert np.abs(sp.Wplus_1234 - inst).max() <= 1e-9, name
        assert np.abs(sp.Wplus_1234_block - inst).max() <= 1e-9, name
        assert sp.route_gap.max() <= 1e-9, name
        assert (sp.off_block / (1 + rep.W_norm)).max() <= 1e-8, name
        tr = np.trace(sp.Wplus, axis1=-2, axis2=-1) + np.trace(sp.Wminus, axis1=-2, axis2=-1)
        assert (np.abs(tr) / (1 + rep.W_norm)).max() <= 1e-8, name


def test_fubini_study_self_dual_and_orientation_swap():
    ch = sy.fubini_study_chart()
    pts = ch.sample(20, 5)
    rep = du.analyse(ch, pts)
    assert np.all(rep.wminus_norm <= 1e-6 * (1 + rep.wplus_norm))
    assert rep.wplus_norm.min() > 1.0
    assert np.all(du.is_self_dual(rep)) and not np.any(du.is_anti_self_dual(rep))
    rev = du.analyse(ch.with_orientation(-1), pts)
    assert np.allclose(rev.wminus_norm, rep.wplus_norm, rtol=1e-12)
    assert np.all(rev.wplus_norm <= 1e-6 * (1 + rev.wminus_norm))


def test_fubini_study_plus_spectrum():
    # Kahler-Einstein with R = 24: W+ has eigenvalues R/6, -R/12, -R/12
    ch = sy.fubini_study_chart()
    rep = du.analyse(ch, ch.sample(5, 6))
    ev = np.linalg.eigvalsh(rep.split.Wplus)
    assert np.abs(ev - np.array([-2.0, -2.0, 4.0])).max() <= 1e-9


def test_ricci_diagonal_frame():
    cyl = sy.catalog_warped("cylinder-shrinker").chart
    for ch in (cyl, sy.sphere_chart(), sy.fubini_study_chart(), sy.s2xs2_chart()):
        pts = ch.sample(10, 7)
        b = geo.curvature(ch, pts)
        F, mu = du.ricci_diagonal_frame_from(b, ch.orientation)
        Rf = geo.to_frame(b.Ric, F, 2)
        off = np.abs(Rf - np.einsum("pi,ij->pij", mu, np.eye(4))).max(axis=(-1, -2))
        assert np.all(off <= 1e-9 * (1 + np.linalg.norm(Rf, axis=(-1, -2))))
        assert np.all(np.linalg.det(F) * np.sqrt(np.linalg.det(b.g)) > 0)
        E = du.orthonormal_frame_from_metric(b.g)
        for p in range(len(pts)):
            ref = jacobi_eigenvalues(geo.to_frame(b.Ric[p], E[p], 2))
            assert np.abs(np.sort(mu[p]) - ref).max() <= 1e-9 * (1 + np.abs(ref).max())


def test_sphere_ricci_eigenvalues_degenerate():
    sph = sy.sphere_chart()
    F = du.ricci_diagonal_frame(sph, sph.sample(5, 8))
    b = geo.curvature(sph, sph.sample(5, 8))
    assert np.abs(np.diagonal(geo.to_frame(b.Ric, F.vectors, 2), axis1=-2, axis2=-1) - 3).max() <= 1e-8
