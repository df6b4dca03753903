import math

import numpy as np
import pytest

from tubegeom import bundle as bd
from tubegeom import chart as ch
from tubegeom import hermitian as hm
from tubegeom import scalar as sx
from tubegeom.errors import BadCase, MissingBaseACS, NotOrthonormal
from tubegeom.reports import list_manifolds


def get(name):
    entry = next(e for e in list_manifolds() if e["name"] == name)
    return ch.load_manifest(entry["path"])


def ortho_triple(m, p, rng, repeats=False):
    n = m.dim
    G = m.metric_at(p)
    cols = []
    raw = rng.standard_normal((n, 3))
    for c in range(3):
        v = raw[:, c]
        for w in cols:
            v = v - (v @ G @ w) * w
        v = v / math.sqrt(v @ G @ v)
        cols.append(v)
    if repeats:
        sel = rng.integers(0, 3, size=3)
        return tuple(cols[i] for i in sel)
    return tuple(cols)


def test_h_vanishes_for_kahler_flat():
    m = get("kahler_r6")
    rng = np.random.default_rng(0)
    for p in m.probe_points(6, seed=0):
        X, Y, Z = ortho_triple(m, p, rng)
        assert hm.second_fundamental_tensor(m, p, X, Y, Z) == pytest.approx(0.0, abs=1e-12)


def test_h_two_paths_agree():
    rng = np.random.default_rng(1)
    checked = 0
    for name in ("conformal_r6", "perturbed_r6", "sphere_fermi", "halfplane"):
        m = get(name)
        if m.acs is None:
            m = m.with_acs(ch.rotation_acs(m), name=m.name)
        for p in m.probe_points(25, seed=1):
            for _ in range(5):
                X, Y, Z = ortho_triple(m, p, rng, repeats=True)
                a = hm.second_fundamental_tensor(m, p, X, Y, Z, path="connection")
                b = hm.second_fundamental_tensor(m, p, X, Y, Z, path="conjugation")
                assert abs(a - b) <= 1e-9
                checked += 1
    assert checked >= 500


def test_h_tensoriality_via_components():
    m = get("conformal_r6")
    rng = np.random.default_rng(2)
    for p in m.probe_points(4, seed=2):
        H = hm.h_tensor_components(m, p)
        X, Y, Z = ortho_triple(m, p, rng)
        direct = hm.second_fundamental_tensor(m, p, X, Y, Z)
        contracted = float(np.einsum("abc,a,b,c->", H, X, Y, Z))
        assert direct == pytest.approx(contracted, abs=1e-12)


def test_h_unit_norm_enforced():
    m = get("kahler_r6")
    p = (0.0,) * 6
    X = np.zeros(6)
    X[0] = 2.0
    with pytest.raises(NotOrthonormal):
        hm.second_fundamental_tensor(m, p, X, X, X)


def test_h_requires_acs():
    m = get("euclidean2")
    with pytest.raises(MissingBaseACS):
        hm.second_fundamental_tensor(m, (0.0, 0.0), (1, 0), (1, 0), (0, 1))


def test_conformal_h_matches_u4_row():
    """Both sides of the U4 defining condition evaluated independently."""
    m = get("conformal_r6")
    rng = np.random.default_rng(3)
    nn = 3  # half the real dimension
    c4 = 1.0 / (2 * (nn - 1))
    for p in m.probe_points(5, seed=3):
        G = m.metric_at(p)
        J = m.acs_at(p)
        bv = hm.lee_form(m, p)
        X, Y, Z = ortho_triple(m, p, rng)
        lhs = hm.second_fundamental_tensor(m, p, X, Y, Z)
        rhs = c4 * ((X @ G @ Y) * (bv @ Z) - (X @ G @ Z) * (bv @ Y)
                    - (X @ G @ (J @ Y)) * (bv @ (J @ Z))
                    + (X @ G @ (J @ Z)) * (bv @ (J @ Y)))
        assert abs(lhs - rhs) <= 1e-6


def test_closed_forms_match_direct_oracle():
    """Central cross-oracle: closed case forms vs the direct bundle tensor."""
    rng = np.random.default_rng(4)
    for name in ("sphere_fermi", "halfplane"):
        base = get(name)
        B = bd.build_sasaki(base)
        baseJ = ch.rotation_acs(base)
        js = bd.build_bundle_acs(B, baseJ)
        for U in B.probe_points(25, seed=4):
            x = U[:2]
            E = ch.orthonormal_frame(base, x).frame
            idx = rng.integers(0, 2, size=3)
            sgn = rng.choice([-1.0, 1.0], size=3)
            X, Y, Z = (sgn[i] * E[:, idx[i]] for i in range(3))
            for case in range(1, 9):
                pat = hm.lift_pattern(case)
                W = [bd.lift(B, U, V, "horizontal" if c == "h" else "vertical")
                     for V, c in zip((X, Y, Z), pat)]
                for a in (1, 2):
                    closed = (hm.h1_closed_form(case, B, U, X, Y, Z) if a == 1
                              else hm.h2_closed_form(case, B, U, X, Y, Z, baseJ))
                    direct = hm.bundle_h_direct(B, js[a], U, *W, check=False)
                    assert abs(direct - closed) <= 1e-6, (name, a, case)


def test_case_fixture_unit_sphere():
    sph = get("sphere_fermi")
    B = bd.build_sasaki(sph)
    js = bd.build_bundle_acs(B, ch.rotation_acs(sph))
    U = (0.0, 0.0, 0.0, 0.1)
    e1, e2 = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    closed = hm.h1_closed_form(2, B, U, e1, e2, e1)
    W = [bd.lift(B, U, e1, "horizontal"), bd.lift(B, U, e2, "horizontal"),
         bd.lift(B, U, e1, "vertical")]
    direct = hm.bundle_h_direct(B, js[1], U, *W, check=False)
    # magnitude 1/4 * |g(R(e1,e2)e1, 0.1 e2)| = 0.025; the sign is negative in
    # the curvature orientation fixed by chart.curvature
    assert abs(direct) == pytest.approx(0.025, abs=1e-9)
    assert direct == pytest.approx(closed, abs=1e-9)
    assert direct == pytest.approx(-0.025, abs=1e-9)


def test_case5_is_minus_case4():
    sph = get("sphere_fermi")
    B = bd.build_sasaki(sph)
    rng = np.random.default_rng(5)
    for U in B.probe_points(5, seed=5):
        E = ch.orthonormal_frame(sph, U[:2]).frame
        X, Y, Z = E[:, 0], E[:, 1], E[:, 0]
        c4 = hm.h1_closed_form(4, B, U, X, Y, Z)
        c5 = hm.h1_closed_form(5, B, U, X, Y, Z)
        assert c5 == pytest.approx(-c4, abs=1e-12)


def test_case2_and_case3_share_the_formula():
    sph = get("sphere_fermi")
    B = bd.build_sasaki(sph)
    for U in B.probe_points(5, seed=6):
        E = ch.orthonormal_frame(sph, U[:2]).frame
        X, Y, Z = E[:, 0], E[:, 1], E[:, 1]
        assert hm.h1_closed_form(2, B, U, X, Y, Z) == pytest.approx(
            hm.h1_closed_form(3, B, U, X, Y, Z), abs=1e-12)


def test_flat_base_all_cases_zero():
    e2 = get("euclidean2")
    B = bd.build_sasaki(e2)
    baseJ = ch.rotation_acs(e2)
    js = bd.build_bundle_acs(B, baseJ)
    for U in B.probe_points(5, seed=7):
        for case in range(1, 9):
            pat = hm.lift_pattern(case)
            E = np.eye(2)
            W = [bd.lift(B, U, E[:, i % 2], "horizontal" if c == "h" else "vertical")
                 for i, c in enumerate(pat)]
            for a in (1, 2):
                assert hm.bundle_h_direct(B, js[a], U, *W, check=False) == pytest.approx(
                    0.0, abs=1e-12)


def test_h2_case1_equals_base_h_conformal():
    base = get("conformal_r6")
    B = bd.build_sasaki(base)
    rng = np.random.default_rng(8)
    for U in B.probe_points(4, seed=8):
        x = U[:6]
        X, Y, Z = ortho_triple(base, x, rng)
        want = hm.second_fundamental_tensor(base, x, X, Y, Z)
        got = hm.h2_closed_form(1, B, U, X, Y, Z)
        assert got == pytest.approx(want, abs=1e-12)
        got8 = hm.h2_closed_form(8, B, U, X, Y, Z)
        assert got8 == pytest.approx(want, abs=1e-12)


def test_vertical_triple_case6_zero():
    sph = get("sphere_fermi")
    B = bd.build_sasaki(sph)
    js = bd.build_bundle_acs(B, ch.rotation_acs(sph))
    for U in B.probe_points(4, seed=9):
        E = ch.orthonormal_frame(sph, U[:2]).frame
        W = [bd.lift(B, U, E[:, 0], "vertical"), bd.lift(B, U, E[:, 1], "vertical"),
             bd.lift(B, U, E[:, 0], "horizontal")]
        assert abs(hm.bundle_h_direct(B, js[1], U, *W, check=False)) <= 1e-7


def test_bad_case_rejected():
    sph = get("sphere_fermi")
    B = bd.build_sasaki(sph)
    with pytest.raises(BadCase):
        hm.h1_closed_form(9, B, (0, 0, 0, 0.1), (1, 0), (0, 1), (1, 0))


def fd_codifferential(m, p, W, step=1e-5):
    """delta Phi(W) via finite differences of the fundamental form and metric."""
    n = m.dim
    p = np.asarray(p, dtype=float)

    def phi(q):
        G = m.metric_at(tuple(q))
        J = m.acs_at(tuple(q))
        return (G.T @ J).T * 1.0  # Phi_ab = g(J e_a, e_b) = (J^T G)_ab

    def phi_ab(q):
        G = m.metric_at(tuple(q))
        J = m.acs_at(tuple(q))
        return J.T @ G

    dG = np.empty((n, n, n))
    dPhi = np.empty((n, n, n))
    for k in range(n):
        qp, qm = p.copy(), p.copy()
        qp[k] += step
        qm[k] -= step
        dG[k] = (m.metric_at(tuple(qp)) - m.metric_at(tuple(qm))) / (2 * step)
        dPhi[k] = (phi_ab(qp) - phi_ab(qm)) / (2 * step)
    G = m.metric_at(tuple(p))
    low = 0.5 * (np.transpose(dG, (2, 0, 1)) + np.transpose(dG, (2, 1, 0)) - dG)
    gam = np.linalg.solve(G, low.reshape(n, n * n)).reshape(n, n, n)
    Phi = phi_ab(p)
    # (nabla_i Phi)_ab = d_i Phi_ab - Gamma^l_ia Phi_lb - Gamma^l_ib Phi_al
    nphi = (dPhi - np.einsum("lia,lb->iab", gam, Phi)
            - np.einsum("lib,al->iab", gam, Phi))
    E = ch.orthonormal_frame(m, tuple(p)).frame
    out = 0.0
    for a in range(n):
        e = E[:, a]
        out -= float(np.einsum("iab,i,a,b->", nphi, e, e, W))
    return out


def test_lee_form_kahler_zero():
    m = get("kahler_r6")
    for p in m.probe_points(5, seed=10):
        assert np.max(np.abs(hm.lee_form(m, p))) <= 1e-12


def test_lee_form_conformal_value_and_fd_oracle():
    m = get("conformal_r6")
    p = (0.0,) * 6
    bv = hm.lee_form(m, p)
    # -(n-1) * d(lambda) with lambda = 0.3 x1 and n = 3
    assert bv[0] == pytest.approx(-0.6, abs=1e-10)
    assert np.max(np.abs(bv[1:])) <= 1e-10
    J = m.acs_at(p)
    rng = np.random.default_rng(11)
    for _ in range(4):
        X = rng.standard_normal(6)
        want = 0.5 * fd_codifferential(m, p, J @ X)
        assert hm.lee_form(m, p, X) == pytest.approx(want, abs=1e-6)


def test_lee_form_frame_independence():
    """The trace is frame independent: permuting the chart reorders the frame."""
    m = get("conformal_r6")
    p = (0.1, -0.2, 0.3, 0.0, 0.2, -0.1)
    bv = hm.lee_form(m, p)
    # rebuild the same structure with permuted coordinates and compare pulled back
    perm = [1, 0, 3, 2, 5, 4]
    upper = {}
    for i in range(6):
        for j in range(i, 6):
            a, b = sorted((perm[i], perm[j]))
            src = m.metric[a][b]
            upper[(i, j)] = sx.substitute(src, {k: sx.coord(perm.index(k)) for k in range(6)})
    acs = [[sx.substitute(m.acs[perm[i]][perm[j]],
                          {k: sx.coord(perm.index(k)) for k in range(6)})
            for j in range(6)] for i in range(6)]
    box = [m.box[perm[i]] for i in range(6)]
    m2 = ch.ChartManifold(6, upper, box, acs=acs, name="permuted")
    p2 = tuple(p[perm[i]] for i in range(6))
    bv2 = hm.lee_form(m2, p2)
    for a in range(6):
        assert bv[perm[a]] == pytest.approx(bv2[a], abs=1e-9)


def test_classifier_kahler_member_of_everything():
    m = get("kahler_r6")
    rep = hm.gh_classify(m, points=6, vectors=4, tol=1e-6, seed=0)
    assert all(rep.member(label) for label, _ in hm.CLASS_LABELS)
    assert rep.minimal_classes() == ["K"]
    assert rep.dim_valid


def test_classifier_conformal_is_u4():
    m = get("conformal_r6")
    rep = hm.gh_classify(m, points=8, vectors=5, tol=1e-6, seed=0)
    assert rep.minimal_classes() == ["U4"]
    for label in ("K", "U1", "U2", "U3"):
        assert not rep.member(label)
    for label in ("U4", "U1+U4", "U2+U4", "U3+U4", "U1+U2+U4", "U1+U3+U4",
                  "U2+U3+U4", "U"):
        assert rep.member(label)


def test_classifier_perturbed_only_generic():
    m = get("perturbed_r6")
    rep = hm.gh_classify(m, points=8, vectors=5, tol=1e-6, seed=0)
    assert rep.minimal_classes() == ["U"]
    assert all(not rep.member(label) for label, _ in hm.CLASS_LABELS if label != "U")


def test_classifier_lattice_monotonicity():
    sets = dict(hm.CLASS_LABELS)
    for name in ("kahler_r6", "conformal_r6", "perturbed_r6"):
        rep = hm.gh_classify(get(name), points=5, vectors=3, tol=1e-6, seed=1)
        for l1, s1 in hm.CLASS_LABELS:
            for l2, s2 in hm.CLASS_LABELS:
                if s1 <= s2 and rep.member(l1):
                    assert rep.member(l2), (name, l1, l2)


def test_classifier_dim2_flagged():
    m = get("sphere_fermi").with_acs(ch.rotation_acs(get("sphere_fermi")),
                                     name="sphere_fermi")
    rep = hm.gh_classify(m, points=4, vectors=3, tol=1e-6, seed=0)
    assert not rep.dim_valid
    assert rep.member("K")  # dimension-2 pairs are always Kaehler


def test_classifier_report_json_round_trip():
    rep = hm.gh_classify(get("conformal_r6"), points=4, vectors=3, tol=1e-6, seed=2)
    rep2 = hm.GHClassReport.from_json(rep.to_json())
    assert rep2.classes == rep.classes
    assert rep2.manifold == rep.manifold
    assert rep2.seed == rep.seed
