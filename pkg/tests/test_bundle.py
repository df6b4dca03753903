import math

import numpy as np
import pytest

from tubegeom import bundle as bd
from tubegeom import chart as ch
from tubegeom import scalar as sx
from tubegeom.errors import MissingBaseACS
from tubegeom.reports import list_manifolds


def get(name):
    entry = next(e for e in list_manifolds() if e["name"] == name)
    return ch.load_manifest(entry["path"])


def eval_grid(grid, U):
    n = len(grid)
    return np.array([[sx.evaluate(grid[i][j], tuple(U)) for j in range(n)]
                     for i in range(n)])


def test_sasaki_flat_base_is_flat_metric():
    B = bd.build_sasaki(get("euclidean2"))
    for U in B.probe_points(8, seed=0):
        assert np.max(np.abs(B.chart.metric_at(U) - np.eye(4))) == 0.0


def test_sasaki_null_section_blocks():
    sph = get("sphere_fermi")
    B = bd.build_sasaki(sph)
    U0 = (0.3, 0.2, 0.0, 0.0)
    want = np.diag([math.cos(0.2) ** 2, 1.0, math.cos(0.2) ** 2, 1.0])
    assert np.max(np.abs(B.chart.metric_at(U0) - want)) <= 1e-15
    for p in sph.probe_points(10, seed=1):
        U = tuple(p) + (0.0, 0.0)
        G = B.chart.metric_at(U)
        gb = sph.metric_at(p)
        blocks = np.block([[gb, np.zeros((2, 2))], [np.zeros((2, 2)), gb]])
        assert np.max(np.abs(G - blocks)) <= 1e-10


def test_sasaki_mixed_entries_match_connection_terms():
    """g(dx_i, dv_m) must equal g_km Gamma^k_ij v^j with finite-difference Gamma."""
    hp = get("halfplane")
    B = bd.build_sasaki(hp)
    step = 1e-6
    for U in B.probe_points(10, seed=2):
        x, v = U[:2], np.array(U[2:])
        G = B.chart.metric_at(U)
        gb = hp.metric_at(x)
        dG = np.empty((2, 2, 2))
        for k in range(2):
            xp, xm = list(x), list(x)
            xp[k] += step
            xm[k] -= step
            dG[k] = (hp.metric_at(tuple(xp)) - hp.metric_at(tuple(xm))) / (2 * step)
        low = 0.5 * (np.transpose(dG, (2, 0, 1)) + np.transpose(dG, (2, 1, 0)) - dG)
        gam = np.linalg.solve(gb, low.reshape(2, 4)).reshape(2, 2, 2)
        A = np.einsum("kij,j->ki", gam, v)
        want = np.einsum("km,ki->im", gb, A)
        assert np.max(np.abs(G[:2, 2:] - want)) <= 1e-6


def test_reconstruction_identity():
    rng = np.random.default_rng(0)
    for name in ("euclidean2", "sphere_fermi", "halfplane"):
        m = get(name)
        B = bd.build_sasaki(m)
        n = m.dim
        for U in B.probe_points(30, seed=3):
            G = B.chart.metric_at(U)
            gb = m.metric_at(U[:n])
            for _ in range(3):
                W1 = rng.standard_normal(2 * n)
                W2 = rng.standard_normal(2 * n)
                lhs = W1 @ G @ W2
                rhs = (W1[:n] @ gb @ W2[:n]
                       + bd.connection_map(B, U, W1) @ gb @ bd.connection_map(B, U, W2))
                assert abs(lhs - rhs) <= 1e-9


def test_connection_map_and_lift_fixtures():
    e2 = get("euclidean2")
    B = bd.build_sasaki(e2)
    U = (0.3, -0.2, 0.5, 0.1)
    assert np.allclose(bd.connection_map(B, U, np.array([1.0, 2.0, 3.0, 4.0])),
                       [3.0, 4.0])
    assert np.allclose(bd.lift(B, U, (1.0, 0.0), "horizontal"), [1, 0, 0, 0])

    sph = get("sphere_fermi")
    Bs = bd.build_sasaki(sph)
    U2 = (0.0, 0.2, 1.0, 0.0)
    hl = bd.lift(Bs, U2, (1.0, 0.0), "horizontal")
    assert hl[2] == pytest.approx(0.0, abs=1e-15)
    assert hl[3] == pytest.approx(-math.cos(0.2) * math.sin(0.2), abs=1e-12)
    # defining equations of each lift kind
    assert np.max(np.abs(bd.connection_map(Bs, U2, hl))) <= 1e-12
    vl = bd.lift(Bs, U2, (0.0, 1.0), "vertical")
    assert np.allclose(bd.connection_map(Bs, U2, vl), [0.0, 1.0])
    assert np.allclose(vl[:2], 0.0)
    # lifts preserve the norm
    G = Bs.chart.metric_at(U2)
    gb = sph.metric_at(U2[:2])
    for kind in ("horizontal", "vertical"):
        W = bd.lift(Bs, U2, (0.7, -0.4), kind)
        assert W @ G @ W == pytest.approx(np.array([0.7, -0.4]) @ gb @ np.array([0.7, -0.4]),
                                          abs=1e-12)


def test_lift_frame_rank_and_gram():
    sph = get("sphere_fermi")
    B = bd.build_sasaki(sph)
    for U in B.probe_points(20, seed=4):
        LF = bd.lift_frame(B, U)
        G = B.chart.metric_at(U)
        assert np.max(np.abs(LF.matrix.T @ G @ LF.matrix - np.eye(4))) <= 1e-9
        assert np.linalg.matrix_rank(LF.matrix) == 4


def test_bundle_acs_flat_base_blocks():
    e2 = get("euclidean2")
    B = bd.build_sasaki(e2)
    js = bd.build_bundle_acs(B, ch.rotation_acs(e2))
    U = (0.1, 0.2, 0.3, -0.4)
    J1 = eval_grid(js[1], U)
    want = np.block([[np.zeros((2, 2)), -np.eye(2)], [np.eye(2), np.zeros((2, 2))]])
    assert np.max(np.abs(J1 - want)) == 0.0
    G = B.chart.metric_at(U)
    J3 = eval_grid(js[3], U)
    assert np.max(np.abs(J3 @ J3 + np.eye(4))) <= 1e-10
    assert np.max(np.abs(J3.T @ G @ J3 - G)) <= 1e-10


def test_bundle_acs_quaternion_relations_curved():
    sph = get("sphere_fermi")
    B = bd.build_sasaki(sph)
    js = bd.build_bundle_acs(B, ch.rotation_acs(sph))
    for U in B.probe_points(25, seed=5):
        G = B.chart.metric_at(U)
        J = {a: eval_grid(js[a], U) for a in (1, 2, 3)}
        I = np.eye(4)
        assert np.max(np.abs(J[1] @ J[2] - J[3])) <= 1e-9
        assert np.max(np.abs(J[2] @ J[3] - J[1])) <= 1e-9
        assert np.max(np.abs(J[3] @ J[1] - J[2])) <= 1e-9
        for a in (1, 2, 3):
            assert np.max(np.abs(J[a] @ J[a] + I)) <= 1e-10
            assert np.max(np.abs(J[a].T @ G @ J[a] - G)) <= 1e-10
        for a in (1, 2, 3):
            for b in (1, 2, 3):
                anti = J[a] @ J[b] + J[b] @ J[a] + (2.0 if a == b else 0.0) * I
                assert np.max(np.abs(anti)) <= 1e-9


def test_bundle_acs_requires_base_structure():
    B = bd.build_sasaki(get("sphere_fermi"))
    js = bd.build_bundle_acs(B, None)
    assert set(js) == {1}


def test_bracket_identities_coordinate_fields():
    sph = get("sphere_fermi")
    B = bd.build_sasaki(sph)
    one, zero = sx.const(1.0), sx.const(0.0)
    X, Y = (one, zero), (zero, one)
    for U in B.probe_points(10, seed=6):
        res = bd.check_bracket_identities(B, X, Y, U)
        assert res["max"] <= 1e-9


def test_bracket_identities_expression_fields():
    sph = get("sphere_fermi")
    B = bd.build_sasaki(sph)
    # genuinely non-commuting fields
    X = (sx.coord(1), sx.neg(sx.coord(0)))
    Y = (sx.const(1.0), sx.mul(sx.coord(0), sx.coord(1)))
    for U in B.probe_points(6, seed=7):
        res = bd.check_bracket_identities(B, X, Y, U)
        assert res["max"] <= 1e-9


def test_bracket_curvature_part_against_fd():
    """Finite-difference brackets reproduce the connection-map identity."""
    sph = get("sphere_fermi")
    B = bd.build_sasaki(sph)
    step = 1e-5

    def hlift_num(U, a):
        return bd.lift(B, U, np.eye(2)[a], "horizontal")

    for U in B.probe_points(8, seed=8):
        U = np.asarray(U)
        grad = np.empty((4, 4, 2))  # d(field_c)/d(coord_d) for both fields
        for fld in (0, 1):
            for d in range(4):
                Up, Um = U.copy(), U.copy()
                Up[d] += step
                Um[d] -= step
                grad[d, :, fld] = (hlift_num(tuple(Up), fld)
                                   - hlift_num(tuple(Um), fld)) / (2 * step)
        A = hlift_num(tuple(U), 0)
        Bv = hlift_num(tuple(U), 1)
        bracket = np.einsum("d,dc->c", A, grad[:, :, 1]) - np.einsum(
            "d,dc->c", Bv, grad[:, :, 0])
        R = ch.curvature(sph, tuple(U[:2]))
        v = U[2:]
        want = np.einsum("lkij,k,i,j->l", R, v, np.eye(2)[1], np.eye(2)[0])
        got = bd.connection_map(B, tuple(U), bracket)
        assert np.max(np.abs(got - want)) <= 1e-6
        assert np.max(np.abs(bracket[:2])) <= 1e-6  # projection part vanishes


def test_bundle_chart_exportable_as_manifest():
    sph = get("sphere_fermi")
    B = bd.build_sasaki(sph)
    d = ch.manifest_dict(B.chart)
    m2 = ch.load_manifest(__import__("json").dumps(d))
    for U in B.probe_points(5, seed=9):
        assert np.max(np.abs(m2.metric_at(U) - B.chart.metric_at(U))) <= 1e-15
