import json
import math

import numpy as np
import pytest

from tubegeom import chart as ch
from tubegeom import scalar as sx
from tubegeom.errors import DomainError, ManifestError, SingularMetric
from tubegeom.reports import list_manifolds


def get(name):
    entry = next(e for e in list_manifolds() if e["name"] == name)
    return ch.load_manifest(entry["path"])


def christoffel_fd(m, p, step=1e-5):
    """Finite-difference oracle for the lowered Christoffel system."""
    n = m.dim
    p = np.asarray(p, dtype=float)
    dG = np.empty((n, n, n))
    for k in range(n):
        pp, pm = p.copy(), p.copy()
        pp[k] += step
        pm[k] -= step
        dG[k] = (m.metric_at(tuple(pp)) - m.metric_at(tuple(pm))) / (2 * step)
    low = 0.5 * (np.transpose(dG, (2, 0, 1)) + np.transpose(dG, (2, 1, 0)) - dG)
    G = m.metric_at(tuple(p))
    return np.linalg.solve(G, low.reshape(n, n * n)).reshape(n, n, n)


def test_manifest_round_trip_bit_exact():
    for entry in list_manifolds():
        m = ch.load_manifest(entry["path"])
        d = ch.manifest_dict(m)
        m2 = ch.load_manifest(json.dumps(d))
        assert m2.dim == m.dim and m2.box == m.box
        assert m2.metric == m.metric
        assert (m2.acs is None) == (m.acs is None)
        if m.acs is not None:
            assert m2.acs == m.acs


def test_manifest_errors():
    with pytest.raises(ManifestError):
        ch.load_manifest("/nonexistent/path.json")
    with pytest.raises(ManifestError):
        ch.load_manifest({"dimension": 2, "domain": [[0, 1], [0, 1]]})


def test_christoffel_fixtures():
    e2 = get("euclidean2")
    assert np.max(np.abs(ch.christoffel(e2, (0.3, -0.4)))) == 0.0
    sph = get("sphere_fermi")
    G = ch.christoffel(sph, (0.3, 0.2))
    assert G[1, 0, 0] == pytest.approx(math.cos(0.2) * math.sin(0.2), abs=1e-12)
    assert G[0, 0, 1] == pytest.approx(-math.tan(0.2), abs=1e-12)
    assert np.max(np.abs(G - np.transpose(G, (0, 2, 1)))) == 0.0
    hp = get("halfplane")
    Gh = ch.christoffel(hp, (0.0, 2.0))
    assert Gh[0, 0, 1] == pytest.approx(-0.5, abs=1e-12)
    assert Gh[1, 0, 0] == pytest.approx(0.5, abs=1e-12)
    assert Gh[1, 1, 1] == pytest.approx(-0.5, abs=1e-12)


def test_christoffel_symbolic_vs_fd_all_builtins():
    for entry in list_manifolds():
        m = ch.load_manifest(entry["path"])
        for p in m.probe_points(12, seed=3):
            got = ch.christoffel(m, p)
            want = christoffel_fd(m, p)
            assert np.max(np.abs(got - want)) <= 1e-6, entry["name"]


def test_curvature_constant_metrics_flat():
    e4 = get("euclidean4")
    for p in e4.probe_points(5, seed=0):
        assert np.max(np.abs(ch.curvature(e4, p))) == 0.0


def constant_curvature_array(m, p, kappa):
    n = m.dim
    g = m.metric_at(p)
    R = np.zeros((n, n, n, n))
    for l in range(n):
        for k in range(n):
            for i in range(n):
                for j in range(n):
                    R[l, k, i, j] = kappa * (g[j, k] * (l == i) - g[i, k] * (l == j))
    return R


@pytest.mark.parametrize("name,kappa", [("sphere_fermi", 1.0), ("halfplane", -1.0)])
def test_curvature_constant_curvature_oracle(name, kappa):
    m = get(name)
    for p in m.probe_points(10, seed=1):
        R = ch.curvature(m, p)
        want = constant_curvature_array(m, p, kappa)
        assert np.max(np.abs(R - want)) <= 1e-8
        # antisymmetry in the last two slots and first Bianchi identity
        assert np.max(np.abs(R + np.transpose(R, (0, 1, 3, 2)))) <= 1e-9
        n = m.dim
        worst = 0.0
        for l in range(n):
            for k in range(n):
                for i in range(n):
                    for j in range(n):
                        worst = max(worst, abs(R[l, k, i, j] + R[l, i, j, k]
                                               + R[l, j, k, i]))
        assert worst <= 1e-9


def test_sectional_curvature_values():
    for name, kappa in (("sphere_fermi", 1.0), ("halfplane", -1.0)):
        m = get(name)
        for p in m.probe_points(6, seed=2):
            R = ch.curvature(m, p)
            E = ch.orthonormal_frame(m, p).frame
            g = m.metric_at(p)
            val = (g @ np.einsum("lkij,k,i,j->l", R, E[:, 1], E[:, 0], E[:, 1])) @ E[:, 0]
            assert val == pytest.approx(kappa, abs=1e-8)


def test_covariant_derivative_metric_compatibility():
    for entry in list_manifolds():
        m = ch.load_manifest(entry["path"])
        for p in m.probe_points(8, seed=4):
            out = ch.covariant_derivative(m, m.metric, p, valence="02")
            assert np.max(np.abs(out)) <= 1e-9, entry["name"]


def test_covariant_derivative_constant_acs_flat():
    e2 = get("euclidean2")
    J = ch.rotation_acs(e2)
    for p in e2.probe_points(5, seed=0):
        out = ch.covariant_derivative(e2, J, p, valence="11")
        assert np.max(np.abs(out)) == 0.0


def test_covariant_derivative_conformal_vs_fd():
    m = get("conformal_r6")
    step = 1e-6
    for p in m.probe_points(3, seed=5):
        out = ch.covariant_derivative(m, m.acs, p, valence="11")
        gam = ch.christoffel(m, p)
        J0 = m.acs_at(p)
        n = m.dim
        fd = np.empty((n, n, n))
        for i in range(n):
            pp = np.array(p)
            pm = np.array(p)
            pp[i] += step
            pm[i] -= step
            fd[i] = (m.acs_at(tuple(pp)) - m.acs_at(tuple(pm))) / (2 * step)
        want = fd + np.einsum("kil,lj->ikj", gam, J0) - np.einsum("lij,kl->ikj", gam, J0)
        assert np.max(np.abs(out - want)) <= 1e-6
        assert np.max(np.abs(out)) > 1e-3  # genuinely nonzero here


def test_geodesic_straight_line_euclidean():
    e2 = get("euclidean2")
    path = ch.integrate_geodesic(e2, (0.0, 0.0), (1.0, 0.0), 1.0, 64)
    assert path.complete
    assert np.max(np.abs(path.points[-1] - np.array([1.0, 0.0]))) <= 1e-12


def test_geodesic_equator_and_speed():
    sph = get("sphere_fermi")
    path = ch.integrate_geodesic(sph, (0.0, 0.0), (1.0, 0.0), math.pi / 2, 256)
    assert path.complete
    assert np.max(np.abs(path.points[-1] - np.array([math.pi / 2, 0.0]))) <= 1e-9
    s0 = 1.0
    drift = max(abs(v @ sph.metric_at(tuple(x)) @ v - s0)
                for x, v in zip(path.points, path.velocities))
    assert drift <= 1e-6


def test_geodesic_halfplane_vertical():
    hp = get("halfplane")
    path = ch.integrate_geodesic(hp, (0.0, 1.0), (0.0, 1.0), 1.0, 256)
    assert path.complete
    assert path.points[-1][1] == pytest.approx(math.e, abs=1e-8)
    assert abs(path.points[-1][0]) <= 1e-12


def test_geodesic_fourth_order_convergence():
    sph = get("sphere_fermi")
    p, v = (0.1, 0.25), (0.8, -0.3)
    ref = ch.integrate_geodesic(sph, p, v, 1.0, 4096).points[-1]
    e1 = np.max(np.abs(ch.integrate_geodesic(sph, p, v, 1.0, 64).points[-1] - ref))
    e2 = np.max(np.abs(ch.integrate_geodesic(sph, p, v, 1.0, 128).points[-1] - ref))
    assert e1 / e2 >= 8.0


def test_geodesic_domain_exit_truncates():
    e2 = get("euclidean2")
    path = ch.integrate_geodesic(e2, (1.0, 0.0), (1.0, 0.0), 2.0, 64)
    assert not path.complete
    assert path.points[-1][0] < 1.5


def test_orthonormal_frame():
    e2 = get("euclidean2")
    fp = ch.orthonormal_frame(e2, (0.2, 0.4))
    assert np.max(np.abs(fp.frame - np.eye(2))) == 0.0
    sph = get("sphere_fermi")
    fp = ch.orthonormal_frame(sph, (0.5, 0.3))
    want = np.diag([1.0 / math.cos(0.3), 1.0])
    assert np.max(np.abs(fp.frame - want)) <= 1e-12
    for entry in list_manifolds():
        m = ch.load_manifest(entry["path"])
        for p in m.probe_points(25, seed=7):
            E = ch.orthonormal_frame(m, p).frame
            G = m.metric_at(p)
            assert np.max(np.abs(E.T @ G @ E - np.eye(m.dim))) <= 1e-12


def test_probe_points_deterministic_and_inside():
    sph = get("sphere_fermi")
    a = sph.probe_points(50, seed=9)
    b = sph.probe_points(50, seed=9)
    assert a == b
    assert all(sph.contains(p) for p in a)
    c = sph.probe_points(50, seed=10)
    assert a != c


def test_verify_fermi_chart_sphere_equator():
    from tubegeom.tube import AdaptedTube
    sph = get("sphere_fermi")
    tube = AdaptedTube(chart=sph, k=1, epsilon=0.4)
    rep = ch.verify_fermi_chart(sph, tube, samples=6, steps=256)
    assert rep["max_deviation"] <= 1e-6


def test_verify_fermi_chart_euclidean():
    from tubegeom.tube import AdaptedTube
    e2 = get("euclidean2")
    tube = AdaptedTube(chart=e2, k=1, epsilon=0.4)
    rep = ch.verify_fermi_chart(e2, tube, samples=4, steps=64)
    assert rep["max_deviation"] <= 1e-12


def test_verify_fermi_chart_flags_halfplane():
    from tubegeom.tube import AdaptedTube
    hp = get("halfplane")
    tube = AdaptedTube(chart=hp, k=1, epsilon=0.5, center=(1.0,))
    rep = ch.verify_fermi_chart(hp, tube, samples=6, steps=256, t_max=0.5)
    assert rep["max_deviation"] >= 0.1  # chart is not adapted to this tube


def test_singular_metric_raises():
    g = {(0, 0): sx.coord(1), (1, 1): sx.const(1.0)}
    m = ch.ChartManifold(2, g, [(-1.0, 1.0), (-1.0, 1.0)], name="degenerate")
    with pytest.raises(SingularMetric):
        ch.christoffel(m, (0.0, -0.5))


def test_rotation_acs_compatibility():
    for name in ("euclidean2", "sphere_fermi", "halfplane"):
        m = get(name)
        J = ch.rotation_acs(m)
        for p in m.probe_points(10, seed=3):
            Jm = np.array([[sx.evaluate(J[i][j], p) for j in range(2)] for i in range(2)])
            G = m.metric_at(p)
            assert np.max(np.abs(Jm @ Jm + np.eye(2))) <= 1e-10
            assert np.max(np.abs(Jm.T @ G @ Jm - G)) <= 1e-10
