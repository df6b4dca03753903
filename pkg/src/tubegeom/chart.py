"""Core Riemannian machinery on a single coordinate chart.

A ChartManifold is a box-shaped chart with a metric given as a symmetric grid
of symbolic expressions (and optionally an almost complex structure as a
(1,1) grid).  Christoffel symbols are obtained by evaluating exact symbolic
metric derivatives and solving the lowered-index linear system against the
metric matrix; curvature additionally uses exact second derivatives.  The
exponential map is realized only through classical 4th-order geodesic
integration.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from . import scalar as sx
from .errors import (DomainError, DomainExit, ManifestError, OutsideDomain,
                     SingularMetric)

__all__ = [
    "ChartManifold", "FramedPoint", "GeodesicPath",
    "christoffel", "curvature", "covariant_derivative", "integrate_geodesic",
    "orthonormal_frame", "verify_fermi_chart", "probe_points",
    "rotation_acs", "standard_block_acs", "symbolic_inverse",
    "load_manifest", "manifest_dict", "save_manifest",
]

_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53,
           59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113)


def _grid(entries):
    return tuple(tuple(row) for row in entries)


class ChartManifold:
    """Single-chart manifold: dimension, domain box, symbolic metric, optional ACS.

    The metric grid is symmetric by construction (the upper triangle is the
    source of truth; the lower triangle shares the same expression objects).
    """

    def __init__(self, dim, metric_upper, box, coords=None, acs=None, name=""):
        self.dim = int(dim)
        self.name = name
        if coords is None:
            coords = tuple(f"x{i + 1}" for i in range(dim))
        self.coords = tuple(coords)
        if len(self.coords) != dim:
            raise ManifestError("coordinate name count does not match dimension")
        self.box = tuple((float(lo), float(hi)) for lo, hi in box)
        if len(self.box) != dim:
            raise ManifestError("domain box length does not match dimension")
        full = [[None] * dim for _ in range(dim)]
        for (i, j), e in metric_upper.items():
            if not (0 <= i <= j < dim):
                raise ManifestError(f"bad metric index pair {(i, j)}")
            full[i][j] = e
            full[j][i] = e
        zero = sx.const(0.0)
        for i in range(dim):
            for j in range(dim):
                if full[i][j] is None:
                    full[i][j] = zero
        self.metric = _grid(full)
        self.acs = _grid(acs) if acs is not None else None
        self._d1 = None
        self._d2 = None
        self._ginv_sym = None
        self._gamma_sym = None

    # -- derived symbolic data (lazy, cached) --------------------------------

    def metric_d1(self):
        """d1[k][i][j] = ∂_k g_ij as expressions."""
        if self._d1 is None:
            n = self.dim
            g = self.metric
            self._d1 = tuple(
                _grid([[sx.differentiate(g[i][j], k) for j in range(n)]
                       for i in range(n)])
                for k in range(n))
        return self._d1

    def metric_d2(self):
        """d2[k][l][i][j] = ∂_k ∂_l g_ij as expressions."""
        if self._d2 is None:
            n = self.dim
            d1 = self.metric_d1()
            rows = []
            for k in range(n):
                rows.append(tuple(
                    _grid([[sx.differentiate(d1[k][i][j], l) for j in range(n)]
                           for i in range(n)])
                    for l in range(n)))
            self._d2 = tuple(rows)
        return self._d2

    def inverse_metric_symbolic(self):
        if self._ginv_sym is None:
            self._ginv_sym = symbolic_inverse(self.metric)
        return self._ginv_sym

    def christoffel_symbolic(self):
        """Γ^k_ij as expressions (k outermost), via the symbolic inverse metric."""
        if self._gamma_sym is None:
            n = self.dim
            d1 = self.metric_d1()
            ginv = self.inverse_metric_symbolic()
            low = [[[sx.add(sx.mul(0.5, d1[i][j][a]), sx.mul(0.5, d1[j][i][a]),
                            sx.mul(-0.5, d1[a][i][j]))
                     for j in range(n)] for i in range(n)] for a in range(n)]
            gam = []
            for k in range(n):
                gam.append(_grid([[sx.add(*[sx.mul(ginv[k][a], low[a][i][j])
                                            for a in range(n)])
                                   for j in range(n)] for i in range(n)]))
            self._gamma_sym = tuple(gam)
        return self._gamma_sym

    # -- numeric evaluation ----------------------------------------------------

    def contains(self, p):
        return all(lo < x < hi for x, (lo, hi) in zip(p, self.box))

    def metric_at(self, p):
        p = tuple(p)
        n = self.dim
        G = np.empty((n, n))
        for i in range(n):
            for j in range(i, n):
                G[i, j] = G[j, i] = sx.evaluate(self.metric[i][j], p)
        return G

    def acs_at(self, p):
        if self.acs is None:
            return None
        p = tuple(p)
        n = self.dim
        J = np.empty((n, n))
        for i in range(n):
            for j in range(n):
                J[i, j] = sx.evaluate(self.acs[i][j], p)
        return J

    def with_acs(self, acs_grid, name=None):
        """Copy of this chart carrying the given (1,1) grid as its ACS."""
        upper = {(i, j): self.metric[i][j]
                 for i in range(self.dim) for j in range(i, self.dim)}
        return ChartManifold(self.dim, upper, self.box, coords=self.coords,
                             acs=acs_grid, name=name or self.name)

    def probe_points(self, count, seed=0, margin=0.05):
        return probe_points(self.box, count, seed=seed, margin=margin)

    def validate(self, samples=25, seed=0, tol=1e-10):
        """Check the type invariants at probe points; raise InvariantViolation."""
        from .errors import InvariantViolation
        for p in self.probe_points(samples, seed=seed):
            try:
                G = self.metric_at(p)
                np.linalg.cholesky(G)
            except np.linalg.LinAlgError:
                raise InvariantViolation(
                    f"{self.name or 'chart'}: metric not positive definite at {p}")
            if self.acs is not None:
                J = self.acs_at(p)
                r1 = np.max(np.abs(J @ J + np.eye(self.dim)))
                r2 = np.max(np.abs(J.T @ G @ J - G))
                if r1 > tol or r2 > tol:
                    raise InvariantViolation(
                        f"{self.name or 'chart'}: ACS residuals {r1:.2e}/{r2:.2e} at {p}")
        return True

    def __repr__(self):
        acs = ", acs" if self.acs is not None else ""
        return f"ChartManifold({self.name or '?'}, dim={self.dim}{acs})"


@dataclass
class FramedPoint:
    """Point with a g-orthonormal frame (columns of ``frame``)."""
    point: tuple
    frame: np.ndarray


@dataclass
class GeodesicPath:
    times: np.ndarray
    points: np.ndarray
    velocities: np.ndarray
    complete: bool


# -- deterministic low-discrepancy probes ---------------------------------------

def probe_points(box, count, seed=0, margin=0.05):
    """Kronecker (additive recurrence) samples in the open box, seeded."""
    dim = len(box)
    if dim > len(_PRIMES) - 1:
        raise ValueError("box dimension too large for probe generator")
    alphas = [math.sqrt(_PRIMES[j]) % 1.0 for j in range(dim)]
    starts = [(math.sqrt(_PRIMES[j + 1]) * (seed + 1)) % 1.0 for j in range(dim)]
    pts = []
    for k in range(count):
        u = [(starts[j] + (k + 1) * alphas[j]) % 1.0 for j in range(dim)]
        pts.append(tuple(lo + (margin + (1 - 2 * margin) * u[j]) * (hi - lo)
                         for j, (lo, hi) in enumerate(box)))
    return pts


# -- core operations -------------------------------------------------------------

def _metric_derivative_arrays(m, p):
    n = m.dim
    d1 = m.metric_d1()
    dG = np.empty((n, n, n))
    for k in range(n):
        for i in range(n):
            for j in range(i, n):
                dG[k, i, j] = dG[k, j, i] = sx.evaluate(d1[k][i][j], p)
    return dG


def _lowered_christoffel(dG):
    # low[a, i, j] = (∂_i g_ja + ∂_j g_ia - ∂_a g_ij) / 2
    return 0.5 * (np.transpose(dG, (2, 0, 1)) + np.transpose(dG, (2, 1, 0)) - dG)


def christoffel(m, p):
    """Γ^k_ij at p as an (n, n, n) array indexed [k, i, j]."""
    p = tuple(p)
    G = m.metric_at(p)
    try:
        np.linalg.cholesky(G)
    except np.linalg.LinAlgError as ex:
        raise SingularMetric(f"metric not positive definite at {p}") from ex
    dG = _metric_derivative_arrays(m, p)
    low = _lowered_christoffel(dG)
    n = m.dim
    return np.linalg.solve(G, low.reshape(n, n * n)).reshape(n, n, n)


def curvature(m, p):
    """R^l_kij at p as an (n, n, n, n) array; R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_[X,Y] Z."""
    p = tuple(p)
    n = m.dim
    G = m.metric_at(p)
    try:
        np.linalg.cholesky(G)
    except np.linalg.LinAlgError as ex:
        raise SingularMetric(f"metric not positive definite at {p}") from ex
    ginv = np.linalg.inv(G)
    dG = _metric_derivative_arrays(m, p)
    d2 = m.metric_d2()
    d2G = np.empty((n, n, n, n))
    for k in range(n):
        for l in range(k, n):
            for i in range(n):
                for j in range(i, n):
                    v = sx.evaluate(d2[k][l][i][j], p)
                    d2G[k, l, i, j] = d2G[k, l, j, i] = v
                    d2G[l, k, i, j] = d2G[l, k, j, i] = v
    low = _lowered_christoffel(dG)
    gamma = np.einsum("ka,aij->kij", ginv, low)
    dginv = -np.einsum("ka,mab,bl->mkl", ginv, dG, ginv)
    # dlow[m, a, i, j] = ∂_m low[a, i, j]; d2G[m, k, i, j] = ∂_m ∂_k g_ij
    dlow = 0.5 * (np.transpose(d2G, (0, 3, 1, 2)) + np.transpose(d2G, (0, 3, 2, 1))
                  - d2G)
    dgamma = (np.einsum("mka,aij->mkij", dginv, low)
              + np.einsum("ka,maij->mkij", ginv, dlow))
    # R[l,k,i,j] = ∂_i Γ^l_jk − ∂_j Γ^l_ik + Γ^l_im Γ^m_jk − Γ^l_jm Γ^m_ik
    term_d = np.einsum("iljk->lkij", dgamma) - np.einsum("jlik->lkij", dgamma)
    term_g = (np.einsum("lim,mjk->lkij", gamma, gamma)
              - np.einsum("ljm,mik->lkij", gamma, gamma))
    return term_d + term_g


_GRID_DERIV_CACHE = {}


def _grid_derivatives(grid, n):
    """d[i][a][b] = ∂_i grid[a][b], cached per grid object."""
    key = id(grid)
    hit = _GRID_DERIV_CACHE.get(key)
    if hit is not None and hit[0] is grid:
        return hit[1]
    d = tuple(_grid([[sx.differentiate(grid[a][b], i) for b in range(n)]
                     for a in range(n)]) for i in range(n))
    _GRID_DERIV_CACHE[key] = (grid, d)
    return d


def covariant_derivative(m, tensor, p, valence="11"):
    """Covariant derivative of a (1,1) or (0,2) expression grid at p.

    Returns an (n, n, n) array: for valence "11" the entry [i][k][j] is
    (∇_i T)^k_j; for valence "02" the entry [i][j][k] is (∇_i T)_jk.
    """
    p = tuple(p)
    n = m.dim
    gamma = christoffel(m, p)
    dgrid = _grid_derivatives(tensor, n)
    T = np.array([[sx.evaluate(tensor[a][b], p) for b in range(n)]
                  for a in range(n)])
    dT = np.array([[[sx.evaluate(dgrid[i][a][b], p) for b in range(n)]
                    for a in range(n)] for i in range(n)])
    if valence == "11":
        out = dT + np.einsum("kil,lj->ikj", gamma, T) - np.einsum("lij,kl->ikj", gamma, T)
    elif valence == "02":
        out = dT - np.einsum("lij,lk->ijk", gamma, T) - np.einsum("lik,jl->ijk", gamma, T)
    else:
        raise ValueError("valence must be '11' or '02'")
    return out


def integrate_geodesic(m, p, v, duration, steps):
    """Classical RK4 integration of the geodesic equation from (p, v).

    Truncates (complete=False) if the path leaves the domain box.
    """
    if steps < 16:
        raise ValueError("steps must be at least 16")
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    if not m.contains(p):
        raise OutsideDomain(f"start point {tuple(p)} outside domain box")

    def acc(x, xdot):
        gam = christoffel(m, tuple(x))
        return -np.einsum("kij,i,j->k", gam, xdot, xdot)

    h = duration / steps
    times = [0.0]
    points = [p.copy()]
    vels = [v.copy()]
    x, xd = p.copy(), v.copy()
    complete = True
    for s in range(steps):
        try:
            k1x, k1v = xd, acc(x, xd)
            k2x, k2v = xd + 0.5 * h * k1v, acc(x + 0.5 * h * k1x, xd + 0.5 * h * k1v)
            k3x, k3v = xd + 0.5 * h * k2v, acc(x + 0.5 * h * k2x, xd + 0.5 * h * k2v)
            k4x, k4v = xd + h * k3v, acc(x + h * k3x, xd + h * k3v)
        except (DomainError, DomainExit, SingularMetric):
            complete = False
            break
        xn = x + (h / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
        vn = xd + (h / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
        if not m.contains(xn):
            complete = False
            break
        x, xd = xn, vn
        times.append((s + 1) * h)
        points.append(x.copy())
        vels.append(xd.copy())
    return GeodesicPath(np.array(times), np.array(points), np.array(vels), complete)


def orthonormal_frame(m, p):
    """Gram–Schmidt of the coordinate basis against g_p (fixed pivot order)."""
    p = tuple(p)
    G = m.metric_at(p)
    try:
        L = np.linalg.cholesky(G)
    except np.linalg.LinAlgError as ex:
        raise SingularMetric(f"metric not positive definite at {p}") from ex
    E = np.linalg.solve(L.T, np.eye(m.dim))
    return FramedPoint(point=p, frame=E)


def verify_fermi_chart(m, tube, samples=10, steps=256, t_max=None, seed=0):
    """Check that unit transverse coordinate rays are geodesics of the chart.

    Integrates the geodesic from sampled foot points with unit transverse
    initial velocity and reports the maximum coordinate deviation from the
    straight ray.  A large deviation flags the chart as not adapted to the
    tube.
    """
    n = m.dim
    k = tube.k
    tdim = n - k
    t_max = float(t_max if t_max is not None else tube.epsilon)
    rng = np.random.default_rng(seed)
    feet = probe_points(m.box[:k], samples, seed=seed, margin=0.08)
    records = []
    max_dev = 0.0
    for foot_t in feet:
        p = np.zeros(n)
        p[:k] = foot_t
        p[k:] = tube.center
        Gt = m.metric_at(tuple(p))[k:, k:]
        xi = rng.standard_normal(tdim)
        xi /= math.sqrt(xi @ Gt @ xi)
        v = np.zeros(n)
        v[k:] = xi
        path = integrate_geodesic(m, p, v, t_max, steps)
        expect = p[None, :].repeat(len(path.times), axis=0)
        expect[:, k:] = p[k:] + path.times[:, None] * xi[None, :]
        dev = float(np.max(np.abs(path.points - expect))) if len(path.times) > 1 else 0.0
        records.append({"foot": tuple(p), "direction": tuple(xi),
                        "deviation": dev, "complete": path.complete,
                        "t_reached": float(path.times[-1])})
        max_dev = max(max_dev, dev)
    return {"max_deviation": max_dev, "samples": records, "t_max": t_max}


# -- almost complex structures -----------------------------------------------------

def rotation_acs(m):
    """ACS on a 2-chart from rotating the g-orthonormal frame by 90 degrees.

    J = E R90 E^{-1} built symbolically from the metric entries, so the grid
    is exact wherever the metric is defined.
    """
    if m.dim != 2:
        raise ValueError("rotation_acs applies to 2-dimensional charts")
    g11, g12, g22 = m.metric[0][0], m.metric[0][1], m.metric[1][1]
    s1 = sx.sqrt(g11)
    nrm = sx.sqrt(sx.add(g22, sx.neg(sx.div(sx.mul(g12, g12), g11))))
    # E columns: e1 = (1/s1, 0); e2 = (-g12/(g11*nrm), 1/nrm)
    e11, e12 = sx.div(1.0, s1), sx.div(sx.neg(g12), sx.mul(g11, nrm))
    e22 = sx.div(1.0, nrm)
    # det E = e11*e22
    det = sx.mul(e11, e22)
    i11, i12 = sx.div(e22, det), sx.div(sx.neg(e12), det)
    i22 = sx.div(e11, det)
    # J = E [[0,-1],[1,0]] E^{-1}, with E = [[e11, e12], [0, e22]]
    # E @ R90 = [[e12, -e11], [e22, 0]]
    j11 = sx.mul(e12, i11)
    j12 = sx.add(sx.mul(e12, i12), sx.mul(sx.neg(e11), i22))
    j21 = sx.mul(e22, i11)
    j22 = sx.mul(e22, i12)
    return _grid([[sx.simplify(j11), sx.simplify(j12)],
                  [sx.simplify(j21), sx.simplify(j22)]])


def standard_block_acs(dim):
    """Constant block ACS: J(e_{2k+1}) = e_{2k+2}, J(e_{2k+2}) = -e_{2k+1}."""
    if dim % 2:
        raise ValueError("dimension must be even")
    zero = sx.const(0.0)
    grid = [[zero] * dim for _ in range(dim)]
    for b in range(dim // 2):
        grid[2 * b + 1][2 * b] = sx.const(1.0)
        grid[2 * b][2 * b + 1] = sx.const(-1.0)
    return _grid(grid)


def symbolic_inverse(grid):
    """Exact inverse of a square expression grid by Gauss-Jordan elimination."""
    n = len(grid)
    aug = [[grid[i][j] for j in range(n)]
           + [sx.const(1.0 if i == j else 0.0) for j in range(n)]
           for i in range(n)]
    for col in range(n):
        pivot_row = None
        if not aug[col][col].is_const(0.0):
            pivot_row = col
        else:
            for r in range(col + 1, n):
                if not aug[r][col].is_const(0.0):
                    pivot_row = r
                    break
        if pivot_row is None:
            raise SingularMetric("structurally singular grid")
        if pivot_row != col:
            aug[col], aug[pivot_row] = aug[pivot_row], aug[col]
        piv = aug[col][col]
        aug[col] = [sx.div(e, piv) for e in aug[col]]
        aug[col][col] = sx.const(1.0)
        for r in range(n):
            if r == col:
                continue
            f = aug[r][col]
            if f.is_const(0.0):
                continue
            aug[r] = [sx.add(aug[r][j], sx.neg(sx.mul(f, aug[col][j])))
                      for j in range(2 * n)]
            aug[r][col] = sx.const(0.0)
    return _grid([row[n:] for row in aug])


# -- manifest files ------------------------------------------------------------------

def load_manifest(source):
    """Build a ChartManifold from a manifest dict, JSON text, or file path."""
    if isinstance(source, dict):
        data = source
    elif isinstance(source, str) and source.lstrip().startswith("{"):
        data = json.loads(source)
    else:
        if not os.path.exists(source):
            raise ManifestError(f"manifest file not found: {source}")
        with open(source) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as ex:
                raise ManifestError(f"manifest {source} is not valid JSON: {ex}") from ex
    try:
        dim = int(data["dimension"])
        box = data["domain"]
        metric_src = data["metric"]
    except KeyError as ex:
        raise ManifestError(f"manifest missing field {ex}") from ex
    coords = data.get("coordinates")
    upper = {}
    for key, text in metric_src.items():
        i, j = (int(t) - 1 for t in key.split(","))
        if j < i:
            i, j = j, i
        upper[(i, j)] = sx.parse_expression(text, dim=dim)
    acs = None
    if "acs" in data and data["acs"]:
        zero = sx.const(0.0)
        acs_rows = [[zero] * dim for _ in range(dim)]
        for key, text in data["acs"].items():
            i, j = (int(t) - 1 for t in key.split(","))
            acs_rows[i][j] = sx.parse_expression(text, dim=dim)
        acs = acs_rows
    try:
        return ChartManifold(dim, upper, box, coords=coords, acs=acs,
                             name=data.get("name", ""))
    except ManifestError:
        raise
    except Exception as ex:
        raise ManifestError(f"bad manifest: {ex}") from ex


def manifest_dict(m):
    """Serialize a ChartManifold back to its manifest dict (bit-exact entries)."""
    metric = {}
    for i in range(m.dim):
        for j in range(i, m.dim):
            e = m.metric[i][j]
            if not e.is_const(0.0):
                metric[f"{i + 1},{j + 1}"] = sx.to_text(e)
    data = {
        "name": m.name,
        "dimension": m.dim,
        "coordinates": list(m.coords),
        "domain": [[lo, hi] for lo, hi in m.box],
        "metric": metric,
    }
    if m.acs is not None:
        acs = {}
        for i in range(m.dim):
            for j in range(m.dim):
                e = m.acs[i][j]
                if not e.is_const(0.0):
                    acs[f"{i + 1},{j + 1}"] = sx.to_text(e)
        data["acs"] = acs
    return data


def save_manifest(m, path):
    with open(path, "w") as fh:
        json.dump(manifest_dict(m), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
