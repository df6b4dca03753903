"""Induced chart on the tangent bundle with the Sasaki metric.

For a base chart of dimension n the bundle chart has 2n coordinates
(x^1..x^n, v^1..v^n), fiber coordinates taken against the coordinate frame.
With A^k_i = Γ^k_ij v^j the Sasaki metric splits as

    g_xx[i][j] = g_ij + g_kl A^k_i A^l_j
    g_xv[i][m] = g_km A^k_i
    g_vv      = g

so every entry is an expression in the 2n coordinates.  Horizontal lifts are
(X, -A X), vertical lifts (0, X); the connection map sends (Wx, Wv) at (x, v)
to Wv + A Wx-contracted, and its kernel is the horizontal subspace.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import scalar as sx
from .chart import ChartManifold, christoffel, curvature, orthonormal_frame
from .errors import MissingBaseACS

__all__ = [
    "BundleChart", "LiftFrame", "build_sasaki", "connection_map", "lift",
    "lift_frame", "build_bundle_acs", "check_bracket_identities",
    "expr_matmul",
]


def _grid(rows):
    return tuple(tuple(r) for r in rows)


def expr_matmul(a, b):
    n, m, k = len(a), len(b[0]), len(b)
    return _grid([[sx.add(*[sx.mul(a[i][l], b[l][j]) for l in range(k)])
                   for j in range(m)] for i in range(n)])


def _expr_block(tl, tr, bl, br):
    n = len(tl)
    rows = []
    for i in range(n):
        rows.append(tuple(tl[i]) + tuple(tr[i]))
    for i in range(n):
        rows.append(tuple(bl[i]) + tuple(br[i]))
    return _grid(rows)


def _expr_eye(n, sign=1.0):
    z = sx.const(0.0)
    return _grid([[sx.const(sign) if i == j else z for j in range(n)]
                  for i in range(n)])


def _expr_zero(n):
    z = sx.const(0.0)
    return _grid([[z] * n for _ in range(n)])


def _expr_neg(a):
    return _grid([[sx.neg(e) for e in row] for row in a])


def _expr_add(a, b):
    return _grid([[sx.add(x, y) for x, y in zip(ra, rb)]
                  for ra, rb in zip(a, b)])


class BundleChart:
    """Tangent bundle chart over a base manifold, carrying the Sasaki metric."""

    def __init__(self, base, chart, gamma_sym, a_grid, v_max):
        self.base = base
        self.chart = chart
        self.gamma_sym = gamma_sym   # base Γ^k_ij expressions
        self.a_grid = a_grid         # A^k_i expressions on the bundle chart
        self.v_max = v_max
        self._acs_charts = {}

    @property
    def n(self):
        return self.base.dim

    def split(self, U):
        U = tuple(U)
        return U[:self.n], np.asarray(U[self.n:], dtype=float)

    def gamma_at(self, x):
        n = self.n
        x = tuple(x)
        return np.array([[[sx.evaluate(self.gamma_sym[k][i][j], x)
                           for j in range(n)] for i in range(n)]
                         for k in range(n)])

    def a_at(self, U):
        x, v = self.split(U)
        return np.einsum("kij,j->ki", self.gamma_at(x), v)

    def chart_with_acs(self, acs_grid):
        """Bundle chart copy carrying the given ACS (metric caches shared)."""
        key = id(acs_grid)
        hit = self._acs_charts.get(key)
        if hit is not None and hit[0] is acs_grid:
            return hit[1]
        ch = self.chart.with_acs(acs_grid, name=self.chart.name + "+acs")
        ch._d1 = self.chart.metric_d1()
        ch._d2 = self.chart._d2
        ch._ginv_sym = self.chart._ginv_sym
        ch._gamma_sym = self.chart._gamma_sym
        self._acs_charts[key] = (acs_grid, ch)
        return ch

    def probe_points(self, count, seed=0, margin=0.05):
        return self.chart.probe_points(count, seed=seed, margin=margin)

    def __repr__(self):
        return f"BundleChart(base={self.base.name or '?'}, dim={2 * self.n})"


@dataclass
class LiftFrame:
    """Horizontal and vertical lifts of a base orthonormal frame at a bundle point."""
    point: tuple
    base_frame: np.ndarray
    matrix: np.ndarray    # 2n x 2n, columns = n horizontal lifts then n vertical


def build_sasaki(base, v_max=1.0, name=None):
    """Construct the 2n-dimensional bundle chart with the symbolic Sasaki metric."""
    n = base.dim
    g = base.metric
    gamma = base.christoffel_symbolic()
    # A^k_i = Γ^k_ij v^j with v^j = coordinate n+j
    A = _grid([[sx.add(*[sx.mul(gamma[k][i][j], sx.coord(n + j))
                         for j in range(n)])
                for i in range(n)] for k in range(n)])
    upper = {}
    for i in range(n):
        for j in range(i, n):
            corr = sx.add(*[sx.mul(g[k][l], A[k][i], A[l][j])
                            for k in range(n) for l in range(n)])
            upper[(i, j)] = sx.add(g[i][j], corr)
    for i in range(n):
        for m in range(n):
            a, b = (i, n + m) if i <= n + m else (n + m, i)
            upper[(a, b)] = sx.add(*[sx.mul(g[k][m], A[k][i]) for k in range(n)])
    for i in range(n):
        for j in range(i, n):
            upper[(n + i, n + j)] = g[i][j]
    box = list(base.box) + [(-v_max, v_max)] * n
    coords = tuple(base.coords) + tuple(f"v{i + 1}" for i in range(n))
    chart = ChartManifold(2 * n, upper, box, coords=coords,
                          name=name or (f"T({base.name})" if base.name else "T(?)"))
    return BundleChart(base, chart, gamma, A, v_max)


def connection_map(B, U, W):
    """K(W)^k = Wv^k + Γ^k_ij Wx^i v^j at the bundle point U."""
    n = B.n
    W = np.asarray(W, dtype=float)
    A = B.a_at(U)
    return W[n:] + A @ W[:n]


def lift(B, U, X, kind):
    """Horizontal lift (X, -A X) or vertical lift (0, X) of a base vector at U."""
    n = B.n
    X = np.asarray(X, dtype=float)
    out = np.zeros(2 * n)
    if kind == "horizontal":
        out[:n] = X
        out[n:] = -B.a_at(U) @ X
    elif kind == "vertical":
        out[n:] = X
    else:
        raise ValueError("kind must be 'horizontal' or 'vertical'")
    return out


def lift_frame(B, U):
    """Lift a base orthonormal frame at π(U) to a ĝ-orthonormal frame at U."""
    n = B.n
    x, _ = B.split(U)
    E = orthonormal_frame(B.base, x).frame
    M = np.zeros((2 * n, 2 * n))
    for a in range(n):
        M[:, a] = lift(B, U, E[:, a], "horizontal")
        M[:, n + a] = lift(B, U, E[:, a], "vertical")
    return LiftFrame(point=tuple(U), base_frame=E, matrix=M)


def build_bundle_acs(B, base_acs=None):
    """The bundle structures (J1, J2, J3) as symbolic (1,1) grids.

    J1 swaps horizontal and vertical lifts; J2 applies the base structure with
    a sign flip on verticals and requires ``base_acs``; J3 = J1 J2.  Returns a
    dict with keys 1 (always) and 2, 3 (when base_acs is given).
    """
    n = B.n
    A = B.a_grid
    I = _expr_eye(n)
    AA = expr_matmul(A, A)
    J1 = _expr_block(_expr_neg(A), _expr_eye(n, -1.0),
                     _expr_add(I, AA), A)
    out = {1: J1}
    if base_acs is not None:
        J = _grid(base_acs)
        AJ = expr_matmul(A, J)
        JA = expr_matmul(J, A)
        J2 = _expr_block(J, _expr_zero(n),
                         _expr_neg(_expr_add(AJ, JA)), _expr_neg(J))
        out[2] = J2
        out[3] = expr_matmul(J1, J2)
    return out


def _lift_fields(B, Xgrid, kind):
    """Expression-valued lift of an expression-valued base vector field."""
    n = B.n
    zero = sx.const(0.0)
    if kind == "vertical":
        return tuple([zero] * n + list(Xgrid))
    Av = [sx.add(*[sx.mul(B.a_grid[k][i], Xgrid[i]) for i in range(n)])
          for k in range(n)]
    return tuple(list(Xgrid) + [sx.neg(e) for e in Av])


def _expr_bracket(W1, W2, dim):
    """[W1, W2]^c = W1^d ∂_d W2^c − W2^d ∂_d W1^c, componentwise symbolic."""
    out = []
    for c in range(dim):
        terms = []
        for d in range(dim):
            if not W1[d].is_const(0.0):
                dW2 = sx.differentiate(W2[c], d)
                if not dW2.is_const(0.0):
                    terms.append(sx.mul(W1[d], dW2))
            if not W2[d].is_const(0.0):
                dW1 = sx.differentiate(W1[c], d)
                if not dW1.is_const(0.0):
                    terms.append(sx.neg(sx.mul(W2[d], dW1)))
        out.append(sx.add(*terms) if terms else sx.const(0.0))
    return tuple(out)


def check_bracket_identities(B, Xgrid, Ygrid, U):
    """Residuals of the four lift-bracket identities at a bundle point.

    ``Xgrid``/``Ygrid`` are expression-valued vector fields on the base.  The
    brackets of the lift fields are formed symbolically and compared against:
    zero for two verticals, the vertical lift of ∇_X Y for horizontal/vertical,
    the base bracket [X, Y] for the projected horizontal/horizontal, and the
    curvature value R(Y, X)U for its connection-map part (the sign matches the
    curvature orientation fixed in `chart.curvature`).
    """
    n = B.n
    U = tuple(U)
    x, v = B.split(U)
    Xh = _lift_fields(B, Xgrid, "horizontal")
    Yh = _lift_fields(B, Ygrid, "horizontal")
    Xv = _lift_fields(B, Xgrid, "vertical")
    Yv = _lift_fields(B, Ygrid, "vertical")

    def val(field_vec):
        return np.array([sx.evaluate(e, U) for e in field_vec])

    b_vv = val(_expr_bracket(Xv, Yv, 2 * n))
    b_hv = val(_expr_bracket(Xh, Yv, 2 * n))
    b_hh = val(_expr_bracket(Xh, Yh, 2 * n))

    gamma = B.gamma_at(x)
    Xp = np.array([sx.evaluate(e, x) for e in Xgrid])
    Yp = np.array([sx.evaluate(e, x) for e in Ygrid])
    dY = np.array([[sx.evaluate(sx.differentiate(Ygrid[k], i), x)
                    for k in range(n)] for i in range(n)])
    nabla_xy = np.einsum("i,ik->k", Xp, dY) + np.einsum("kil,i,l->k", gamma, Xp, Yp)

    base_bracket = _expr_bracket(Xgrid, Ygrid, n)
    bXY = np.array([sx.evaluate(e, x) for e in base_bracket])

    R = curvature(B.base, x)
    # engine orientation: K[X^h, Y^h]_U = R(Y, X)U
    RYXu = np.einsum("lkij,k,i,j->l", R, v, Yp, Xp)

    res = {
        "vertical_vertical": float(np.max(np.abs(b_vv))),
        "horizontal_vertical": float(np.max(np.abs(b_hv - lift(B, U, nabla_xy, "vertical")))),
        "projection": float(np.max(np.abs(b_hh[:n] - bXY))),
        "curvature": float(np.max(np.abs(connection_map(B, U, b_hh) - RYXu))),
    }
    res["max"] = max(res.values())
    return res
