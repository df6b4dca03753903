"""Second fundamental tensor of a metric/ACS pair, case tables, and the
sixteen-class almost Hermitian classifier.

The second fundamental tensor of a pair (J, g) is h_X Y = (∇_X Y + J ∇_X (JY))/2;
it vanishes exactly when the pair is Kaehler.  Two independent evaluation
paths are provided (the defining connection form on constant-coefficient
extensions, and the conjugation form h = g(J (∇_X J) Y, Z)/2), plus closed
forms for lift triples on the tangent bundle and a direct bundle evaluation
used as their oracle.

Curvature orientation: all closed forms below are written against the
convention of `chart.curvature`, under which the horizontal bracket identity
reads K[X^h, Y^h]_u = R(Y, X)u.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import scalar as sx
from .chart import (christoffel, covariant_derivative, curvature,
                    orthonormal_frame, probe_points, _metric_derivative_arrays,
                    _lowered_christoffel)
from .errors import BadCase, MissingBaseACS, NotOrthonormal

__all__ = [
    "second_fundamental_tensor", "h_tensor_components", "h1_closed_form",
    "h2_closed_form", "bundle_h_direct", "lee_form", "gh_classify",
    "GHClassReport", "CLASS_LABELS",
]


def _require_acs(m):
    if m.acs is None:
        raise MissingBaseACS(f"chart {m.name or '?'} carries no almost complex structure")


def _check_unit(m, p, vectors, tol=1e-8):
    G = m.metric_at(p)
    for X in vectors:
        X = np.asarray(X, dtype=float)
        if abs(X @ G @ X - 1.0) > tol:
            raise NotOrthonormal(f"vector {tuple(X)} is not g-unit at {p}")


def _acs_derivative_arrays(m, p):
    """dJ[i, k, j] = ∂_i J^k_j at p."""
    from .chart import _grid_derivatives
    n = m.dim
    dgrid = _grid_derivatives(m.acs, n)
    return np.array([[[sx.evaluate(dgrid[i][k][j], p) for j in range(n)]
                      for k in range(n)] for i in range(n)])


def second_fundamental_tensor(m, p, X, Y, Z, path="connection", check=True):
    """h_{XYZ} = <h_X Y, Z> for g-unit vectors X, Y, Z at p.

    ``path='connection'`` evaluates (g(∇_X Y, Z) − g(∇_X JY, JZ))/2 on the
    constant-coefficient extensions of the vectors; ``path='conjugation'``
    evaluates g(J (∇_X J) Y, Z)/2.  Both agree because h is tensorial.
    """
    _require_acs(m)
    p = tuple(p)
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    Z = np.asarray(Z, dtype=float)
    if check:
        _check_unit(m, p, (X, Y, Z))
    G = m.metric_at(p)
    J = m.acs_at(p)
    if path == "connection":
        low = _lowered_christoffel(_metric_derivative_arrays(m, p))
        JY, JZ = J @ Y, J @ Z
        t1 = np.einsum("aij,i,j,a->", low, X, Y, Z)
        # ∇_X applies to the field J(x)·Y, so the structure derivative enters
        dJ = _acs_derivative_arrays(m, p)
        t2 = (np.einsum("ikj,i,j->k", dJ, X, Y) @ G @ JZ
              + np.einsum("aij,i,j,a->", low, X, JY, JZ))
        return 0.5 * (t1 - t2)
    if path == "conjugation":
        nj = covariant_derivative(m, m.acs, p, "11")
        njxy = np.einsum("ikj,i,j->k", nj, X, Y)
        return 0.5 * (J @ njxy) @ G @ Z
    raise ValueError("path must be 'connection' or 'conjugation'")


def h_tensor_components(m, p):
    """Components h[a, b, c] = h(∂_a, ∂_b, ∂_c) at p (conjugation form)."""
    _require_acs(m)
    p = tuple(p)
    G = m.metric_at(p)
    J = m.acs_at(p)
    nj = covariant_derivative(m, m.acs, p, "11")
    # h_abc = 1/2 * g( J (∇_a J) ∂_b , ∂_c )
    return 0.5 * np.einsum("dk,akb,dc->abc", J, nj, G)


def lee_form(m, p, X=None):
    """Lee-type 1-form: beta(X) = codifferential of the fundamental 2-form at JX, halved.

    The codifferential is the negative frame trace of ∇Φ with Φ(A, B) = g(JA, B).
    Returns the covector (length n) or, when ``X`` is given, the scalar beta(X).
    """
    _require_acs(m)
    p = tuple(p)
    G = m.metric_at(p)
    J = m.acs_at(p)
    E = orthonormal_frame(m, p).frame
    nj = covariant_derivative(m, m.acs, p, "11")
    M = np.einsum("ia,ikj,ja->k", E, nj, E)      # Σ_a (∇_{e_a} J) e_a
    dphi = -(G @ M)                               # δΦ(W) = dphi · W
    beta_vec = 0.5 * (J.T @ dphi)                 # beta(X) = δΦ(JX)/2
    if X is None:
        return beta_vec
    return float(beta_vec @ np.asarray(X, dtype=float))


# -- closed-form case tables -------------------------------------------------------

_LIFT_PATTERNS = {
    1: ("h", "h", "h"), 2: ("h", "h", "v"), 3: ("h", "v", "h"),
    4: ("v", "h", "h"), 5: ("v", "v", "v"), 6: ("v", "v", "h"),
    7: ("v", "h", "v"), 8: ("h", "v", "v"),
}


def lift_pattern(case):
    """Horizontal/vertical pattern of the case's argument triple."""
    if case not in _LIFT_PATTERNS:
        raise BadCase(f"case must be 1..8, got {case}")
    return _LIFT_PATTERNS[case]


def _gR(R, G, A, B, C, D):
    """g(R(A,B)C, D) from the curvature array R[l,k,i,j]."""
    return float(np.einsum("lkij,k,i,j->l", R, C, A, B) @ G @ D)


def h1_closed_form(case, B, U, X, Y, Z):
    """Closed form of the structure-1 second fundamental tensor on lift triples.

    Cases 1, 6, 7, 8 vanish; the others are curvature pairings against the
    fiber vector, written in the engine curvature orientation (they carry the
    opposite sign relative to the orientation in which the horizontal bracket
    identity reads K[X^h,Y^h] = +R(X,Y)u).
    """
    if case not in _LIFT_PATTERNS:
        raise BadCase(f"case must be 1..8, got {case}")
    if case in (1, 6, 7, 8):
        return 0.0
    x, u = B.split(U)
    R = curvature(B.base, x)
    G = B.base.metric_at(x)
    X = np.asarray(X, float)
    Y = np.asarray(Y, float)
    Z = np.asarray(Z, float)
    if case in (2, 3):
        return 0.25 * (_gR(R, G, X, Y, Z, u) + _gR(R, G, Z, X, Y, u))
    if case == 4:
        return 0.25 * _gR(R, G, Z, Y, X, u)
    return -0.25 * _gR(R, G, Z, Y, X, u)   # case 5


def h2_closed_form(case, B, U, X, Y, Z, base_acs=None):
    """Closed form of the structure-2 second fundamental tensor on lift triples.

    Cases 1 and 8 reduce to the base tensor h_{XYZ}; cases 5, 6, 7 vanish;
    cases 2, 3, 4 are curvature pairings (engine orientation, as for h1).
    """
    if case not in _LIFT_PATTERNS:
        raise BadCase(f"case must be 1..8, got {case}")
    acs = base_acs if base_acs is not None else B.base.acs
    if acs is None:
        raise MissingBaseACS("structure-2 cases need a base almost complex structure")
    x, u = B.split(U)
    X = np.asarray(X, float)
    Y = np.asarray(Y, float)
    Z = np.asarray(Z, float)
    if case in (5, 6, 7):
        return 0.0
    if case in (1, 8):
        base = B.base if B.base.acs is not None else B.base.with_acs(acs)
        return second_fundamental_tensor(base, x, X, Y, Z, check=False)
    R = curvature(B.base, x)
    G = B.base.metric_at(x)
    Jm = np.array([[sx.evaluate(acs[i][j], x) for j in range(B.n)]
                   for i in range(B.n)])
    if case == 2:
        return 0.25 * (_gR(R, G, X, Y, Z, u) + _gR(R, G, X, Jm @ Y, Jm @ Z, u))
    if case == 3:
        return -0.25 * (_gR(R, G, X, Z, Y, u) + _gR(R, G, X, Jm @ Z, Jm @ Y, u))
    # case 4
    return 0.25 * (_gR(R, G, Z, Y, X, u) - _gR(R, G, Jm @ Z, Jm @ Y, X, u))


def bundle_h_direct(B, acs_grid, U, W1, W2, W3, check=True):
    """Direct second fundamental tensor on the bundle chart with the given ACS.

    This is the oracle for the closed-form case tables: it never touches the
    base curvature, only the Sasaki metric and the structure grid.
    """
    chart = B.chart_with_acs(acs_grid)
    return second_fundamental_tensor(chart, tuple(U), W1, W2, W3, check=check)


# -- sixteen-class classifier --------------------------------------------------------

CLASS_LABELS = (
    ("K", frozenset()),
    ("U1", frozenset({1})), ("U2", frozenset({2})),
    ("U3", frozenset({3})), ("U4", frozenset({4})),
    ("U1+U2", frozenset({1, 2})), ("U1+U3", frozenset({1, 3})),
    ("U1+U4", frozenset({1, 4})), ("U2+U3", frozenset({2, 3})),
    ("U2+U4", frozenset({2, 4})), ("U3+U4", frozenset({3, 4})),
    ("U1+U2+U3", frozenset({1, 2, 3})), ("U1+U2+U4", frozenset({1, 2, 4})),
    ("U1+U3+U4", frozenset({1, 3, 4})), ("U2+U3+U4", frozenset({2, 3, 4})),
    ("U", frozenset({1, 2, 3, 4})),
)

_ALIASES = {"U1": "NK", "U2": "AK", "U1+U2": "QK", "U3+U4": "H", "U1+U2+U3": "SK"}


@dataclass
class GHClassReport:
    """Per-class membership of the sixteen almost Hermitian classes."""
    manifold: str
    dim: int
    dim_valid: bool
    tol: float
    seed: int
    points: int
    vectors: int
    half_dim: int
    classes: dict = field(default_factory=dict)

    def member(self, label):
        return self.classes[label]["member"]

    def residual(self, label):
        return self.classes[label]["residual"]

    def minimal_classes(self):
        """Members whose proper subclasses are all non-members."""
        sets = dict(CLASS_LABELS)
        out = []
        for label, comp in CLASS_LABELS:
            if not self.classes[label]["member"]:
                continue
            if any(self.classes[l2]["member"] and sets[l2] < comp
                   for l2, _ in CLASS_LABELS):
                continue
            out.append(label)
        return out

    def to_json(self):
        return json.dumps({
            "manifold": self.manifold, "dim": self.dim,
            "dim_valid": self.dim_valid, "tol": self.tol, "seed": self.seed,
            "points": self.points, "vectors": self.vectors,
            "half_dim": self.half_dim, "classes": self.classes,
        }, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))


def _cyc(fn, X, Y, Z):
    return fn(X, Y, Z) + fn(Y, Z, X) + fn(Z, X, Y)


def gh_classify(m, points=20, vectors=6, tol=1e-6, seed=0, half_dim=None):
    """Classify an almost Hermitian chart into the sixteen-class lattice.

    Each defining condition is sampled on orthonormal triples at probe points;
    a class is a member when its maximal residual stays within ``tol``.
    Membership is closed upward along the class lattice.  ``half_dim`` fixes
    the n entering the 1/(2(n-1)) coefficients; the default is dim/2.  The
    table semantics assume real dimension at least 6, recorded in
    ``dim_valid``.
    """
    _require_acs(m)
    n = m.dim
    nn = half_dim if half_dim is not None else n // 2
    # below real dimension 4 the coefficient rows degenerate; clamp so the
    # report (flagged dim_valid=False) can still be produced
    nn = max(nn, 2)
    c4 = 1.0 / (2.0 * (nn - 1))
    c2 = 1.0 / (nn - 1)
    rng = np.random.default_rng(seed)
    residuals = {label: 0.0 for label, _ in CLASS_LABELS}
    total = 0
    for p in probe_points(m.box, points, seed=seed):
        G = m.metric_at(p)
        J = m.acs_at(p)
        H = h_tensor_components(m, p)
        bv = lee_form(m, p)

        def h(X, Y, Z):
            return float(np.einsum("abc,a,b,c->", H, X, Y, Z))

        def beta(X):
            return float(bv @ X)

        def ip(X, Y):
            return float(X @ G @ Y)

        # orthonormal triples via Gram-Schmidt in g; charts of dimension
        # below 3 cycle the independent directions
        indep = min(3, n)
        for _ in range(vectors):
            raw = rng.standard_normal((n, indep))
            cols = []
            for c in range(indep):
                v = raw[:, c]
                for w in cols:
                    v = v - (v @ G @ w) * w
                v = v / math.sqrt(v @ G @ v)
                cols.append(v)
            X, Y, Z = (cols[i % indep] for i in range(3))
            JX, JY, JZ = J @ X, J @ Y, J @ Z
            total += 1

            def bump(label, value):
                residuals[label] = max(residuals[label], abs(value))

            bump("K", h(X, Y, Z))
            bump("U1", h(X, X, Y))
            bump("U2", _cyc(h, X, Y, Z))
            bump("U3", h(X, Y, Z) - h(JX, JY, Z))
            bump("U3", beta(Z))
            bump("U4", h(X, Y, Z) - c4 * (ip(X, Y) * beta(Z) - ip(X, Z) * beta(Y)
                                          - ip(X, JY) * beta(JZ) + ip(X, JZ) * beta(JY)))
            bump("U1+U2", h(X, Y, JZ) - h(JX, Y, Z))
            bump("U1+U3", h(X, X, Y) - h(JX, JX, Y))
            bump("U1+U3", beta(Y))
            bump("U1+U4", h(X, X, Y) + c4 * (ip(X, Y) * beta(X) - beta(Y)
                                             - ip(X, JY) * beta(JX)))
            bump("U2+U3", _cyc(lambda a, b, c: h(a, b, J @ c) + h(J @ a, b, c), X, Y, Z))
            bump("U2+U3", beta(Z))
            bump("U2+U4", _cyc(lambda a, b, c: h(a, b, J @ c) + c2 * ip(J @ a, b) * beta(c),
                               X, Y, Z))
            bump("U3+U4", h(X, Y, JZ) + h(JX, Y, Z))
            bump("U1+U2+U3", beta(X))
            bump("U1+U2+U4", h(X, Y, JZ) - h(JX, Y, Z)
                 - c2 * (ip(X, Y) * beta(JZ) - ip(X, Z) * beta(JY)
                         + ip(X, JY) * beta(Z) - ip(X, JZ) * beta(Y)))
            bump("U1+U3+U4", h(X, JX, Y) + h(JX, X, Y))
            bump("U2+U3+U4", _cyc(lambda a, b, c: h(a, b, J @ c) + h(J @ a, b, c), X, Y, Z))

    raw_member = {label: residuals[label] <= tol for label, _ in CLASS_LABELS}
    sets = dict(CLASS_LABELS)
    classes = {}
    for label, comp in CLASS_LABELS:
        member = any(raw_member[l2] for l2, s2 in CLASS_LABELS if s2 <= comp)
        entry = {"member": bool(member), "residual": float(residuals[label]),
                 "samples": total}
        alias = _ALIASES.get(label)
        if alias:
            entry["alias"] = alias
        classes[label] = entry
    return GHClassReport(manifold=m.name, dim=n, dim_valid=n >= 6, tol=tol,
                         seed=seed, points=points, vectors=vectors,
                         half_dim=nn, classes=classes)
