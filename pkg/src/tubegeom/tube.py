"""Tubular-neighborhood tensor deformation and the theorem verifiers.

An adapted tube declares the first k chart coordinates tangential and the
rest transverse; the transverse radius t of a point is measured in the
foot-point metric restricted to the transverse block.  A deformed field
freezes components inside the inner disk (t <= eps/2), evaluates them at the
retracted radius 2t - eps across the annulus, and leaves them untouched
outside; values are continuous but not smooth at the two interfaces, so all
derivatives of deformed data use region-clipped finite-difference stencils.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import scalar as sx
from .bundle import build_bundle_acs, build_sasaki
from .chart import ChartManifold, probe_points, verify_fermi_chart
from .errors import (BoundaryGuardViolation, EmptyInnerTube, OutsideDomain,
                     SingularMetric)

__all__ = [
    "RegionTag", "AdaptedTube", "RadialPoint", "PiecewiseField",
    "radial_decompose", "radial_profile", "deform_field", "region_samples",
    "deformed_christoffel", "deformed_curvature", "verify_totally_geodesic",
    "verify_flat_inner", "verify_parallel_J", "KaehlerTube",
    "build_kaehler_tube", "build_hyper_stage",
]


class RegionTag(str, Enum):
    InnerDisk = "inner"
    Annulus = "annulus"
    Exterior = "exterior"
    BoundaryGuard = "guard"


@dataclass(frozen=True)
class AdaptedTube:
    """Tube around the submanifold {transverse coordinates = center}.

    The first ``k`` coordinates of ``chart`` are tangential; ``epsilon`` is the
    (constant) tube radius; ``guard_frac * epsilon`` is the width of the band
    around each interface where finite differencing is refused.
    """
    chart: ChartManifold
    k: int
    epsilon: float
    center: tuple = None
    guard_frac: float = 1e-3

    def __post_init__(self):
        n = self.chart.dim
        if not (0 < self.k < n):
            raise ValueError("tangential count k must satisfy 0 < k < dim")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        c = self.center
        if c is None:
            c = (0.0,) * (n - self.k)
        object.__setattr__(self, "center", tuple(float(v) for v in c))
        if len(self.center) != n - self.k:
            raise ValueError("center length must equal the transverse count")

    @property
    def transverse(self):
        return range(self.k, self.chart.dim)


@dataclass
class RadialPoint:
    foot: np.ndarray
    t: float
    xi: np.ndarray
    tag: RegionTag


def radial_decompose(tube, x):
    """Foot point, transverse radius, unit direction, and region tag of x.

    The radius is the norm of the transverse offset in the foot-point metric
    restricted to the transverse block; the direction is undefined on the
    submanifold and returned as the zero vector there.
    """
    x = np.asarray(x, dtype=float)
    k = tube.k
    foot = x.copy()
    foot[k:] = tube.center
    dx = x[k:] - np.asarray(tube.center)
    Gt = tube.chart.metric_at(tuple(foot))[k:, k:]
    t = math.sqrt(max(dx @ Gt @ dx, 0.0))
    xi = dx / t if t > 0 else np.zeros_like(dx)
    eps = tube.epsilon
    delta = tube.guard_frac * eps
    if abs(t - 0.5 * eps) <= delta or abs(t - eps) <= delta:
        tag = RegionTag.BoundaryGuard
    elif t < 0.5 * eps:
        tag = RegionTag.InnerDisk
    elif t < eps:
        tag = RegionTag.Annulus
    else:
        tag = RegionTag.Exterior
    return RadialPoint(foot=foot, t=t, xi=xi, tag=tag)


def radial_profile(t, eps):
    """Retraction radius: 0 inside, 2t - eps across the annulus, t outside."""
    if t <= 0.5 * eps:
        return 0.0
    if t <= eps:
        return 2.0 * t - eps
    return t


_RHO = {
    RegionTag.InnerDisk: lambda t, eps: 0.0,
    RegionTag.Annulus: lambda t, eps: 2.0 * t - eps,
    RegionTag.Exterior: lambda t, eps: t,
}


def _flatten(grid):
    if isinstance(grid, sx.ScalarExpr):
        return (), [grid]
    shape_rest = None
    flat = []
    for item in grid:
        s, f = _flatten(item)
        if shape_rest is None:
            shape_rest = s
        elif shape_rest != s:
            raise ValueError("ragged component grid")
        flat.extend(f)
    return (len(grid),) + shape_rest, flat


class PiecewiseField:
    """Tensor field deformed on an adapted tube, evaluable by region.

    Component values at x are the source components evaluated at the
    retracted point; the region tag is returned alongside.  ``region`` forces
    one branch (its smooth extension), which is how interface continuity is
    checked and how region-clipped stencils are evaluated.
    """

    def __init__(self, source, tube):
        self.tube = tube
        self.shape, self.components = _flatten(source)
        self.source = source

    def evaluate(self, x, region=None):
        rp = radial_decompose(self.tube, x)
        branch = region if region is not None else rp.tag
        if branch == RegionTag.BoundaryGuard:
            raise BoundaryGuardViolation(
                f"point at t={rp.t:.6g} lies in the interface guard band; "
                "pass an explicit region to evaluate a one-sided branch")
        rho = _RHO[branch](rp.t, self.tube.epsilon)
        y = rp.foot.copy()
        y[self.tube.k:] = np.asarray(self.tube.center) + rho * rp.xi
        yt = tuple(y)
        vals = np.array([sx.evaluate(e, yt) for e in self.components])
        return vals.reshape(self.shape) if self.shape else vals[0], rp.tag

    def values(self, x, region=None):
        return self.evaluate(x, region=region)[0]


def deform_field(source, tube):
    """Deformation of a tensor component grid on an adapted tube."""
    return PiecewiseField(source, tube)


def region_samples(tube, region, count, seed=0, t_margin=0.06, exterior_cap=1.3):
    """Deterministic sample points with the requested region tag.

    Foot points are low-discrepancy in the tangential box, directions are
    seeded unit vectors in the foot metric, radii stay ``t_margin * epsilon``
    away from the interfaces.  Points falling outside the domain box are
    skipped (the generator oversamples to compensate).
    """
    eps = tube.epsilon
    margin = t_margin * eps
    if region == RegionTag.InnerDisk:
        t_lo, t_hi = 0.0, 0.5 * eps - margin
    elif region == RegionTag.Annulus:
        t_lo, t_hi = 0.5 * eps + margin, eps - margin
    elif region == RegionTag.Exterior:
        t_lo, t_hi = eps + margin, exterior_cap * eps
    else:
        raise ValueError("region must be InnerDisk, Annulus, or Exterior")
    k = tube.k
    n = tube.chart.dim
    rng = np.random.default_rng(seed)
    feet = probe_points(tube.chart.box[:k], 4 * count, seed=seed, margin=0.08)
    out = []
    for idx, foot_t in enumerate(feet):
        if len(out) >= count:
            break
        x = np.zeros(n)
        x[:k] = foot_t
        x[k:] = tube.center
        Gt = tube.chart.metric_at(tuple(x))[k:, k:]
        xi = rng.standard_normal(n - k)
        xi /= math.sqrt(xi @ Gt @ xi)
        u = ((idx + 1) * (math.sqrt(2) - 1) + 0.17 * (seed + 1)) % 1.0
        t = t_lo + u * (t_hi - t_lo)
        x[k:] = np.asarray(tube.center) + t * xi
        if not tube.chart.contains(x):
            continue
        if radial_decompose(tube, x).tag != region:
            continue
        out.append(tuple(x))
    if len(out) < count:
        raise OutsideDomain(
            f"could only place {len(out)}/{count} samples with tag {region} "
            "inside the domain box; shrink epsilon or widen the box")
    return out


def _fd_metric_derivatives(pf, x, h):
    """Region-clipped central differences of the deformed metric at x."""
    rp = radial_decompose(pf.tube, x)
    if rp.tag == RegionTag.BoundaryGuard:
        raise BoundaryGuardViolation(
            f"finite differencing refused at t={rp.t:.6g} (guard band)")
    n = pf.tube.chart.dim
    x = np.asarray(x, dtype=float)
    G = pf.values(x, region=rp.tag)
    dG = np.empty((n, n, n))
    for a in range(n):
        xp, xm = x.copy(), x.copy()
        xp[a] += h
        xm[a] -= h
        Gp = pf.values(xp, region=rp.tag)
        Gm = pf.values(xm, region=rp.tag)
        dG[a] = (Gp - Gm) / (2.0 * h)
    return G, dG, rp


def deformed_christoffel(pf, x, step_frac=1e-4):
    """Christoffel symbols of a deformed metric via region-clipped differences."""
    h = step_frac * pf.tube.epsilon
    G, dG, _ = _fd_metric_derivatives(pf, x, h)
    low = 0.5 * (np.transpose(dG, (2, 0, 1)) + np.transpose(dG, (2, 1, 0)) - dG)
    n = len(G)
    try:
        np.linalg.cholesky(G)
    except np.linalg.LinAlgError as ex:
        raise SingularMetric(f"deformed metric not positive definite at {tuple(x)}") from ex
    return np.linalg.solve(G, low.reshape(n, n * n)).reshape(n, n, n)


def deformed_curvature(pf, x, step_frac=2e-3):
    """Curvature of a deformed metric from first/second region-clipped differences."""
    tube = pf.tube
    h = step_frac * tube.epsilon
    rp = radial_decompose(tube, x)
    if rp.tag == RegionTag.BoundaryGuard:
        raise BoundaryGuardViolation(
            f"finite differencing refused at t={rp.t:.6g} (guard band)")
    n = tube.chart.dim
    x = np.asarray(x, dtype=float)
    tag = rp.tag

    def g_at(pt):
        return pf.values(pt, region=tag)

    G0 = g_at(x)
    shift = np.zeros(n)
    Gp, Gm = [], []
    for a in range(n):
        shift[:] = 0.0
        shift[a] = h
        Gp.append(g_at(x + shift))
        Gm.append(g_at(x - shift))
    dG = np.array([(Gp[a] - Gm[a]) / (2 * h) for a in range(n)])
    d2G = np.empty((n, n, n, n))
    for a in range(n):
        d2G[a, a] = (Gp[a] - 2 * G0 + Gm[a]) / (h * h)
        for b in range(a + 1, n):
            sa, sb = np.zeros(n), np.zeros(n)
            sa[a] = h
            sb[b] = h
            Gpp = g_at(x + sa + sb)
            Gpm = g_at(x + sa - sb)
            Gmp = g_at(x - sa + sb)
            Gmm = g_at(x - sa - sb)
            d2G[a, b] = d2G[b, a] = (Gpp - Gpm - Gmp + Gmm) / (4 * h * h)
    ginv = np.linalg.inv(G0)
    low = 0.5 * (np.transpose(dG, (2, 0, 1)) + np.transpose(dG, (2, 1, 0)) - dG)
    gamma = np.einsum("ka,aij->kij", ginv, low)
    dginv = -np.einsum("ka,mab,bl->mkl", ginv, dG, ginv)
    dlow = 0.5 * (np.transpose(d2G, (0, 3, 1, 2)) + np.transpose(d2G, (0, 3, 2, 1))
                  - d2G)
    dgamma = (np.einsum("mka,aij->mkij", dginv, low)
              + np.einsum("ka,maij->mkij", ginv, dlow))
    term_d = np.einsum("iljk->lkij", dgamma) - np.einsum("jlik->lkij", dgamma)
    term_g = (np.einsum("lim,mjk->lkij", gamma, gamma)
              - np.einsum("ljm,mik->lkij", gamma, gamma))
    return term_d + term_g


def verify_totally_geodesic(pf, tube, samples=50, seed=0, duration=1.0,
                            steps=256, launches=8):
    """Totally geodesic certificate for the submanifold under a deformed metric.

    (a) algebraic: the lowered Christoffel pairing of two tangential
    directions against a transverse one, at sampled submanifold points;
    (b) dynamic: geodesics launched tangentially must keep their transverse
    radius below the drift bound.
    """
    k = tube.k
    n = tube.chart.dim
    feet = probe_points(tube.chart.box[:k], samples, seed=seed, margin=0.08)
    alg = 0.0
    h = 1e-4 * tube.epsilon
    for foot_t in feet:
        x = np.zeros(n)
        x[:k] = foot_t
        x[k:] = tube.center
        _, dG, _ = _fd_metric_derivatives(pf, x, h)
        low = 0.5 * (np.transpose(dG, (2, 0, 1)) + np.transpose(dG, (2, 1, 0)) - dG)
        alg = max(alg, float(np.max(np.abs(low[k:, :k, :k]))))

    rng = np.random.default_rng(seed + 1)
    drift = 0.0
    launch_records = []
    hstep = duration / steps
    for li in range(launches):
        foot_t = feet[li * max(1, len(feet) // max(launches, 1)) % len(feet)]
        x = np.zeros(n)
        x[:k] = foot_t
        x[k:] = tube.center
        G = pf.values(x, region=RegionTag.InnerDisk)
        v = np.zeros(n)
        vt = rng.standard_normal(k)
        v[:k] = vt / math.sqrt(vt @ G[:k, :k] @ vt)

        def acc(pt, vel):
            gam = deformed_christoffel(pf, pt)
            return -np.einsum("kij,i,j->k", gam, vel, vel)

        xs, vs = x.copy(), v.copy()
        path_drift = 0.0
        complete = True
        for _ in range(steps):
            try:
                k1x, k1v = vs, acc(xs, vs)
                k2x, k2v = vs + 0.5 * hstep * k1v, acc(xs + 0.5 * hstep * k1x, vs + 0.5 * hstep * k1v)
                k3x, k3v = vs + 0.5 * hstep * k2v, acc(xs + 0.5 * hstep * k2x, vs + 0.5 * hstep * k2v)
                k4x, k4v = vs + hstep * k3v, acc(xs + hstep * k3x, vs + hstep * k3v)
            except (BoundaryGuardViolation, SingularMetric):
                complete = False
                break
            xn = xs + (hstep / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
            vn = vs + (hstep / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
            if not tube.chart.contains(xn):
                complete = False
                break
            xs, vs = xn, vn
            path_drift = max(path_drift, radial_decompose(tube, xs).t)
        drift = max(drift, path_drift)
        launch_records.append({"foot": tuple(x), "velocity": tuple(v),
                               "drift": path_drift, "complete": complete})
    return {"algebraic_residual": alg, "drift": drift,
            "launches": launch_records, "samples": samples}


def _block_pattern(idx, k):
    return "".join("t" if i >= k else "b" for i in idx)


def verify_flat_inner(pf, tube, samples=20, seed=0):
    """Max curvature residual of the deformed metric over inner-disk samples.

    Residuals are grouped by the tangential/transverse pattern of the four
    indices so partial vanishing is visible; 'tttt' is the all-transverse
    block, 'full' the overall max.
    """
    pts = region_samples(tube, RegionTag.InnerDisk, samples, seed=seed)
    k = tube.k
    n = tube.chart.dim
    by_block = {}
    for x in pts:
        R = deformed_curvature(pf, x)
        for l in range(n):
            for kk in range(n):
                for i in range(n):
                    for j in range(n):
                        pat = _block_pattern((l, kk, i, j), k)
                        v = abs(R[l, kk, i, j])
                        by_block[pat] = max(by_block.get(pat, 0.0), v)
    full = max(by_block.values()) if by_block else 0.0
    return {"max_by_block": by_block,
            "transverse_block": by_block.get("t" * 4, 0.0),
            "full": full, "samples": len(pts)}


def verify_parallel_J(pf_metric, pf_acs, tube, region=RegionTag.InnerDisk,
                      samples=20, seed=0, step_frac=1e-4):
    """Max norm of the deformed covariant derivative of a deformed (1,1) field."""
    pts = region_samples(tube, region, samples, seed=seed)
    n = tube.chart.dim
    h = step_frac * tube.epsilon
    worst = 0.0
    records = []
    for x in pts:
        x = np.asarray(x, dtype=float)
        rp = radial_decompose(tube, x)
        gamma = deformed_christoffel(pf_metric, x, step_frac=step_frac)
        J = pf_acs.values(x, region=rp.tag)
        dJ = np.empty((n, n, n))
        for a in range(n):
            sh = np.zeros(n)
            sh[a] = h
            dJ[a] = (pf_acs.values(x + sh, region=rp.tag)
                     - pf_acs.values(x - sh, region=rp.tag)) / (2 * h)
        nab = (dJ + np.einsum("kal,lj->akj", gamma, J)
               - np.einsum("laj,kl->akj", gamma, J))
        r = float(np.max(np.abs(nab)))
        records.append({"point": tuple(x), "residual": r})
        worst = max(worst, r)
    return {"max_residual": worst, "region": str(region.value),
            "points": records, "samples": len(pts)}


# -- bundle tubes ----------------------------------------------------------------------


@dataclass
class KaehlerTube:
    """Deformed Sasaki data on the null-section tube of a tangent bundle."""
    bundle: object
    tube: AdaptedTube
    metric: PiecewiseField
    acs: dict = field(default_factory=dict)

    def fermi_report(self, samples=6, steps=192, seed=0):
        return verify_fermi_chart(self.bundle.chart, self.tube,
                                  samples=samples, steps=steps, seed=seed)

    def export_inner(self, name=None, shrink=0.9, acs_index=1):
        """Inner-region data as a smooth chart of dimension 2n with one ACS.

        Inside the inner disk all frozen components depend only on the base
        coordinates, so substituting v = 0 into the component expressions
        yields a smooth chart carrying the deformed metric and the structure
        selected by ``acs_index``.  The fiber box is shrunk so that every
        point of the box stays inner.
        """
        B = self.bundle
        n = B.n
        subs = {n + i: 0.0 for i in range(n)}
        eps = self.tube.epsilon
        lam_max = 0.0
        for p in B.base.probe_points(40, seed=1):
            lam_max = max(lam_max, float(np.max(np.linalg.eigvalsh(B.base.metric_at(p)))))
        r = shrink * (0.5 * eps) / math.sqrt(n * lam_max)
        if r <= 0:
            raise EmptyInnerTube("no room for an inner fiber box")
        g = B.chart.metric
        upper = {}
        for i in range(2 * n):
            for j in range(i, 2 * n):
                e = sx.substitute(g[i][j], subs)
                if not e.is_const(0.0):
                    upper[(i, j)] = e
        box = list(B.base.box) + [(-r, r)] * n
        acs_grid = None
        if acs_index in self.acs:
            src = self.acs[acs_index].source
            acs_grid = [[sx.substitute(src[i][j], subs) for j in range(2 * n)]
                        for i in range(2 * n)]
        return ChartManifold(2 * n, upper, box, acs=acs_grid,
                             name=name or f"inner({B.chart.name})")


def build_kaehler_tube(base, epsilon=0.4, v_max=1.0, base_acs="auto"):
    """Sasaki bundle over the base, null-section tube, and deformed fields.

    ``base_acs`` may be an explicit grid, None (structure 1 only), or "auto"
    (use the base chart's ACS when present).  The deformed metric and all
    available bundle structures are returned as piecewise fields on the tube.
    """
    B = build_sasaki(base, v_max=v_max)
    if base_acs == "auto":
        base_acs = base.acs
    tube = AdaptedTube(chart=B.chart, k=base.dim, epsilon=epsilon)
    js = build_bundle_acs(B, base_acs)
    gbar = deform_field(B.chart.metric, tube)
    acs = {a: deform_field(grid, tube) for a, grid in js.items()}
    return KaehlerTube(bundle=B, tube=tube, metric=gbar, acs=acs)


def build_hyper_stage(base, epsilon=0.4, stage2_epsilon=0.4, samples=20,
                      seed=0, v_max=1.0):
    """Iterated construction: bundle tube over the base, then over its inner export.

    Stage 1 carries structure 1 only; its inner region is exported as a smooth
    chart whose ACS feeds stage 2, which then carries the full structure
    triple.  The report collects quaternion-relation and isometry residuals of
    the frozen stage-2 triple plus the parallelism residuals of all three
    structures at sampled stage-2 inner points.
    """
    stage1 = build_kaehler_tube(base, epsilon=epsilon, v_max=v_max, base_acs=None)
    export = stage1.export_inner()
    stage2 = build_kaehler_tube(export, epsilon=stage2_epsilon, v_max=v_max,
                                base_acs="auto")
    pts = region_samples(stage2.tube, RegionTag.InnerDisk, samples, seed=seed)
    m = export.dim * 2
    quat = 0.0
    iso = 0.0
    for x in pts:
        vals = {}
        for a in (1, 2, 3):
            v, _ = stage2.acs[a].evaluate(x)
            vals[a] = v
        G, _ = stage2.metric.evaluate(x)
        I = np.eye(m)
        quat = max(quat,
                   float(np.max(np.abs(vals[1] @ vals[2] - vals[3]))),
                   float(np.max(np.abs(vals[2] @ vals[1] + vals[3]))),
                   *(float(np.max(np.abs(vals[a] @ vals[a] + I))) for a in (1, 2, 3)))
        iso = max(iso, *(float(np.max(np.abs(vals[a].T @ G @ vals[a] - G)))
                         for a in (1, 2, 3)))
    parallel = {a: verify_parallel_J(stage2.metric, stage2.acs[a], stage2.tube,
                                     region=RegionTag.InnerDisk,
                                     samples=samples, seed=seed)["max_residual"]
                for a in (1, 2, 3)}
    return {
        "stage1": stage1, "export": export, "stage2": stage2,
        "quaternion_residual": quat, "isometry_residual": iso,
        "parallel_residuals": parallel, "samples": len(pts),
    }
