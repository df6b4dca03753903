"""Batch verification suites with machine-readable reports.

A suite is a named list of checks, each producing a record with a residual,
a tolerance, and a pass flag.  Identical configurations (including the seed)
reproduce identical residuals.  Reports serialize to JSON (replayable from
their own config echo) and to CSV with plot-ready columns; the report path
can additionally render a matplotlib figure next to the table.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from . import scalar as sx
from .chart import (christoffel, curvature, load_manifest, orthonormal_frame,
                    probe_points, rotation_acs, standard_block_acs,
                    verify_fermi_chart)
from .bundle import (build_bundle_acs, build_sasaki, check_bracket_identities,
                     connection_map, lift, lift_frame)
from .hermitian import (CLASS_LABELS, bundle_h_direct, gh_classify,
                        h1_closed_form, h2_closed_form, lift_pattern)
from .tube import (AdaptedTube, RegionTag, build_hyper_stage,
                   build_kaehler_tube, deform_field, deformed_christoffel,
                   radial_decompose, radial_profile, region_samples,
                   verify_flat_inner, verify_parallel_J,
                   verify_totally_geodesic)
from .errors import ManifestError, MissingBaseACS, UnknownSuite

__all__ = [
    "SuiteConfig", "CheckRecord", "RunReport", "run_suite", "list_manifolds",
    "resolve_manifold", "export_table", "render_figure", "SUITE_IDS",
    "ENGINE_VERSION",
]

ENGINE_VERSION = "0.1.0"
SUITE_IDS = ("sasaki", "h-cases", "deformation", "kaehler-tube", "hyper",
             "classify", "all")

_CATALOG_ENV = "TUBEGEOM_MANIFOLDS"


def _catalog_dir():
    override = os.environ.get(_CATALOG_ENV)
    if override:
        return override
    return os.path.join(os.path.dirname(__file__), "manifolds")


def list_manifolds():
    """Catalog of shipped (or overridden) manifold manifests."""
    cat = _catalog_dir()
    if not os.path.isdir(cat):
        raise ManifestError(f"catalog directory not found: {cat}")
    out = []
    for fn in sorted(os.listdir(cat)):
        if not fn.endswith(".json"):
            continue
        path = os.path.join(cat, fn)
        m = load_manifest(path)
        out.append({"name": m.name or os.path.splitext(fn)[0], "dim": m.dim,
                    "acs": m.acs is not None, "path": path})
    return out


def resolve_manifold(name_or_path):
    """Load a manifold by catalog name or manifest path and check invariants."""
    if os.path.sep in str(name_or_path) or str(name_or_path).endswith(".json"):
        m = load_manifest(name_or_path)
    else:
        matches = [e for e in list_manifolds() if e["name"] == name_or_path]
        if not matches:
            names = ", ".join(e["name"] for e in list_manifolds())
            raise ManifestError(
                f"unknown manifold {name_or_path!r}; catalog: {names}")
        m = load_manifest(matches[0]["path"])
    m.validate(samples=20)
    return m


@dataclass
class SuiteConfig:
    manifold: str
    suite: str
    tol: float = None
    samples: int = 50
    seed: int = 0
    out: str = None
    fmt: str = "json"
    plot: bool = False

    def to_dict(self):
        return asdict(self)


@dataclass
class CheckRecord:
    name: str
    anchor: str
    residual: float
    tolerance: float = None
    passed: bool = True
    comparison: str = "le"
    region: str = None
    t: float = None
    value: float = None

    @staticmethod
    def make(name, anchor, residual, tolerance, comparison="le", **kw):
        residual = float(residual)
        if tolerance is None:
            ok = True
        elif comparison == "le":
            ok = residual <= tolerance
        elif comparison == "ge":
            ok = residual >= tolerance
        else:
            raise ValueError("comparison must be 'le' or 'ge'")
        return CheckRecord(name=name, anchor=anchor, residual=residual,
                           tolerance=tolerance, passed=bool(ok),
                           comparison=comparison, **kw)


@dataclass
class RunReport:
    suite: str
    manifold: str
    records: list
    wall_time_s: float
    engine_version: str
    config: dict
    extras: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(r.passed for r in self.records)

    def to_json(self):
        data = {
            "suite": self.suite, "manifold": self.manifold,
            "records": [asdict(r) for r in self.records],
            "wall_time_s": self.wall_time_s,
            "engine_version": self.engine_version,
            "config": self.config, "extras": self.extras,
            "passed": self.passed,
        }
        return json.dumps(data, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        recs = [CheckRecord(**r) for r in data["records"]]
        return cls(suite=data["suite"], manifold=data["manifold"], records=recs,
                   wall_time_s=data["wall_time_s"],
                   engine_version=data["engine_version"],
                   config=data["config"], extras=data.get("extras", {}))


# -- helpers -----------------------------------------------------------------------


def _acs_for(m):
    """Structure grid for a manifold: its own, or the frame rotation in dim 2,
    or the standard block in flat even dimensions."""
    if m.acs is not None:
        return m.acs
    if m.dim == 2:
        return rotation_acs(m)
    if m.dim % 2 == 0:
        return standard_block_acs(m.dim)
    raise MissingBaseACS(f"no almost complex structure available on {m.name}")


def _base_is_curved(m, probes=12, seed=0, thresh=1e-9):
    worst = 0.0
    for p in m.probe_points(probes, seed=seed):
        worst = max(worst, float(np.max(np.abs(curvature(m, p)))))
    return worst > thresh


def _default_tube(m, epsilon=0.4):
    if m.dim < 2:
        raise ManifestError("deformation suites need dimension at least 2")
    lo, hi = m.box[-1]
    center = (0.5 * (lo + hi),)
    return AdaptedTube(chart=m, k=m.dim - 1, epsilon=epsilon, center=center)


def _frozen_metric_constant(pf, tube, seed=0, probes=8, h=1e-4):
    """True when the inner-branch metric has no tangential variation either."""
    k = tube.k
    feet = probe_points(tube.chart.box[:k], probes, seed=seed, margin=0.1)
    n = tube.chart.dim
    for foot_t in feet:
        x = np.zeros(n)
        x[:k] = foot_t
        x[k:] = tube.center
        for a in range(k):
            sh = np.zeros(n)
            sh[a] = h
            d = np.max(np.abs(pf.values(x + sh, region=RegionTag.InnerDisk)
                              - pf.values(x - sh, region=RegionTag.InnerDisk)))
            if d > 1e-12:
                return False
    return True


# -- suite implementations -----------------------------------------------------------


def _suite_sasaki(m, cfg):
    recs = []
    tol = cfg.tol or 1e-9
    B = build_sasaki(m)
    n = m.dim
    pts = B.probe_points(min(cfg.samples, 100), seed=cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    rec_worst = orth_worst = gram_worst = rank_worst = 0.0
    for U in pts:
        G = B.chart.metric_at(U)
        gb = m.metric_at(U[:n])
        LF = lift_frame(B, U)
        M = LF.matrix
        gram_worst = max(gram_worst, float(np.max(np.abs(M.T @ G @ M - np.eye(2 * n)))))
        H, V = M[:, :n], M[:, n:]
        orth_worst = max(orth_worst, float(np.max(np.abs(H.T @ G @ V))))
        s = np.linalg.svd(M, compute_uv=False)
        rank_worst = max(rank_worst, float(max(0.0, 1e-6 - s[-1])))
        for _ in range(2):
            W1 = rng.standard_normal(2 * n)
            W2 = rng.standard_normal(2 * n)
            lhs = W1 @ G @ W2
            rhs = (W1[:n] @ gb @ W2[:n]
                   + connection_map(B, U, W1) @ gb @ connection_map(B, U, W2))
            rec_worst = max(rec_worst, abs(lhs - rhs))
    recs.append(CheckRecord.make("sasaki-reconstruction",
                                 "sasaki-metric/splitting-identity",
                                 rec_worst, tol))
    recs.append(CheckRecord.make("horizontal-vertical-orthogonality",
                                 "sasaki-metric/subspace-orthogonality",
                                 orth_worst, tol))
    recs.append(CheckRecord.make("lift-orthonormality",
                                 "sasaki-metric/lift-frame", gram_worst, tol))
    recs.append(CheckRecord.make("lift-frame-rank",
                                 "sasaki-metric/splitting-rank", rank_worst, 1e-12))
    null_worst = 0.0
    for p in m.probe_points(20, seed=cfg.seed):
        U0 = tuple(p) + (0.0,) * n
        G0 = B.chart.metric_at(U0)
        gb = m.metric_at(p)
        want = np.block([[gb, np.zeros((n, n))], [np.zeros((n, n)), gb]])
        null_worst = max(null_worst, float(np.max(np.abs(G0 - want))))
    recs.append(CheckRecord.make("null-section-block-metric",
                                 "sasaki-metric/null-section-restriction",
                                 null_worst, 1e-10))

    # bracket identities with coordinate fields
    bt = 1e-6 if cfg.tol is None else cfg.tol
    worst = {"vertical_vertical": 0.0, "horizontal_vertical": 0.0,
             "projection": 0.0, "curvature": 0.0}
    zero, one = sx.const(0.0), sx.const(1.0)
    fields = [tuple(one if i == a else zero for i in range(n)) for a in range(n)]
    bpts = B.probe_points(min(cfg.samples, 50), seed=cfg.seed + 1)
    for idx, U in enumerate(bpts):
        X = fields[idx % n]
        Y = fields[(idx + 1) % n]
        res = check_bracket_identities(B, X, Y, U)
        for key in worst:
            worst[key] = max(worst[key], res[key])
    anchors = {
        "vertical_vertical": "lift-brackets/vertical-vertical",
        "horizontal_vertical": "lift-brackets/mixed-lift",
        "projection": "lift-brackets/base-projection",
        "curvature": "lift-brackets/curvature-part",
    }
    for key, a in anchors.items():
        recs.append(CheckRecord.make(f"bracket-{key.replace('_', '-')}", a,
                                     worst[key], bt))

    # structure triple on the bundle
    try:
        baseJ = _acs_for(m)
    except MissingBaseACS:
        baseJ = None
    js = build_bundle_acs(B, baseJ)
    sq = iso = anti = 0.0
    spts = B.probe_points(20, seed=cfg.seed + 2)
    for U in spts:
        G = B.chart.metric_at(U)
        mats = {a: np.array([[sx.evaluate(js[a][i][j], U) for j in range(2 * n)]
                             for i in range(2 * n)]) for a in js}
        for a, Jm in mats.items():
            sq = max(sq, float(np.max(np.abs(Jm @ Jm + np.eye(2 * n)))))
            iso = max(iso, float(np.max(np.abs(Jm.T @ G @ Jm - G))))
        if len(mats) == 3:
            anti = max(anti,
                       float(np.max(np.abs(mats[1] @ mats[2] + mats[2] @ mats[1]))),
                       float(np.max(np.abs(mats[1] @ mats[2] - mats[3]))))
    recs.append(CheckRecord.make("structure-squares", "bundle-structures/square",
                                 sq, 1e-10))
    recs.append(CheckRecord.make("structure-isometry", "bundle-structures/isometry",
                                 iso, 1e-10))
    if len(js) == 3:
        recs.append(CheckRecord.make("structure-quaternion-relations",
                                     "bundle-structures/quaternion-relations",
                                     anti, 1e-9))
    return recs, {}


def _suite_h_cases(m, cfg):
    recs = []
    tol = cfg.tol or 1e-6
    B = build_sasaki(m)
    baseJ = _acs_for(m)
    js = build_bundle_acs(B, baseJ)
    n = m.dim
    rng = np.random.default_rng(cfg.seed)
    configs = max(10, min(cfg.samples, 50))
    pts = B.probe_points(configs, seed=cfg.seed)
    worst = {(a, c): 0.0 for a in (1, 2) for c in range(1, 9)}
    for U in pts:
        x = U[:n]
        E = orthonormal_frame(m, x).frame
        idx = rng.integers(0, n, size=3)
        sgn = rng.choice([-1.0, 1.0], size=3)
        X, Y, Z = (sgn[i] * E[:, idx[i]] for i in range(3))
        for case in range(1, 9):
            pat = lift_pattern(case)
            W = [lift(B, U, V, "horizontal" if p == "h" else "vertical")
                 for V, p in zip((X, Y, Z), pat)]
            for a in (1, 2):
                closed = (h1_closed_form(case, B, U, X, Y, Z) if a == 1
                          else h2_closed_form(case, B, U, X, Y, Z, baseJ))
                direct = bundle_h_direct(B, js[a], U, *W, check=False)
                worst[(a, case)] = max(worst[(a, case)], abs(direct - closed))
    for a in (1, 2):
        for case in range(1, 9):
            recs.append(CheckRecord.make(
                f"case-{case}-structure-{a}",
                f"bundle-h-cases/structure-{a}/pattern-{''.join(lift_pattern(case))}",
                worst[(a, case)], tol))

    if m.name == "sphere_fermi":
        U = (0.0, 0.0, 0.0, 0.1)
        e1 = np.array([1.0, 0.0])
        e2 = np.array([0.0, 1.0])
        W = [lift(B, U, e1, "horizontal"), lift(B, U, e2, "horizontal"),
             lift(B, U, e1, "vertical")]
        direct = bundle_h_direct(B, js[1], U, *W, check=False)
        closed = h1_closed_form(2, B, U, e1, e2, e1)
        recs.append(CheckRecord.make("case-2-fixture-magnitude",
                                     "bundle-h-cases/unit-sphere-fixture",
                                     abs(abs(direct) - 0.025), tol, value=direct))
        recs.append(CheckRecord.make("case-2-fixture-oracle",
                                     "bundle-h-cases/unit-sphere-fixture",
                                     abs(direct - closed), tol, value=closed))

    # Kaehler-iff-flat dichotomy
    curved = _base_is_curved(m, seed=cfg.seed)
    hmax = 0.0
    for U in B.probe_points(20, seed=cfg.seed + 3):
        x = U[:n]
        E = orthonormal_frame(m, x).frame
        for case in (2, 4):
            pat = lift_pattern(case)
            W = [lift(B, U, E[:, i % n], "horizontal" if p == "h" else "vertical")
                 for i, p in enumerate(pat)]
            hmax = max(hmax, abs(bundle_h_direct(B, js[1], U, *W, check=False)))
    if curved:
        recs.append(CheckRecord.make("structure-1-not-kaehler",
                                     "bundle-h-cases/kaehler-dichotomy",
                                     hmax, 1e-3, comparison="ge"))
    else:
        recs.append(CheckRecord.make("structure-1-kaehler-flat-base",
                                     "bundle-h-cases/kaehler-dichotomy",
                                     hmax, 1e-9))
    return recs, {}


def _suite_deformation(m, cfg):
    recs = []
    eps = 0.4
    tube = _default_tube(m, epsilon=eps)
    gbar = deform_field(m.metric, tube)
    n = m.dim
    ctr = tube.center[0]

    # radial profile fixtures
    for t, want in ((0.1, 0.0), (0.3, 0.2), (0.4, 0.4), (0.5, 0.5)):
        got = radial_profile(t, eps)
        recs.append(CheckRecord.make(f"radial-profile-t{t}",
                                     "deformation/radial-profile",
                                     abs(got - want), 1e-15, t=t, value=got))

    # metric profile rows along the transverse axis (plot-ready)
    feet = probe_points(m.box[:n - 1], 1, seed=cfg.seed, margin=0.3)[0]
    for t in (0.25 * eps, 0.75 * eps, 1.25 * eps):
        x = np.zeros(n)
        x[:n - 1] = feet
        x[-1] = ctr + t
        if not m.contains(x):
            continue
        rp = radial_decompose(tube, x)
        vals, tag = gbar.evaluate(x)
        rho = radial_profile(rp.t, eps)
        y = rp.foot.copy()
        y[-1] = ctr + rho * rp.xi[0] if rp.t > 0 else ctr
        expected = sx.evaluate(m.metric[0][0], tuple(y))
        recs.append(CheckRecord.make(
            f"metric-profile-t{t:g}", "deformation/component-freeze",
            abs(vals[0, 0] - expected), 1e-12,
            region=str(tag.value), t=rp.t, value=float(vals[0, 0])))

    # interface continuity (one-sided branches agree on the interfaces)
    cont = 0.0
    for foot_t in probe_points(m.box[:n - 1], 6, seed=cfg.seed + 1, margin=0.2):
        for t, sides in ((0.5 * eps, (RegionTag.InnerDisk, RegionTag.Annulus)),
                         (eps, (RegionTag.Annulus, RegionTag.Exterior))):
            x = np.zeros(n)
            x[:n - 1] = foot_t
            x[-1] = ctr + t
            if not m.contains(x):
                continue
            va, _ = gbar.evaluate(x, region=sides[0])
            vb, _ = gbar.evaluate(x, region=sides[1])
            cont = max(cont, float(np.max(np.abs(va - vb))))
    recs.append(CheckRecord.make("interface-continuity",
                                 "deformation/continuity", cont, 1e-8))

    # region partition: every probe point carries exactly one tag
    bad = 0
    tagged = {RegionTag.InnerDisk: 0, RegionTag.Annulus: 0,
              RegionTag.Exterior: 0, RegionTag.BoundaryGuard: 0}
    for p in m.probe_points(200, seed=cfg.seed + 2):
        tag = radial_decompose(tube, p).tag
        if tag not in tagged:
            bad += 1
        else:
            tagged[tag] += 1
    recs.append(CheckRecord.make("region-partition", "deformation/region-partition",
                                 bad, 0))

    # submanifold isometry
    iso = 0.0
    for foot_t in probe_points(m.box[:n - 1], 12, seed=cfg.seed + 3, margin=0.1):
        x = np.zeros(n)
        x[:n - 1] = foot_t
        x[-1] = ctr
        vals, _ = gbar.evaluate(x)
        iso = max(iso, float(np.max(np.abs(vals - m.metric_at(tuple(x))))))
    recs.append(CheckRecord.make("submanifold-isometry",
                                 "deformation/boundary-values", iso, 1e-12))

    # deformed christoffels match the source outside the tube
    ext = 0.0
    try:
        pts = region_samples(tube, RegionTag.Exterior, 6, seed=cfg.seed + 4)
    except Exception:
        pts = []
    for x in pts:
        ext = max(ext, float(np.max(np.abs(deformed_christoffel(gbar, x)
                                           - christoffel(m, x)))))
    recs.append(CheckRecord.make("exterior-untouched",
                                 "deformation/exterior-identity", ext, 1e-6))

    # theorem checks on this tube
    tg = verify_totally_geodesic(gbar, tube, samples=min(cfg.samples, 50),
                                 seed=cfg.seed, launches=4)
    recs.append(CheckRecord.make("totally-geodesic-algebraic",
                                 "tube-theorems/tangential-connection",
                                 tg["algebraic_residual"], 1e-8))
    recs.append(CheckRecord.make("totally-geodesic-drift",
                                 "tube-theorems/geodesic-drift", tg["drift"], 1e-5))
    fi = verify_flat_inner(gbar, tube, samples=min(cfg.samples, 12), seed=cfg.seed)
    recs.append(CheckRecord.make("inner-curvature-transverse-block",
                                 "tube-theorems/inner-flatness",
                                 fi["transverse_block"], 1e-6,
                                 region="inner"))
    frozen_const = _frozen_metric_constant(gbar, tube, seed=cfg.seed)
    recs.append(CheckRecord.make("inner-curvature-full",
                                 "tube-theorems/inner-flatness",
                                 fi["full"], 1e-6 if frozen_const else None,
                                 region="inner"))

    # adaptedness precheck (reported last: failures flag the chart, not the math)
    fr = verify_fermi_chart(m, tube, samples=6, steps=192, seed=cfg.seed)
    recs.append(CheckRecord.make("fermi-adaptedness", "adapted-chart/ray-geodesics",
                                 fr["max_deviation"], 1e-5))
    extras = {"region_counts": {str(k.value): v for k, v in tagged.items()}}
    return recs, extras


def _suite_kaehler_tube(m, cfg):
    recs = []
    kt = build_kaehler_tube(m, epsilon=0.4)
    fr = kt.fermi_report(samples=4, steps=192, seed=cfg.seed)
    recs.append(CheckRecord.make("fermi-adaptedness", "adapted-chart/ray-geodesics",
                                 fr["max_deviation"], 1e-5))
    tg = verify_totally_geodesic(kt.metric, kt.tube,
                                 samples=min(cfg.samples, 50), seed=cfg.seed,
                                 launches=3)
    recs.append(CheckRecord.make("totally-geodesic-algebraic",
                                 "tube-theorems/tangential-connection",
                                 tg["algebraic_residual"], 1e-8))
    recs.append(CheckRecord.make("totally-geodesic-drift",
                                 "tube-theorems/geodesic-drift", tg["drift"], 1e-5))
    fi = verify_flat_inner(kt.metric, kt.tube, samples=min(cfg.samples, 6),
                           seed=cfg.seed)
    recs.append(CheckRecord.make("inner-curvature-transverse-block",
                                 "tube-theorems/inner-flatness",
                                 fi["transverse_block"], 1e-6, region="inner"))
    frozen_const = _frozen_metric_constant(kt.metric, kt.tube, seed=cfg.seed)
    recs.append(CheckRecord.make("inner-curvature-full",
                                 "tube-theorems/inner-flatness", fi["full"],
                                 1e-6 if frozen_const else None, region="inner"))
    pj = verify_parallel_J(kt.metric, kt.acs[1], kt.tube,
                           samples=min(cfg.samples, 50), seed=cfg.seed)
    recs.append(CheckRecord.make("deformed-structure-parallel-inner",
                                 "tube-theorems/parallel-structure",
                                 pj["max_residual"], cfg.tol or 1e-5,
                                 region="inner"))
    curved = _base_is_curved(m, seed=cfg.seed)
    pj_ext = verify_parallel_J(kt.metric, kt.acs[1], kt.tube,
                               region=RegionTag.Exterior, samples=4,
                               seed=cfg.seed)
    if curved:
        recs.append(CheckRecord.make("undeformed-structure-control",
                                     "tube-theorems/exterior-control",
                                     pj_ext["max_residual"], 1e-3,
                                     comparison="ge", region="exterior"))
    else:
        recs.append(CheckRecord.make("undeformed-structure-flat-base",
                                     "tube-theorems/exterior-control",
                                     pj_ext["max_residual"], 1e-9,
                                     region="exterior"))
    extras = {}
    if m.acs is not None:
        base_rep = gh_classify(m, points=5, vectors=3, tol=1e-6, seed=cfg.seed)
        inner = kt.export_inner(acs_index=2)
        tube_rep = gh_classify(inner, points=5, vectors=3, tol=1e-6,
                               seed=cfg.seed)
        same = base_rep.minimal_classes() == tube_rep.minimal_classes()
        recs.append(CheckRecord.make("tube-class-preservation",
                                     "classification/tube-preservation",
                                     0.0 if same else 1.0, 0.0))
        extras["base_minimal_classes"] = base_rep.minimal_classes()
        extras["tube_minimal_classes"] = tube_rep.minimal_classes()
    return recs, extras


def _suite_hyper(m, cfg):
    if m.dim > 2:
        raise ManifestError(
            "hyper suite runs on bases of dimension 1 or 2 at desk scale "
            f"(got dim {m.dim})")
    recs = []
    rep = build_hyper_stage(m, samples=min(cfg.samples, 20), seed=cfg.seed)
    recs.append(CheckRecord.make("stage2-quaternion-relations",
                                 "hyper-stage/quaternion-relations",
                                 rep["quaternion_residual"], 1e-8))
    recs.append(CheckRecord.make("stage2-structure-isometry",
                                 "hyper-stage/isometry",
                                 rep["isometry_residual"], 1e-8))
    for a in (1, 2, 3):
        recs.append(CheckRecord.make(f"stage2-structure-{a}-parallel-inner",
                                     "hyper-stage/parallel-structures",
                                     rep["parallel_residuals"][a],
                                     cfg.tol or 1e-4, region="inner"))
    extras = {"stage2_dim": rep["stage2"].bundle.chart.dim}
    return recs, extras


def _suite_classify(m, cfg):
    work = m if m.acs is not None else m.with_acs(_acs_for(m), name=m.name)
    rep = gh_classify(work, points=max(6, min(cfg.samples, 30)), vectors=5,
                      tol=cfg.tol or 1e-6, seed=cfg.seed)
    recs = [CheckRecord.make("dimension-validity", "classification/table-domain",
                             0.0, None, value=float(rep.dim_valid))]
    sets = dict(CLASS_LABELS)
    mono_bad = 0
    for label, comp in CLASS_LABELS:
        entry = rep.classes[label]
        recs.append(CheckRecord.make(f"class-{label}", "classification/sixteen-classes",
                                     entry["residual"], None,
                                     value=1.0 if entry["member"] else 0.0))
        for l2, s2 in CLASS_LABELS:
            if sets[label] <= s2 and entry["member"] and not rep.classes[l2]["member"]:
                mono_bad += 1
    recs.append(CheckRecord.make("lattice-monotonicity",
                                 "classification/lattice-order", mono_bad, 0))
    return recs, {"classification": json.loads(rep.to_json()),
                  "minimal_classes": rep.minimal_classes()}


_SUITES = {
    "sasaki": _suite_sasaki,
    "h-cases": _suite_h_cases,
    "deformation": _suite_deformation,
    "kaehler-tube": _suite_kaehler_tube,
    "hyper": _suite_hyper,
    "classify": _suite_classify,
}


def run_suite(cfg):
    """Execute a verification suite and return its report."""
    if cfg.suite not in SUITE_IDS:
        raise UnknownSuite(f"unknown suite {cfg.suite!r}; choose from {SUITE_IDS}")
    m = resolve_manifold(cfg.manifold)
    t0 = time.time()
    records = []
    extras = {}
    if cfg.suite == "all":
        parts = ["sasaki", "deformation", "kaehler-tube", "classify"]
        try:
            _acs_for(m)
            parts.insert(1, "h-cases")
        except MissingBaseACS:
            pass
        if m.dim <= 2:
            parts.append("hyper")
        for part in parts:
            part_recs, part_extras = _SUITES[part](m, cfg)
            for r in part_recs:
                r.name = f"{part}/{r.name}"
            records.extend(part_recs)
            if part_extras:
                extras[part] = part_extras
    else:
        records, extras = _SUITES[cfg.suite](m, cfg)
    report = RunReport(suite=cfg.suite, manifold=m.name, records=records,
                       wall_time_s=time.time() - t0,
                       engine_version=ENGINE_VERSION, config=cfg.to_dict(),
                       extras=extras)
    if cfg.out:
        export_table(report, cfg.fmt, cfg.out)
        if cfg.plot:
            render_figure(report, os.path.splitext(cfg.out)[0] + ".png")
    return report


_CSV_COLUMNS = ("name", "anchor", "region", "t", "value", "residual",
                "tolerance", "comparison", "passed")


def export_table(report, fmt, path):
    """Write the report as JSON or CSV (plot-ready region/t/value columns)."""
    if fmt == "json":
        with open(path, "w") as fh:
            fh.write(report.to_json())
            fh.write("\n")
        return path
    if fmt == "csv":
        import csv
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(_CSV_COLUMNS)
            for r in report.records:
                d = asdict(r)
                w.writerow([d[c] if d[c] is not None else "" for c in _CSV_COLUMNS])
        return path
    raise ValueError("format must be 'json' or 'csv'")


def render_figure(report, path):
    """Render the report to a PNG next to the table output.

    Profile records (with t/value) become a deformation profile plot; other
    suites get a residual-vs-tolerance chart on a log scale.
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    profile = [r for r in report.records if r.t is not None and r.value is not None]
    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    if len(profile) >= 3:
        colors = {"inner": "tab:blue", "annulus": "tab:orange",
                  "exterior": "tab:green", None: "tab:gray"}
        for r in profile:
            ax.scatter(r.t, r.value, color=colors.get(r.region, "tab:gray"),
                       label=r.region, s=36)
        seen = set()
        handles, labels = ax.get_legend_handles_labels()
        uniq = [(h, l) for h, l in zip(handles, labels)
                if not (l in seen or seen.add(l))]
        if uniq:
            ax.legend(*zip(*uniq), title="region", fontsize=8)
        ax.set_xlabel("transverse radius t")
        ax.set_ylabel("value")
        ax.set_title(f"{report.manifold}: {report.suite} profile")
    else:
        names = [r.name for r in report.records]
        residuals = [max(r.residual, 1e-18) for r in report.records]
        colors = ["tab:green" if r.passed else "tab:red" for r in report.records]
        ypos = np.arange(len(names))
        ax.barh(ypos, residuals, color=colors)
        for i, r in enumerate(report.records):
            if r.tolerance:
                ax.plot([r.tolerance, r.tolerance], [i - 0.4, i + 0.4],
                        color="black", lw=1.0)
        ax.set_yticks(ypos, names, fontsize=6)
        ax.set_xscale("log")
        ax.set_xlabel("residual (bars) vs tolerance (ticks)")
        ax.set_title(f"{report.manifold}: {report.suite}")
        ax.invert_yaxis()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
