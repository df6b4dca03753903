"""Command line front door: run verification suites, list manifolds, classify.

Exit status: 0 when every check passes, 1 on check failure, 2 on
configuration or manifest errors.
"""

from __future__ import annotations

import argparse
import sys

from .errors import TubegeomError, UnknownSuite, ManifestError
from .hermitian import CLASS_LABELS, gh_classify
from .reports import (ENGINE_VERSION, SUITE_IDS, SuiteConfig, list_manifolds,
                      resolve_manifold, run_suite)


def _build_parser():
    p = argparse.ArgumentParser(
        prog="tubegeom",
        description="Verify Sasaki bundle structures and tube deformations "
                    "on chart-described manifolds.")
    p.add_argument("--version", action="version", version=ENGINE_VERSION)
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run a named verification suite")
    v.add_argument("--manifold", required=True,
                   help="catalog name or manifest path")
    v.add_argument("--suite", required=True,
                   help=f"one of {', '.join(SUITE_IDS)}")
    v.add_argument("--tol", type=float, default=None,
                   help="override the main tolerance of the suite")
    v.add_argument("--samples", type=int, default=50)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out", default=None, help="write the report to this path")
    v.add_argument("--format", dest="fmt", choices=("json", "csv"),
                   default="json")
    v.add_argument("--plot", action="store_true",
                   help="render a PNG figure next to --out")
    v.add_argument("--quiet", action="store_true")

    m = sub.add_parser("manifolds", help="catalog operations")
    msub = m.add_subparsers(dest="manifolds_command", required=True)
    msub.add_parser("list", help="list the manifest catalog")

    c = sub.add_parser("classify", help="sixteen-class membership report")
    c.add_argument("--manifold", required=True)
    c.add_argument("--tol", type=float, default=1e-6)
    c.add_argument("--samples", type=int, default=20)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", default=None)
    return p


def _cmd_verify(args):
    cfg = SuiteConfig(manifold=args.manifold, suite=args.suite, tol=args.tol,
                      samples=args.samples, seed=args.seed, out=args.out,
                      fmt=args.fmt, plot=args.plot)
    report = run_suite(cfg)
    if not args.quiet:
        width = max((len(r.name) for r in report.records), default=10)
        for r in report.records:
            status = "PASS" if r.passed else "FAIL"
            tol = "-" if r.tolerance is None else f"{r.tolerance:.1e}"
            cmp_sym = "<=" if r.comparison == "le" else ">="
            print(f"[{status}] {r.name:<{width}}  residual={r.residual:.3e} "
                  f"{cmp_sym} {tol}")
        print(f"suite={report.suite} manifold={report.manifold} "
              f"checks={len(report.records)} "
              f"passed={sum(r.passed for r in report.records)} "
              f"wall={report.wall_time_s:.2f}s -> "
              f"{'PASS' if report.passed else 'FAIL'}")
        if args.out:
            print(f"report written to {args.out}")
    return 0 if report.passed else 1


def _cmd_manifolds_list(_args):
    for entry in list_manifolds():
        acs = " acs" if entry["acs"] else ""
        print(f"{entry['name']:<14} dim {entry['dim']}{acs}")
    return 0


def _cmd_classify(args):
    m = resolve_manifold(args.manifold)
    work = m
    if m.acs is None:
        from .reports import _acs_for
        work = m.with_acs(_acs_for(m), name=m.name)
    rep = gh_classify(work, points=args.samples, vectors=5, tol=args.tol,
                      seed=args.seed)
    if not rep.dim_valid:
        print(f"note: table semantics assume dim >= 6 (dim={rep.dim})")
    for label, _ in CLASS_LABELS:
        entry = rep.classes[label]
        mark = "member" if entry["member"] else "      "
        alias = f" ({entry['alias']})" if "alias" in entry else ""
        print(f"{label:<10}{alias:<6} {mark}  residual={entry['residual']:.3e}")
    print("minimal classes:", ", ".join(rep.minimal_classes()))
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(rep.to_json())
            fh.write("\n")
        print(f"report written to {args.out}")
    return 0


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "verify":
            return _cmd_verify(args)
        if args.command == "manifolds":
            return _cmd_manifolds_list(args)
        if args.command == "classify":
            return _cmd_classify(args)
    except (UnknownSuite, ManifestError) as ex:
        print(f"error: {ex}", file=sys.stderr)
        return 2
    except TubegeomError as ex:
        print(f"error: {ex}", file=sys.stderr)
        return 2
    parser.error("unknown command")


if __name__ == "__main__":
    sys.exit(main())
