"""Command-line entry point: ``gstar run | sweep | fixtures | audit | schema``."""

from __future__ import annotations

import argparse
import json
import sys

from .harness.config import CONFIG_SCHEMA, ConfigError, load_config
from .harness.instances import fixtures
from .harness.report import emit_report, report_csv
from .harness.runner import audit_trace, run_experiment


def _emit(report, cfg, args) -> None:
    csv_path = args.csv or cfg.outputs.get("csv")
    json_path = args.json or cfg.outputs.get("json")
    if csv_path:
        emit_report(report, "csv", csv_path)
    if json_path:
        emit_report(report, "json", json_path)
    if not csv_path and not json_path:
        sys.stdout.write(report_csv(report))
    for line in report.failures():
        print(f"AUDIT FAIL {line}", file=sys.stderr)
    for a in report.aggregates:
        print(f"aggregate {a.name}: measured={a.measured:.6g} bound={a.bound:.6g} "
              f"{'pass' if a.passed else 'FAIL'}", file=sys.stderr)


def _run(args, T_grid=None) -> int:
    cfg = load_config(args.config)
    if T_grid:
        cfg = cfg.with_T(T_grid)
    report = run_experiment(cfg, workers=args.workers)
    _emit(report, cfg, args)
    return 0 if report.passed else 1


def _fixtures(args) -> int:
    doc = fixtures(args.T3, args.T4, args.T2)
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _audit(args) -> int:
    rc = 0
    for path in args.trace:
        res = audit_trace(path)
        verdict = {True: "pass", False: "FAIL", None: "expectation-only"}[res.audit_pass]
        status = "consistent" if res.consistent else "INCONSISTENT"
        print(f"{path}: rho_T={res.rho_T:.17g} bound={res.bound_gstar:.17g} {verdict} {status}")
        for m in res.messages:
            print(f"  {m}")
        if not res.passed:
            rc = 1
    return rc


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gstar", description="Run and audit G*-regret experiments.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    def outputs(p):
        p.add_argument("config", help="JSON experiment config")
        p.add_argument("--csv", help="write CSV report here")
        p.add_argument("--json", help="write JSON report here")
        p.add_argument("--workers", type=int, default=None, help="process count (default: GSTAR_THREADS or cores)")

    outputs(sub.add_parser("run", help="run one experiment config"))
    sw = sub.add_parser("sweep", help="run a config over a grid of horizons")
    outputs(sw)
    sw.add_argument("--T-grid", required=True, type=lambda s: [int(v) for v in s.split(",") if v],
                    help="comma-separated horizons, e.g. 100,500,5000")

    fx = sub.add_parser("fixtures", help="print the 1-D constructions and their closed-form values")
    fx.add_argument("--T3", type=int, default=7)
    fx.add_argument("--T4", type=int, default=8)
    fx.add_argument("--T2", type=int, default=1000)
    fx.add_argument("--out")

    au = sub.add_parser("audit", help="recompute audits from stored trace files")
    au.add_argument("trace", nargs="+")

    sub.add_parser("schema", help="print the config JSON schema")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.cmd == "run":
            return _run(args)
        if args.cmd == "sweep":
            return _run(args, args.T_grid)
        if args.cmd == "fixtures":
            return _fixtures(args)
        if args.cmd == "audit":
            return _audit(args)
        if args.cmd == "schema":
            print(json.dumps(CONFIG_SCHEMA, indent=2))
            return 0
    except (ConfigError, OSError, ValueError, RuntimeError) as exc:
        print(f"gstar: error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
