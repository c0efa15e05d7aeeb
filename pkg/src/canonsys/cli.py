"""Command-line front end.

Exit status: 0 all checks pass, 1 a check failed, 2 unreadable scenario or
unknown series, 3 a mathematical precondition failed.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path
from typing import Optional, Sequence

from .gbdt import PreconditionError
from .pipeline import DEFAULT_TOLERANCES, SERIES_NAMES, run_scenario, worker_count
from .report import write_outputs
from .scenario import ScenarioError, bundled_names, parse_scenario, read_scenario_text

EXIT_OK, EXIT_CHECK, EXIT_PARSE, EXIT_PRECONDITION = 0, 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="canonsys", description="Explicit canonical-system constructions and checks.")
    parser.add_argument("--list-scenarios", action="store_true", help="print bundled scenario names and exit")
    sub = parser.add_subparsers(dest="command")
    run = sub.add_parser("run", help="run a scenario file or bundled scenario")
    run.add_argument("scenario", help="path to a YAML scenario or a bundled scenario name")
    run.add_argument("--out", type=Path, default=None, help="output directory (default: ./canonsys-out/<name>)")
    run.add_argument("--nodes", type=int, default=None, help="override the scenario grid node count")
    run.add_argument("--tol-scale", type=float, default=1.0, help="multiply every upper-bound tolerance")
    run.add_argument("--emit", default=None, help="comma-separated series to write as CSV (overrides the scenario)")
    return parser


def _parse_emit(raw: Optional[str], default: Sequence[str]) -> list[str]:
    if raw is None:
        names = list(default)
    else:
        names = [s.strip() for s in raw.split(",") if s.strip()]
    unknown = [n for n in names if n not in SERIES_NAMES]
    if unknown:
        raise ScenarioError(f"unknown series {unknown}; available: {list(SERIES_NAMES)}")
    return names


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.list_scenarios:
        for name in bundled_names():
            print(name)
        return EXIT_OK
    if args.command != "run":
        parser.print_usage(sys.stderr)
        return EXIT_PARSE
    try:
        scenario = parse_scenario(read_scenario_text(args.scenario), DEFAULT_TOLERANCES)
        if args.nodes is not None:
            if args.nodes < 3:
                raise ScenarioError("--nodes must be at least 3")
            scenario = dataclasses.replace(scenario, nodes=args.nodes)
        if not args.tol_scale > 0:
            raise ScenarioError("--tol-scale must be positive")
        emit = _parse_emit(args.emit, scenario.emit)
        workers = worker_count()
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    try:
        report = run_scenario(scenario, tol_scale=args.tol_scale, workers=workers)
    except PreconditionError as exc:
        print(f"precondition failed: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    missing = [n for n in emit if n not in report.series()]
    if missing:
        print(f"error: series {missing} not produced by stages {list(scenario.stages)}", file=sys.stderr)
        return EXIT_PARSE
    out = args.out if args.out is not None else Path("canonsys-out") / scenario.name
    write_outputs(report, out, emit)
    for check in report.checks:
        status = "PASS" if check.passed else "FAIL"
        op = "<=" if check.kind == "max" else ">="
        print(f"{status} {check.name}: {check.value:.3e} {op} {check.tolerance:.3e}")
    print(f"{'PASS' if report.passed else 'FAIL'} {scenario.name} -> {out}")
    return EXIT_OK if report.passed else EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
