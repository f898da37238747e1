"""Command-line entry point.

Every experiment subcommand prints a one-line summary per report and exits
with status 1 if any computed eigenvalue falls outside its bounds.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import __version__
from .experiments import aggregate_grid, random_dsp_grid, random_multi_batch
from .polynomials import bounds_table, bounds_table_csv
from .report import SCHEMA_VERSION, emit_report, load_reports

log = logging.getLogger("saddlebounds")


def _add_output(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="write the reports to this file")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--no-timing", action="store_true", help="blank timings for byte-stable output")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="saddlebounds", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bounds-table", help="interval endpoints for 2..K+1 blocks as CSV")
    p.add_argument("--max-k", type=int, default=9)
    p.add_argument("--digits", type=int, default=4)

    p = sub.add_parser("random-multi", help="random multi-block systems, exact preconditioner")
    p.add_argument("--N", type=int, nargs="+", required=True)
    p.add_argument("--variant", choices=("diag", "dense"), default="diag")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--n0", type=int, default=300)
    p.add_argument("--workers", type=int, default=None)
    _add_output(p)

    p = sub.add_parser("dsp-grid", help="random double saddle-point systems over the indicator grid")
    p.add_argument("--runs", type=int, default=25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--aggregate", help="write per-case worst extremes as JSON to this file")
    _add_output(p)

    p = sub.add_parser("pdeco", help="boundary-control test problem")
    p.add_argument("--level", type=int, nargs="+", default=[5], help="mesh width h = 2^-level")
    p.add_argument("--beta", type=float, nargs="+", default=[1.0])
    p.add_argument("--cheb", type=int, nargs="+", default=[1, 3, 5, 10])
    p.add_argument("--tol", type=float, default=1e-10, help="MINRES relative residual target")
    p.add_argument("--eig", choices=("auto", "dense", "lanczos"), default="auto")
    _add_output(p)

    p = sub.add_parser("export", help="convert stored reports, or export the bounds table")
    p.add_argument("--from", dest="source", help="JSON report file; without it the bounds table is exported")
    p.add_argument("--max-k", type=int, default=9)
    p.add_argument("--format", choices=("csv", "json"), required=True)
    p.add_argument("--out", required=True)
    return ap


def _finish(reports, args) -> int:
    bad = 0
    for r in reports:
        status = "ok" if r.ok else "VIOLATION"
        ext = ", ".join(f"{v:.6g}" for v in r.computed_extremes)
        bnd = ", ".join(f"{v:.6g}" for v in r.theoretical_bounds.as_tuple())
        it = "" if r.minres_iterations is None else f" minres={r.minres_iterations}"
        print(f"{r.label}: computed [{ext}] bounds [{bnd}]{it} {status}")
        for v in r.violations:
            print(f"    {v}")
        bad += len(r.violations)
    if args.out:
        emit_report(reports, args.format, args.out, include_timing=not args.no_timing)
    print(f"{len(reports)} reports, {bad} violations")
    return 1 if bad else 0


def _export(args) -> int:
    if args.source:
        reports = load_reports(args.source)
        emit_report(reports, args.format, args.out)
        return 1 if any(r.violations for r in reports) else 0
    if args.format == "csv":
        with open(args.out, "w") as fh:
            fh.write(bounds_table_csv(args.max_k))
    else:
        rows = [{"k": k, **b.to_dict()} for k, b in bounds_table(args.max_k)]
        with open(args.out, "w") as fh:
            json.dump({"schema_version": SCHEMA_VERSION, "bounds_table": rows}, fh, indent=2)
            fh.write("\n")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "bounds-table":
            sys.stdout.write(bounds_table_csv(args.max_k, args.digits))
            return 0
        if args.command == "random-multi":
            reports = random_multi_batch(args.N, args.variant, args.trials, args.seed, args.n0, args.workers)
            return _finish(reports, args)
        if args.command == "dsp-grid":
            reports = random_dsp_grid(runs_per_case=args.runs, seed=args.seed, workers=args.workers)
            if args.aggregate:
                with open(args.aggregate, "w") as fh:
                    json.dump(aggregate_grid(reports), fh, indent=2)
            return _finish(reports, args)
        if args.command == "pdeco":
            from .pdeco import run_pdeco

            dense = {"auto": None, "dense": True, "lanczos": False}[args.eig]
            reports = [
                run_pdeco(2.0**-e, b, m, rel_tol=args.tol, dense=dense)
                for e in args.level
                for b in args.beta
                for m in args.cheb
            ]
            return _finish(reports, args)
        if args.command == "export":
            return _export(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
