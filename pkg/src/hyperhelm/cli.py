"""Command-line entry point: ``hyperhelm <kind> --config FILE --out DIR``."""

from __future__ import annotations

import argparse
import os
import sys

from .config import KINDS
from .harness import EXIT_ERROR, emit_plot_data, run_text
from .errors import HyperHelmError


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hyperhelm",
                                 description="Radial Helmholtz experiments on hyperbolic models.")
    sub = ap.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        sp = sub.add_parser(kind, help=f"run a {kind} experiment")
        sp.add_argument("--config", required=True, help="plain-text config file")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes (sweep)")
        sp.add_argument("--series", action="append", default=[],
                        help="columns to extract after the run, e.g. r,u (repeatable)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        from .harness import error_report
        error_report(f"cannot read config {args.config}: {exc}", args.out, args.kind)
        return EXIT_ERROR
    base = os.path.dirname(os.path.abspath(args.config))
    report, code = run_text(text, args.out, args.kind, args.seed, args.jobs, base)
    for c in report["checks"]:
        print(f"{'PASS' if c['pass'] else 'FAIL'}  {c['name']}: {c['value']!r} (tol {c['tolerance']!r})")
    if report.get("error"):
        print(f"error: {report['error']}", file=sys.stderr)
    for series in args.series:
        name = "plot_" + "_".join(s.strip() for s in series.split(",")) + ".csv"
        try:
            print("wrote", emit_plot_data(report, series, os.path.join(args.out, name)))
        except (HyperHelmError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            code = EXIT_ERROR
    print(f"report: {os.path.join(args.out, 'report.json')} (exit {code})")
    return code


if __name__ == "__main__":
    sys.exit(main())
