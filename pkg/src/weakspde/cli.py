"""Command line entry point: ``weakspde study --config FILE [overrides]``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .covariance import AdmissibilityError
from .study import (
    ConfigError,
    check_report,
    gnuplot_script,
    load_config,
    report_csv,
    report_json,
    run_study,
)

EXIT_OK, EXIT_CONFIG, EXIT_ADMISSIBILITY, EXIT_CHECK = 0, 2, 3, 4


def _int_list(text: str) -> list[int]:
    try:
        return [int(float(t)) for t in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma separated list of integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="weakspde", description="Weak and strong convergence studies for the theta-scheme.")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("study", help="run a convergence study")
    s.add_argument("--config", help="key = value config file")
    s.add_argument("--study", help="time-weak, space-weak, time-strong, space-strong, deterministic, validate-mc")
    s.add_argument("--theta", type=float)
    s.add_argument("--N-list", dest="N_list", type=_int_list)
    s.add_argument("--M-list", dest="sizes", type=_int_list, help="space sizes (m or M)")
    s.add_argument("--noise", choices=["white", "diagonal_power", "kernel", "zero"])
    s.add_argument("--beta0", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", help="output file (default: stdout)")
    s.add_argument("--format", choices=["csv", "json"])
    s.add_argument("--allow-unstable-theta", dest="allow_unstable_theta", action="store_true", default=None)
    s.add_argument("--check", action="store_true", help="exit 4 if the fitted order misses its window")
    s.add_argument("--emit-plot-script", dest="plot", metavar="PATH", help="write a gnuplot script for the CSV")
    s.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    overrides = {k: getattr(args, k) for k in
                 ("study", "theta", "N_list", "sizes", "noise", "beta0", "seed", "out", "format", "allow_unstable_theta")}
    try:
        config = load_config(args.config, **overrides)
    except (ConfigError, OSError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        report = run_study(config)
    except AdmissibilityError as exc:
        print(f"inadmissible parameters ({exc.condition}): {exc}", file=sys.stderr)
        return EXIT_ADMISSIBILITY
    except (ConfigError, ValueError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    text = report_csv(report) if config.format == "csv" else report_json(report, config)
    if config.out:
        Path(config.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if args.plot:
        csv_path = config.out if config.out and config.format == "csv" else "study.csv"
        Path(args.plot).write_text(gnuplot_script(csv_path, report.study), encoding="utf-8")

    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if report.slope is not None:
        print(f"{report.study}: slope {report.slope:.4f} (R^2 {report.r2:.4f}, theory sup {report.theory_sup})",
              file=sys.stderr)
    if args.check:
        fails = check_report(report, config)
        for f in fails:
            print(f"check failed: {f}", file=sys.stderr)
        if fails:
            return EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
