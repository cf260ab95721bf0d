"""Command-line entry point: ``irs-harq {sweep,validate,gain}``.

Exit codes: 0 success, 1 usage/config error, 2 validation failure,
3 numeric/convergence error.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from .config import ConfigError, load_config
from .errors import ConvergenceError, DomainError
from .sweep import GAIN_COLUMNS, SWEEP_COLUMNS, VALIDATE_COLUMNS, format_csv, gain_table, run_sweep, validate

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3

log = logging.getLogger("irs_harq")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _trials(text: str) -> int:
    value = int(text)
    if value < 1000:
        raise argparse.ArgumentTypeError("trials must be >= 1000")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="YAML sweep configuration")
    common.add_argument("--out", help="output CSV path ('-' for stdout); overrides output_path")
    common.add_argument("--seed", type=_u64, help="Monte Carlo master seed")
    common.add_argument("--trials", type=_trials, help="Monte Carlo trials per row")
    common.add_argument("--workers", type=int, help="threads for Monte Carlo shards")
    common.add_argument("--quiet", action="store_true", help="suppress warnings and the summary")

    parser = _Parser(prog="irs-harq", description="Outage analysis for HARQ over surface-assisted links.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("sweep", parents=[common], help="evaluate engines along one parameter axis")
    sub.add_parser("validate", parents=[common], help="compare Monte Carlo engines with the closed form")
    gain = sub.add_parser("gain", parents=[common], help="SNR needed for a target outage along the axis")
    gain.add_argument("--target", type=float, help="target outage probability (overrides target_pout)")
    return parser


def _write(text: str, path: str) -> None:
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING, format="%(levelname)s: %(message)s")

    try:
        spec = load_config(args.config)
        mc = dataclasses.replace(
            spec.mc,
            **{k: v for k, v in (("seed", args.seed), ("trials", args.trials)) if v is not None},
        )
        spec = dataclasses.replace(spec, mc=mc)
        if args.command == "gain" and args.target is not None:
            spec = dataclasses.replace(spec, target_pout=args.target)
    except (OSError, ConfigError) as exc:
        print(f"irs-harq: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = args.out or spec.output_path

    try:
        if args.command == "sweep":
            rows = run_sweep(spec, workers=args.workers)
            _write(format_csv(rows, SWEEP_COLUMNS), out)
            failed = [r for r in rows if r.error]
        elif args.command == "gain":
            rows = gain_table(spec)
            _write(format_csv(rows, GAIN_COLUMNS), out)
            failed = [r for r in rows if r.error]
        else:
            rows, ok = validate(spec, workers=args.workers)
            _write(format_csv(rows, VALIDATE_COLUMNS), out)
            failed = [r for r in rows if r.error]
            if not args.quiet:
                n_pass = sum(bool(r.passed) for r in rows)
                print(f"validate: {n_pass}/{len(rows)} rows within 3 sigma -> {'PASS' if ok else 'FAIL'}", file=sys.stderr)
            if not failed and not ok:
                return EXIT_VALIDATION
    except ConfigError as exc:
        print(f"irs-harq: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, ConvergenceError, ArithmeticError) as exc:
        print(f"irs-harq: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    if failed:
        for r in failed:
            log.error("%s=%s: %s", r.axis_name, r.axis_value, r.error)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
