"""Command-line entry point.

Exit statuses: 0 success, 1 verdict false or failed check, 2 invalid
configuration, 3 internal error.
"""

import argparse
import sys
from pathlib import Path

from ..errors import ConfigError
from .config import parse_config
from .runs import (EXIT_CONFIG, EXIT_INTERNAL, SWEEP_AXES, run_check_potential, run_compare,
                   run_solve, run_sweep)


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON configuration file")
    common.add_argument("--out", help="output directory (overrides output.directory)")
    common.add_argument("--jobs", type=int, default=1, help="parallel workers for sweeps")
    p = argparse.ArgumentParser(prog="brezis-ekeland", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="continuation solve with certificate")
    sub.add_parser("compare", parents=[common], help="variational solve against implicit Euler")
    sw = sub.add_parser("sweep", parents=[common], help="one solve per parameter value")
    sw.add_argument("--axis", required=True, choices=SWEEP_AXES)
    sw.add_argument("--values", default="", help="comma-separated values")
    sw.add_argument("--reference", action="store_true", help="add the distance to the reference solver")
    sub.add_parser("check-potential", parents=[common], help="assumption checks on the potential")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = parse_config(Path(args.config).read_text(encoding="utf-8"))
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "solve":
            return run_solve(cfg, args.out)
        if args.command == "compare":
            return run_compare(cfg, args.out)
        if args.command == "sweep":
            try:
                values = [float(v) for v in args.values.split(",") if v.strip()]
                return run_sweep(cfg, args.axis, values, args.out, args.jobs, args.reference)[0]
            except ValueError as exc:
                print(f"config error: sweep: {exc}", file=sys.stderr)
                return EXIT_CONFIG
        return run_check_potential(cfg, args.out)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
