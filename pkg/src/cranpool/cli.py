"""Command-line interface: run, sweep and validate subcommands."""

from __future__ import annotations

import argparse
import sys

from . import harness


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--jobs", type=int, default=1,
                        help="worker processes for Monte Carlo trials")
    parser.add_argument("--progress", action="store_true",
                        help="print per-trial progress")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="cranpool",
        description="Two-tenant C-RAN uplink spectrum pooling optimizer")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the experiment described by a config file")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True, help="output CSV path")
    _add_common(p_run)

    p_sweep = sub.add_parser("sweep", help="run a config with an overridden sweep axis")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--axis", required=True, choices=harness.SWEEP_AXES)
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated sweep values, e.g. 1e8,1e9,1e10")
    p_sweep.add_argument("--out", required=True)
    _add_common(p_sweep)

    p_val = sub.add_parser("validate", help="run the invariant suite")
    p_val.add_argument("--seed", type=int, default=0)

    args = parser.parse_args(argv)

    if args.command == "validate":
        ok = harness.validate(seed=args.seed)
        return 0 if ok else 1

    try:
        spec = harness.load_experiment(args.config)
    except (harness.ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    from dataclasses import replace
    if args.command == "sweep":
        values = tuple(float(v) for v in args.values.split(","))
        spec = replace(spec, sweep_axis=args.axis, sweep_values=values,
                       output=args.out)
    else:
        spec = replace(spec, output=args.out)
    try:
        path = harness.run_experiment(spec, jobs=args.jobs, progress=args.progress)
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
