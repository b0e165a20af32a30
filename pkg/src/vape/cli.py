"""Command line entry point: ``vape run``, ``vape analyze`` and ``vape selftest``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import checks, harness, scenarios
from .envconfig import ConfigError


def _horizons(text: str) -> list[int]:
    try:
        values = [int(float(v)) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("at least one horizon is required")
    return values


def _env_path(text: str) -> str:
    """Bundled scenario names resolve to their JSON file; anything else is a path."""
    if text in scenarios.NAMES and not Path(text).exists():
        return str(scenarios.path(text))
    return text


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vape", description="Contextual posted-price experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run seeded repetitions over a grid of horizons")
    run.add_argument("--algo", required=True, choices=harness.ALGORITHMS)
    run.add_argument("--env", required=True, type=_env_path, help="environment JSON or bundled scenario name")
    run.add_argument("--horizons", required=True, type=_horizons, help="e.g. 2000,8000,32000")
    run.add_argument("--reps", type=int, default=1)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", required=True, help="per-run CSV")
    run.add_argument("--curve-out", help="per-horizon aggregate CSV")
    run.add_argument("--parallel", type=int, help="worker processes (default: $VAPE_PARALLEL or 1)")

    analyze = sub.add_parser("analyze", help="per-horizon means and log-log slope of a run CSV")
    analyze.add_argument("--in", dest="inp", required=True)

    selftest = sub.add_parser("selftest", help="run the Monte-Carlo and numerical checks")
    selftest.add_argument("--quick", action="store_true", help="smaller sample sizes")
    return parser


def _cmd_run(args) -> int:
    spec = harness.ExperimentSpec(
        algorithm=args.algo,
        env_config=args.env,
        horizons=args.horizons,
        repetitions=args.reps,
        base_seed=args.seed,
        output_path=args.out,
    )
    records = harness.run_experiment(spec, parallel=args.parallel)
    if args.curve_out:
        harness.emit_curve_csv(records, args.curve_out)
    for T, mean, stderr, _ in harness.curve_rows(records):
        print(f"T={T} mean_regret={mean:.6g} stderr={stderr:.3g}")
    print(f"wrote {len(records)} records to {args.out}")
    return 0


def _cmd_analyze(args) -> int:
    records = harness.read_csv(args.inp)
    if not records:
        print(f"error: {args.inp} has no records", file=sys.stderr)
        return 1
    rows = harness.curve_rows(records)
    for T, mean, stderr, _ in rows:
        print(f"T={T} mean_regret={mean:.6g} stderr={stderr:.3g}")
    if len(rows) >= 2:
        slope, intercept = harness.fit_loglog_slope([(T, m) for T, m, _, _ in rows])
        print(f"slope={slope:.4f} intercept={intercept:.4f}")
    else:
        print("slope=n/a (need at least two horizons)")
    return 0


def _cmd_selftest(args) -> int:
    results = checks.run_selftest(quick=args.quick)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 1 if failed else 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "analyze":
            return _cmd_analyze(args)
        return _cmd_selftest(args)
    except (ConfigError, ValueError, OSError, harness.RunFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
