"""Command line entry point: ``sentinel run <experiment-id> [options]``."""
from __future__ import annotations

import argparse
import json
import sys

from .harness import EXPERIMENTS, ExperimentConfig, load_config, run_experiment


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sentinel", description="Run seeded risk-sensitive RL experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment and write metrics.csv, summary.json, manifest.json")
    run.add_argument("experiment", choices=EXPERIMENTS)
    run.add_argument("--config", help="JSON file with overrides (fields of the experiment config)")
    run.add_argument("--seed", type=int, help="base seed; seed i of the sweep is seed + i")
    run.add_argument("--out", help="output directory")
    run.add_argument("--steps", type=int, help="environment steps (prior draws for the mixture study)")
    run.add_argument("--seeds", type=int, help="number of seeds")
    run.add_argument("--scale", type=float, help="multiplier applied to steps and snapshot times")
    run.add_argument("--workers", type=int, help="process pool size for independent jobs")
    run.add_argument("--quiet", action="store_true")
    sub.add_parser("list", help="list experiment ids")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        print("\n".join(EXPERIMENTS))
        return 0
    cfg = load_config(args.config, args.experiment) if args.config else ExperimentConfig.default(args.experiment)
    for name in ("seed", "out", "steps", "seeds", "scale", "workers"):
        value = getattr(args, name)
        if value is not None:
            setattr(cfg, name, value)
    cfg.__post_init__()
    summary = run_experiment(cfg, verbose=not args.quiet)
    if not args.quiet:
        json.dump(summary, sys.stdout, indent=2, sort_keys=True)
        print()
    return 0


if __name__ == "__main__":
    sys.exit(main())
