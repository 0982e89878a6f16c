"""Run all four studies at desk scale into results/<experiment-id>/.

    python3 scripts/run_all.py [--scale 0.1] [--only highway-risk]
"""
import argparse
import json
from pathlib import Path

from sentinel.harness import EXPERIMENTS, ExperimentConfig, run_experiment


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="results")
    ap.add_argument("--scale", type=float, default=1.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--only", nargs="*", choices=EXPERIMENTS)
    args = ap.parse_args()
    for exp in args.only or EXPERIMENTS:
        cfg = ExperimentConfig.default(exp, seed=args.seed, scale=args.scale)
        summary = run_experiment(cfg, Path(args.out) / exp, verbose=True)
        print(json.dumps(summary, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
