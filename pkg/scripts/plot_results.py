"""Quick-look figures from results/<experiment-id>/metrics.csv (needs matplotlib).

    python3 scripts/plot_results.py results
"""
import sys
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from sentinel.harness.io import read_metrics  # noqa: E402


def series(rows, suffix):
    out = defaultdict(lambda: defaultdict(list))
    for r in rows:
        if r["metric"].endswith(suffix):
            out[r["metric"].rsplit("/", 1)[0]][r["seed"]].append((r["step"], r["value"]))
    return out


def curves(ax, by_condition):
    for cond, per_seed in sorted(by_condition.items()):
        steps = np.array([s for s, _ in next(iter(per_seed.values()))])
        vals = np.array([[v for _, v in pts] for pts in per_seed.values()])
        mu, sd = vals.mean(axis=0), vals.std(axis=0)
        ax.plot(steps, mu, label=cond)
        ax.fill_between(steps, mu - sd, mu + sd, alpha=0.2)
    ax.legend()


def main(root):
    root = Path(root)
    if (root / "fig2-composite-vs-additive/metrics.csv").exists():
        rows = read_metrics(root / "fig2-composite-vs-additive/metrics.csv")
        vals = defaultdict(list)
        for r in rows:
            vals[r["metric"]].append(r["value"])
        alphas = sorted({float(m.split("/")[0][6:]) for m in vals})
        fig, ax = plt.subplots()
        for name in ("oracle", "composite", "additive", "composite_literal"):
            ax.plot(alphas, [np.mean(vals[f"alpha={a:g}/{name}"]) for a in alphas], marker="o", label=name)
        ax.set(xlabel="alpha", ylabel="risk (-CVaR)")
        ax.legend()
        fig.savefig(root / "mixture_cvar.png", dpi=120)
    for exp, suffix, ylabel in (("cartpole-lambda-sweep", "cumulative_falls", "cumulative falls"),
                                ("highway-risk", "cumulative_crashes", "cumulative crashes")):
        path = root / exp / "metrics.csv"
        if path.exists():
            fig, ax = plt.subplots()
            curves(ax, series(read_metrics(path), suffix))
            ax.set(xlabel="step", ylabel=ylabel)
            fig.savefig(root / f"{exp}.png", dpi=120)
    path = root / "toy-convergence/metrics.csv"
    if path.exists():
        fig, ax = plt.subplots()
        for a in (0, 1):
            pts = sorted((r["step"], r["value"]) for r in read_metrics(path) if r["metric"] == f"w1/a{a}")
            ax.plot(*zip(*pts), marker="o", label=f"action {a}")
        ax.set(xlabel="step", ylabel="W1 to ground truth", yscale="log")
        ax.legend()
        fig.savefig(root / "toy_w1.png", dpi=120)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "results")
