from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

EXPERIMENTS = ("fig2-composite-vs-additive", "toy-convergence", "cartpole-lambda-sweep", "highway-risk")

# Desk-scale defaults. ``steps`` is the experiment's principal size: environment
# steps for the learning runs, prior draws for the mixture study.
DEFAULTS = {
    "fig2-composite-vs-additive": dict(
        steps=100, seeds=1,
        params={"n_components": 100, "oracle_samples": 100_000,
                "alphas": [0.05, 0.1, 0.2, 0.3, 0.4, 0.5]}),
    "toy-convergence": dict(
        steps=10_000, seeds=1,
        agent={"k": 4, "support": {"v_min": 0.0, "v_max": 2.0, "n_atoms": 51}},
        params={"snapshots": [0, 1000, 5000, 10_000], "envelope": [0.6, 1.3]}),
    "cartpole-lambda-sweep": dict(
        steps=20_000, seeds=5,
        agent={"k": 4, "u_a": {"kind": "cvar", "alpha": 0.25}, "u_e": {"kind": "cvar", "alpha": 0.25}},
        params={"lambdas": [0.01, 0.1, 1.0, 4.6], "log_every": 100}),
    "highway-risk": dict(
        steps=100_000, seeds=3,
        agent={"k": 4},
        params={"variants": ["rn-K1", "rn-K4", "additive-K4", "composite-K4"], "alpha": 0.25,
                "log_every": 1000}),
}


@dataclass
class ExperimentConfig:
    """One experiment invocation. ``agent`` and ``env`` hold overrides of
    AgentConfig and environment fields; ``params`` holds experiment knobs."""

    experiment: str
    seed: int = 0
    seeds: int = 1
    steps: int = 1
    scale: float = 1.0
    out: str = "results"
    workers: int = 1
    agent: dict = field(default_factory=dict)
    env: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}; choose from {list(EXPERIMENTS)}")
        if self.steps < 1 or self.seeds < 1:
            raise ValueError("steps and seeds must be >= 1")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @classmethod
    def default(cls, experiment: str, **overrides) -> "ExperimentConfig":
        if experiment not in DEFAULTS:
            raise ValueError(f"unknown experiment {experiment!r}; choose from {list(EXPERIMENTS)}")
        base = json.loads(json.dumps(DEFAULTS[experiment]))
        for key in ("agent", "env", "params"):
            base.setdefault(key, {}).update(overrides.pop(key, None) or {})
        base.update(overrides)
        return cls(experiment=experiment, **base)

    @property
    def scaled_steps(self) -> int:
        return max(1, int(round(self.steps * self.scale)))

    @property
    def seed_list(self) -> list[int]:
        return [self.seed + i for i in range(self.seeds)]

    def to_dict(self) -> dict:
        return asdict(self)


def load_config(path, experiment: str | None = None) -> ExperimentConfig:
    """Read a JSON config; missing fields fall back to the experiment's defaults."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    exp = experiment or raw.pop("experiment", None)
    raw.pop("experiment", None)
    if exp is None:
        raise ValueError(f"{path}: no experiment id given")
    return ExperimentConfig.default(exp, **raw)
