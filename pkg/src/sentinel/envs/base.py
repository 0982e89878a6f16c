from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class EnvStep:
    next_state: np.ndarray
    reward: float
    terminal: bool
    info: dict = field(default_factory=dict)


class EpisodeOver(RuntimeError):
    """Raised when stepping an environment whose episode has terminated."""


class Env:
    """Minimal episodic interface shared by the built-in environments."""

    state_dim: int
    n_actions: int
    name: str = "env"

    def __init__(self, seed=None):
        self.rng = np.random.default_rng(seed)
        self.done = True
        self.t = 0

    def reset(self, seed=None) -> np.ndarray:
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        self.done = False
        self.t = 0
        return self._reset()

    def step(self, action: int) -> EnvStep:
        if self.done:
            raise EpisodeOver(f"{self.name}: episode has terminated; call reset() first")
        if not 0 <= action < self.n_actions:
            raise ValueError(f"{self.name}: action {action} outside [0, {self.n_actions})")
        self.t += 1
        out = self._step(int(action))
        self.done = out.terminal
        return out

    def _reset(self) -> np.ndarray:
        raise NotImplementedError

    def _step(self, action: int) -> EnvStep:
        raise NotImplementedError
