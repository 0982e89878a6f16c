"""Three-state, two-action MDP whose a_0 return is a two-component Gaussian mixture.

From s_0, action a_0 moves to s_1 or s_2 with probability 0.5 each and action
a_1 always moves to s_2; arriving in s_1 pays N(1.0, 0.1^2) and s_2 pays
N(0.95, 0.1^2). Every episode is a single terminal step.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..retdist import AtomSupport, CategoricalReturnDistribution, discretize_gaussian_mixture
from .base import Env, EnvStep

S0, S1, S2 = range(3)


@dataclass(frozen=True)
class ThreeStateMdpSpec:
    weights: tuple = (0.5, 0.5)
    means: tuple = (1.0, 0.95)
    stds: tuple = (0.1, 0.1)


@dataclass(frozen=True, eq=False)
class _Mixture:
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray


DEFAULT_SPEC = ThreeStateMdpSpec()


def one_hot(index: int) -> np.ndarray:
    s = np.zeros(3)
    s[index] = 1.0
    return s


def three_state_step(state, action: int, rng, spec: ThreeStateMdpSpec = DEFAULT_SPEC) -> EnvStep:
    if int(np.argmax(state)) != S0:
        raise ValueError("s_0 is the only decision state")
    if action == 0:
        component = 0 if rng.random() < spec.weights[0] else 1
    elif action == 1:
        component = 1
    else:
        raise ValueError(f"action must be 0 or 1, got {action}")
    reward = float(rng.normal(spec.means[component], spec.stds[component]))
    return EnvStep(one_hot(S1 + component), reward, True, {"component": component})


def true_return_model(action: int, spec: ThreeStateMdpSpec = DEFAULT_SPEC) -> _Mixture:
    variances = np.square(spec.stds)
    if action == 0:
        return _Mixture(np.asarray(spec.weights, float), np.asarray(spec.means, float), variances)
    return _Mixture(np.array([1.0]), np.array([spec.means[1]]), variances[1:2])


def true_return_distributions(support: AtomSupport, spec: ThreeStateMdpSpec = DEFAULT_SPEC
                              ) -> list[CategoricalReturnDistribution]:
    """Discretised ground-truth Z(s_0, a) for both actions."""
    return [discretize_gaussian_mixture(true_return_model(a, spec), support) for a in (0, 1)]


class ThreeStateMDP(Env):
    name = "three-state"
    state_dim = 3
    n_actions = 2

    def __init__(self, seed=None, spec: ThreeStateMdpSpec = DEFAULT_SPEC):
        super().__init__(seed)
        self.spec = spec
        self.state = one_hot(S0)

    def _reset(self):
        self.state = one_hot(S0)
        return self.state.copy()

    def _step(self, action):
        out = three_state_step(self.state, action, self.rng, self.spec)
        self.state = out.next_state
        return out
