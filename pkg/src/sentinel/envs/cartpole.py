"""Cart-pole balancing with the classic v0 constants and Euler integration."""
from __future__ import annotations

import math

import numpy as np

from .base import Env, EnvStep

GRAVITY = 9.8
CART_MASS = 1.0
POLE_MASS = 0.1
TOTAL_MASS = CART_MASS + POLE_MASS
HALF_LENGTH = 0.5
POLE_MASS_LENGTH = POLE_MASS * HALF_LENGTH
FORCE = 10.0
DT = 0.02
X_LIMIT = 2.4
THETA_LIMIT = 12 * 2 * math.pi / 360
MAX_STEPS = 200

PUSH_LEFT, PUSH_RIGHT = 0, 1


def cartpole_dynamics(state, action: int) -> np.ndarray:
    x, x_dot, theta, theta_dot = (float(v) for v in state)
    force = FORCE if action == PUSH_RIGHT else -FORCE
    cos, sin = math.cos(theta), math.sin(theta)
    temp = (force + POLE_MASS_LENGTH * theta_dot * theta_dot * sin) / TOTAL_MASS
    theta_acc = (GRAVITY * sin - cos * temp) / (
        HALF_LENGTH * (4.0 / 3.0 - POLE_MASS * cos * cos / TOTAL_MASS))
    x_acc = temp - POLE_MASS_LENGTH * theta_acc * cos / TOTAL_MASS
    return np.array([
        x + DT * x_dot,
        x_dot + DT * x_acc,
        theta + DT * theta_dot,
        theta_dot + DT * theta_acc,
    ])


def failed(state) -> bool:
    return abs(state[0]) > X_LIMIT or abs(state[2]) > THETA_LIMIT


def cartpole_step(state, action: int, t: int = 0) -> EnvStep:
    """Advance one tick. ``t`` is the number of steps already taken this episode."""
    nxt = cartpole_dynamics(state, action)
    fell = failed(nxt)
    timeout = t + 1 >= MAX_STEPS
    return EnvStep(nxt, 1.0, fell or timeout, {"fall": fell, "timeout": timeout and not fell})


def value_bounds(gamma: float) -> tuple[float, float]:
    """Support covering every discounted CartPole return: [0, (1 - g^200) / (1 - g)]."""
    if gamma >= 1.0:
        return 0.0, float(MAX_STEPS)
    return 0.0, (1.0 - gamma ** MAX_STEPS) / (1.0 - gamma)


class CartPole(Env):
    name = "cartpole"
    state_dim = 4
    n_actions = 2

    def __init__(self, seed=None):
        super().__init__(seed)
        self.state = np.zeros(4)

    def _reset(self):
        self.state = self.rng.uniform(-0.05, 0.05, size=4)
        return self.state.copy()

    def _step(self, action):
        out = cartpole_step(self.state, action, self.t - 1)
        self.state = out.next_state
        return EnvStep(out.next_state.copy(), out.reward, out.terminal, out.info)
