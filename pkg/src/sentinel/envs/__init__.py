from .base import Env, EnvStep, EpisodeOver
from .cartpole import CartPole, cartpole_dynamics, cartpole_step, value_bounds
from .highway import HighwayConfig, HighwayLite
from .three_state import ThreeStateMDP, ThreeStateMdpSpec, three_state_step, true_return_distributions

ENVIRONMENTS = {
    "three-state": ThreeStateMDP,
    "cartpole": CartPole,
    "highway-lite": HighwayLite,
}


def make_env(name: str, seed=None, **params) -> Env:
    """Build an environment by name; ``params`` go to its config (highway only)."""
    if name not in ENVIRONMENTS:
        raise KeyError(f"unknown environment {name!r}; choose from {sorted(ENVIRONMENTS)}")
    if name == "highway-lite":
        return HighwayLite(seed, HighwayConfig(**params))
    if name == "three-state" and params:
        return ThreeStateMDP(seed, ThreeStateMdpSpec(**{k: tuple(v) for k, v in params.items()}))
    if params:
        raise ValueError(f"{name} takes no parameters, got {sorted(params)}")
    return ENVIRONMENTS[name](seed)


__all__ = [
    "CartPole", "ENVIRONMENTS", "Env", "EnvStep", "EpisodeOver", "HighwayConfig", "HighwayLite",
    "ThreeStateMDP", "ThreeStateMdpSpec", "cartpole_dynamics", "cartpole_step", "make_env",
    "three_state_step", "true_return_distributions", "value_bounds",
]
