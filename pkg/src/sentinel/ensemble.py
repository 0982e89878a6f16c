"""Bootstrapped ensemble of categorical learners with FTRL weighting.

K members each own a value and a target network and learn from their own
Bernoulli-masked view of a shared replay buffer. At decision time every
member's predicted return distribution is scored with the aleatory measure
``u_a``; the K scores are then combined with the epistemic measure ``u_e``
under FTRL weights that favour members close to the ensemble marginal.

Array conventions used throughout: ``probs`` has shape ``(..., K, A, N)``
(members, actions, atoms) and weights have shape ``(..., K, A)``.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .approx import OptimizerState, ValueNetwork, sync_target, train_step
from .retdist import AtomSupport, CategoricalReturnDistribution, kl_batch, project_batch
from .risk import RiskMeasureSpec, cvar_atoms, cvar_weighted

_STREAMS = {"init": 0, "explore": 1, "mask": 2, "sample": 3}


def stream_rng(seed: int, name: str, *extra: int) -> np.random.Generator:
    """Independent generator for one named purpose (and optional member index)."""
    return np.random.default_rng([int(seed), _STREAMS[name], *extra])


@dataclass
class AgentConfig:
    k: int = 4
    lam: float = 1.0
    u_a: RiskMeasureSpec = field(default_factory=RiskMeasureSpec.neutral)
    u_e: RiskMeasureSpec = field(default_factory=RiskMeasureSpec.neutral)
    gamma: float = 0.99
    mask_prob: float = 1.0 / 3.0
    batch_size: int = 32
    value_update_period: int = 4
    target_update_period: int = 250
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_steps: int = 1000
    support: AtomSupport = AtomSupport(0.0, 1.0, 51)
    hidden: tuple = (64, 64)
    activation: str = "relu"
    lr: float = 1e-3
    buffer_capacity: int = 100_000
    ftrl_refresh: int = 1
    seed: int = 0

    def __post_init__(self):
        self.u_a = RiskMeasureSpec.from_dict(self.u_a)
        self.u_e = RiskMeasureSpec.from_dict(self.u_e)
        if isinstance(self.support, dict):
            self.support = AtomSupport(**self.support)
        self.hidden = tuple(self.hidden)
        if self.k < 1:
            raise ValueError("need at least one ensemble member")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        if not 0.0 < self.mask_prob <= 1.0:
            raise ValueError("mask_prob must lie in (0, 1]")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if min(self.value_update_period, self.target_update_period, self.batch_size, self.ftrl_refresh) < 1:
            raise ValueError("periods, batch size and ftrl_refresh must be >= 1")

    def epsilon(self, t: int) -> float:
        if t >= self.eps_decay_steps:
            return self.eps_end
        return self.eps_start + (self.eps_end - self.eps_start) * t / self.eps_decay_steps

    def to_dict(self) -> dict:
        d = asdict(self)
        d["u_a"], d["u_e"] = self.u_a.to_dict(), self.u_e.to_dict()
        d["support"] = self.support.to_dict()
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AgentConfig":
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        return cls(**d)


# -- pure array helpers -----------------------------------------------------------

def expectation(probs: np.ndarray, atoms: np.ndarray) -> np.ndarray:
    return (probs * atoms).sum(axis=-1)


def aleatory_values(probs: np.ndarray, atoms: np.ndarray, u_a: RiskMeasureSpec) -> np.ndarray:
    if u_a.kind == "neutral":
        return expectation(probs, atoms)
    return cvar_atoms(probs, atoms, u_a.alpha)


def ftrl_weights_from_losses(losses, lam: float, axis: int = -1) -> np.ndarray:
    """Exponential weights ``w_i ~ exp(-lam * l_i)`` normalised along ``axis``."""
    losses = np.asarray(losses, dtype=float)
    if lam == 0:
        return np.full(losses.shape, 1.0 / losses.shape[axis])
    logits = -lam * losses
    logits = logits - logits.max(axis=axis, keepdims=True)
    w = np.exp(logits)
    return w / w.sum(axis=axis, keepdims=True)


def member_losses(probs: np.ndarray) -> np.ndarray:
    """KL(uniform marginal || member) for every member/action: ``(..., K, A)``."""
    marginal = probs.mean(axis=-3, keepdims=True)
    return kl_batch(marginal, probs)


def ftrl_weights_batch(probs: np.ndarray, lam: float) -> np.ndarray:
    if probs.shape[-3] == 1:
        return np.ones(probs.shape[:-1])
    return ftrl_weights_from_losses(member_losses(probs), lam, axis=-2)


def composite_values(probs: np.ndarray, atoms: np.ndarray, weights: np.ndarray,
                     u_a: RiskMeasureSpec, u_e: RiskMeasureSpec) -> np.ndarray:
    """``u_e`` over members of the ``u_a`` values, shape ``(..., A)``."""
    q_a = aleatory_values(probs, atoms, u_a)
    if u_e.kind == "neutral":
        return np.sum(weights * q_a, axis=-2)
    return cvar_weighted(np.swapaxes(q_a, -1, -2), np.swapaxes(weights, -1, -2), u_e.alpha)


# -- functions on distribution objects ------------------------------------------------------

def ftrl_weights(member_dists, lam: float) -> np.ndarray:
    support = member_dists[0].support
    if any(d.support != support for d in member_dists):
        raise ValueError("members must share one support")
    probs = np.stack([d.masses for d in member_dists])[:, None, :]
    return ftrl_weights_batch(probs, lam)[:, 0]


# -- replay ------------------------------------------------------------------------------

class ReplayBuffer:
    """Ring buffer of transitions, each carrying a fixed K-bit inclusion mask."""

    def __init__(self, capacity: int, state_dim: int, k: int):
        self.capacity = int(capacity)
        self.k = k
        self.states = np.zeros((capacity, state_dim))
        self.next_states = np.zeros((capacity, state_dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.terminals = np.zeros(capacity, dtype=bool)
        self.masks = np.zeros((capacity, k), dtype=bool)
        self.size = 0
        self.inserted = 0

    def add(self, state, action, reward, next_state, terminal, mask) -> None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (self.k,):
            raise ValueError(f"mask must have exactly {self.k} bits")
        i = self.inserted % self.capacity
        self.states[i] = state
        self.next_states[i] = next_state
        self.actions[i] = action
        self.rewards[i] = reward
        self.terminals[i] = terminal
        self.masks[i] = mask
        self.inserted += 1
        self.size = min(self.size + 1, self.capacity)

    def member_indices(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.masks[: self.size, i])

    def metadata(self) -> dict:
        return {"capacity": self.capacity, "size": self.size, "inserted": self.inserted,
                "member_view_sizes": [int(self.masks[: self.size, i].sum()) for i in range(self.k)]}


@dataclass
class EnsembleMember:
    index: int
    value_net: ValueNetwork
    target_net: ValueNetwork
    optimizer: OptimizerState


# -- the agent -------------------------------------------------------------------------------

class SentinelAgent:
    def __init__(self, config: AgentConfig, state_dim: int, n_actions: int):
        self.config = config
        self.state_dim = state_dim
        self.n_actions = n_actions
        self.atoms = config.support.atoms
        self.members: list[EnsembleMember] = []
        for i in range(config.k):
            net = ValueNetwork(state_dim, n_actions, config.support, config.hidden, config.activation,
                               rng=stream_rng(config.seed, "init", i))
            self.members.append(EnsembleMember(i, net, sync_target(net),
                                               OptimizerState.for_network(net, lr=config.lr)))
        self.buffer = ReplayBuffer(config.buffer_capacity, state_dim, config.k)
        self.explore_rng = stream_rng(config.seed, "explore")
        self.mask_rng = stream_rng(config.seed, "mask")
        self.sample_rng = stream_rng(config.seed, "sample")
        self.env_steps = 0
        self.updates = 0
        self.target_syncs = 0
        self.skipped_updates = 0
        self.last_losses = np.zeros(config.k)
        self.sampled_indices: list[np.ndarray] | None = None
        self._obs = None
        self._cached_weights = None
        self._decisions = 0

    # -- prediction ------------------------------------------------------

    def member_probs(self, states, target: bool = False) -> np.ndarray:
        """``(B, K, A, N)`` predictions of every member's value (or target) net."""
        nets = [m.target_net if target else m.value_net for m in self.members]
        return np.stack([n.probs(states) for n in nets], axis=1)

    def weights_at(self, probs: np.ndarray) -> np.ndarray:
        return ftrl_weights_batch(probs, self.config.lam)

    def composite_q(self, state, weights=None) -> np.ndarray:
        """Composite value of every action at ``state``."""
        probs = self.member_probs(state)[0]
        if weights is None:
            weights = self.weights_at(probs)
        return composite_values(probs, self.atoms, weights, self.config.u_a, self.config.u_e)

    def marginal(self, state) -> list[CategoricalReturnDistribution]:
        """Uniform mixture of the members' value-net predictions, per action."""
        p = self.member_probs(state)[0].mean(axis=0)
        return [CategoricalReturnDistribution(self.config.support, row / row.sum()) for row in p]

    def diagnostics(self, state) -> dict:
        probs = self.member_probs(state)[0]
        return {"kl_loss": member_losses(probs).mean(axis=-1) if self.config.k > 1 else np.zeros(1),
                "ftrl_weight": self.weights_at(probs).mean(axis=-1)}

    # -- acting ----------------------------------------------------------

    def greedy_action(self, state) -> int:
        probs = self.member_probs(state)[0]
        cfg = self.config
        if cfg.ftrl_refresh > 1 and self._cached_weights is not None and self._decisions % cfg.ftrl_refresh:
            weights = self._cached_weights
        else:
            weights = self._cached_weights = self.weights_at(probs)
        self._decisions += 1
        q = composite_values(probs, self.atoms, weights, cfg.u_a, cfg.u_e)
        return int(np.argmax(q))

    def select_action(self, state) -> int:
        if self.explore_rng.random() < self.config.epsilon(self.env_steps):
            return int(self.explore_rng.integers(self.n_actions))
        return self.greedy_action(state)

    def act_and_record(self, env):
        if self._obs is None or env.done:
            self._obs = env.reset()
        state = self._obs
        action = self.select_action(state)
        out = env.step(action)
        mask = self.mask_rng.random(self.config.k) < self.config.mask_prob
        self.buffer.add(state, action, out.reward, out.next_state, out.terminal, mask)
        self._obs = out.next_state
        self.env_steps += 1
        return action, out

    # -- learning --------------------------------------------------------

    def ready(self) -> bool:
        if self.buffer.size < self.config.batch_size:
            return False
        return bool(self.buffer.masks[: self.buffer.size].any(axis=0).all())

    def training_step(self, global_step: int) -> dict:
        cfg = self.config
        info = {"updated": False, "synced": False}
        if global_step % cfg.value_update_period == 0:
            if self.ready():
                self.last_losses = self._update_members()
                self.updates += 1
                info["updated"] = True
            else:
                self.skipped_updates += 1
        if global_step % cfg.target_update_period == 0 and self.updates > 0:
            for m in self.members:
                m.target_net = sync_target(m.value_net)
            self.target_syncs += 1
            info["synced"] = True
        return info

    def _update_members(self) -> np.ndarray:
        cfg, buf = self.config, self.buffer
        batch = cfg.batch_size
        picks = []
        for i in range(cfg.k):
            view = buf.member_indices(i)
            picks.append(view[self.sample_rng.integers(len(view), size=batch)])
        self.sampled_indices = picks
        idx = np.concatenate(picks)

        # one pass of every target net over all K minibatches' next states
        target_probs = self.member_probs(buf.next_states[idx], target=True)
        weights = self.weights_at(target_probs)
        q_next = composite_values(target_probs, self.atoms, weights, cfg.u_a, cfg.u_e)
        a_star = np.argmax(q_next, axis=-1)

        losses = np.empty(cfg.k)
        for i, m in enumerate(self.members):
            rows = slice(i * batch, (i + 1) * batch)
            sel = idx[rows]
            p_next = target_probs[np.arange(i * batch, (i + 1) * batch), i, a_star[rows]]
            targets = project_batch(p_next, buf.rewards[sel], cfg.gamma, buf.terminals[sel], cfg.support)
            losses[i] = train_step(m.value_net, m.optimizer, buf.states[sel], buf.actions[sel], targets)
        return losses

    # -- checkpoints -----------------------------------------------------

    def save_checkpoint(self, directory) -> None:
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        for m in self.members:
            m.value_net.save(out / f"member{m.index}_value.json")
            m.target_net.save(out / f"member{m.index}_target.json")
        meta = {"config": self.config.to_dict(), "env_steps": self.env_steps, "updates": self.updates,
                "target_syncs": self.target_syncs, "buffer": self.buffer.metadata()}
        (out / "agent.json").write_text(json.dumps(meta, indent=2, sort_keys=True))

    @classmethod
    def load_checkpoint(cls, directory) -> "SentinelAgent":
        """Restore networks and counters; the replay contents are not persisted."""
        src = Path(directory)
        meta = json.loads((src / "agent.json").read_text())
        config = AgentConfig.from_dict(meta["config"])
        first = ValueNetwork.load(src / "member0_value.json")
        agent = cls(config, first.state_dim, first.n_actions)
        for m in agent.members:
            m.value_net = ValueNetwork.load(src / f"member{m.index}_value.json")
            m.target_net = ValueNetwork.load(src / f"member{m.index}_target.json")
            m.optimizer = OptimizerState.for_network(m.value_net, lr=config.lr)
        agent.env_steps, agent.updates = meta["env_steps"], meta["updates"]
        agent.target_syncs = meta["target_syncs"]
        return agent


def composite_q(agent: SentinelAgent, weights, state, action: int) -> float:
    return float(agent.composite_q(state, weights)[action])


def select_action(agent: SentinelAgent, state) -> int:
    return agent.select_action(state)
