"""Small numpy MLP producing per-action categorical logits, with hand backprop.

The network maps a state of dimension ``d`` to ``n_actions * n_atoms`` logits;
a softmax over each action's ``n_atoms`` slice gives that action's return
distribution. Training minimises cross-entropy to projected Bellman targets
with an Adam step.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .retdist import AtomSupport, CategoricalReturnDistribution

CHECKPOINT_FORMAT = "sentinel-valuenet/1"

_ACTIVATIONS = {
    "relu": (lambda z: np.maximum(z, 0.0), lambda z, h: (z > 0).astype(z.dtype)),
    "tanh": (np.tanh, lambda z, h: 1.0 - h * h),
}


def log_softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(x: np.ndarray) -> np.ndarray:
    e = np.exp(x - x.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


class ValueNetwork:
    def __init__(self, state_dim: int, n_actions: int, support: AtomSupport,
                 hidden=(64, 64), activation: str = "relu", rng=None, zero_output: bool = False):
        if activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.state_dim = int(state_dim)
        self.n_actions = int(n_actions)
        self.support = support
        self.hidden = tuple(int(h) for h in hidden)
        self.activation = activation
        rng = np.random.default_rng(rng)
        widths = (self.state_dim, *self.hidden, self.n_actions * support.n_atoms)
        self.params: list[np.ndarray] = []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.params.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.params.append(np.zeros(fan_out))
        if zero_output:
            self.params[-2][:] = 0.0

    @property
    def n_atoms(self) -> int:
        return self.support.n_atoms

    def _check_states(self, states) -> np.ndarray:
        x = np.asarray(states, dtype=float)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[-1] != self.state_dim:
            raise ValueError(f"state dimension {x.shape[-1]} != network input {self.state_dim}")
        return x

    def _forward(self, x):
        act, _ = _ACTIVATIONS[self.activation]
        cache = [x]
        h = x
        n_layers = len(self.params) // 2
        for layer in range(n_layers):
            W, b = self.params[2 * layer], self.params[2 * layer + 1]
            z = h @ W + b
            if layer < n_layers - 1:
                h = act(z)
                cache.append((z, h))
            else:
                h = z
        return h.reshape(len(x), self.n_actions, self.n_atoms), cache

    def logits(self, states) -> np.ndarray:
        return self._forward(self._check_states(states))[0]

    def probs(self, states) -> np.ndarray:
        """Atom masses, shape ``(B, n_actions, n_atoms)``."""
        return softmax(self.logits(states))

    def forward(self, state) -> list[CategoricalReturnDistribution]:
        x = np.asarray(state, dtype=float)
        if x.ndim != 1:
            raise ValueError("forward takes a single state vector")
        p = self.probs(x)[0]
        return [CategoricalReturnDistribution(self.support, p[a] / p[a].sum()) for a in range(self.n_actions)]

    def loss_and_grads(self, states, actions, targets):
        """Mean cross-entropy of the chosen actions' distributions and its gradient."""
        x = self._check_states(states)
        actions = np.asarray(actions, dtype=np.int64)
        targets = np.asarray(targets, dtype=float)
        batch = len(x)
        logits, cache = self._forward(x)
        rows = np.arange(batch)
        logp = log_softmax(logits[rows, actions])
        loss = float(-np.sum(targets * logp) / batch)

        d_logits = np.zeros_like(logits)
        d_logits[rows, actions] = (np.exp(logp) * targets.sum(axis=-1, keepdims=True) - targets) / batch
        grads = self._backward(d_logits.reshape(batch, -1), cache)
        return loss, grads

    def _backward(self, d_out, cache):
        _, dact = _ACTIVATIONS[self.activation]
        n_layers = len(self.params) // 2
        grads = [None] * len(self.params)
        delta = d_out
        for layer in reversed(range(n_layers)):
            h_in = cache[0] if layer == 0 else cache[layer][1]
            grads[2 * layer] = h_in.T @ delta
            grads[2 * layer + 1] = delta.sum(axis=0)
            if layer > 0:
                z, h = cache[layer]
                delta = (delta @ self.params[2 * layer].T) * dact(z, h)
        return grads

    def copy(self) -> "ValueNetwork":
        clone = object.__new__(ValueNetwork)
        clone.__dict__.update(self.__dict__)
        clone.params = [p.copy() for p in self.params]
        return clone

    # -- checkpoints ---------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "state_dim": self.state_dim,
            "n_actions": self.n_actions,
            "hidden": list(self.hidden),
            "activation": self.activation,
            "support": self.support.to_dict(),
            "tensors": [
                {"name": f"{'W' if i % 2 == 0 else 'b'}{i // 2}", "shape": list(p.shape),
                 "data": p.ravel().tolist()}
                for i, p in enumerate(self.params)
            ],
        }

    @classmethod
    def from_json(cls, obj) -> "ValueNetwork":
        if obj.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"not a value-network checkpoint: {obj.get('format')!r}")
        net = cls(obj["state_dim"], obj["n_actions"], AtomSupport(**obj["support"]),
                  hidden=obj["hidden"], activation=obj["activation"])
        tensors = [np.asarray(t["data"], dtype=float).reshape(t["shape"]) for t in obj["tensors"]]
        if [t.shape for t in tensors] != [p.shape for p in net.params]:
            raise ValueError("checkpoint tensor shapes do not match the declared architecture")
        net.params = tensors
        return net

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path) -> "ValueNetwork":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass
class OptimizerState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_network(cls, net: ValueNetwork, **kwargs) -> "OptimizerState":
        return cls(m=[np.zeros_like(p) for p in net.params],
                   v=[np.zeros_like(p) for p in net.params], **kwargs)


def adam_update(params, grads, opt: OptimizerState) -> None:
    opt.step += 1
    c1 = 1.0 - opt.beta1 ** opt.step
    c2 = 1.0 - opt.beta2 ** opt.step
    step = opt.lr / c1
    for p, g, m, v in zip(params, grads, opt.m, opt.v):
        m *= opt.beta1
        m += (1.0 - opt.beta1) * g
        v *= opt.beta2
        v += (1.0 - opt.beta2) * (g * g)
        denom = np.sqrt(v / c2)
        denom += opt.eps
        p -= step * m / denom


def train_step(net: ValueNetwork, opt: OptimizerState, states, actions, targets) -> float:
    """One Adam step on the cross-entropy to ``targets``; updates in place, returns the loss."""
    targets = np.asarray(targets, dtype=float)
    if targets.shape[-1] != net.n_atoms:
        raise ValueError(f"targets have {targets.shape[-1]} atoms, network has {net.n_atoms}")
    loss, grads = net.loss_and_grads(states, actions, targets)
    bad = [i for i, g in enumerate(grads) if not np.all(np.isfinite(g))]
    if bad or not np.isfinite(loss):
        raise FloatingPointError(
            f"non-finite gradient in tensors {bad} (loss={loss}) at optimizer step {opt.step}")
    adam_update(net.params, grads, opt)
    return loss


def sync_target(value_net: ValueNetwork) -> ValueNetwork:
    return value_net.copy()
