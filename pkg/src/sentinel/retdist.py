"""Categorical return distributions on a fixed, evenly spaced atom support.

Everything here works on plain numpy arrays underneath; the dataclasses are
thin validated wrappers used at API boundaries. Hot paths (the agent's
training loop) call the ``*_batch`` helpers directly with ``(B, N)`` arrays.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import ndtr

KL_FLOOR = 1e-8
MASS_TOL = 1e-9


@dataclass(frozen=True)
class AtomSupport:
    v_min: float
    v_max: float
    n_atoms: int

    def __post_init__(self):
        if not self.v_min < self.v_max:
            raise ValueError(f"v_min ({self.v_min}) must be < v_max ({self.v_max})")
        if self.n_atoms < 2:
            raise ValueError(f"need at least 2 atoms, got {self.n_atoms}")

    @property
    def delta(self) -> float:
        return (self.v_max - self.v_min) / (self.n_atoms - 1)

    @cached_property
    def atoms(self) -> np.ndarray:
        z = self.v_min + self.delta * np.arange(self.n_atoms, dtype=float)
        z[-1] = self.v_max
        z.flags.writeable = False
        return z

    def to_dict(self) -> dict:
        return {"v_min": self.v_min, "v_max": self.v_max, "n_atoms": self.n_atoms}


@dataclass(frozen=True, eq=False)
class CategoricalReturnDistribution:
    support: AtomSupport
    masses: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.masses, dtype=float)
        if m.shape != (self.support.n_atoms,):
            raise ValueError(f"expected {self.support.n_atoms} masses, got shape {m.shape}")
        if np.any(m < 0) or not np.all(np.isfinite(m)):
            raise ValueError("masses must be finite and non-negative")
        if abs(m.sum() - 1.0) > MASS_TOL:
            raise ValueError(f"masses sum to {m.sum():.12g}, not 1")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "masses", m)

    @property
    def atoms(self) -> np.ndarray:
        return self.support.atoms

    def mean(self) -> float:
        return float(self.masses @ self.support.atoms)

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.masses)

    def __eq__(self, other):
        if not isinstance(other, CategoricalReturnDistribution):
            return NotImplemented
        return self.support == other.support and np.array_equal(self.masses, other.masses)

    @classmethod
    def point_mass(cls, support: AtomSupport, index: int) -> "CategoricalReturnDistribution":
        m = np.zeros(support.n_atoms)
        m[index] = 1.0
        return cls(support, m)

    @classmethod
    def uniform(cls, support: AtomSupport) -> "CategoricalReturnDistribution":
        return cls(support, np.full(support.n_atoms, 1.0 / support.n_atoms))

    def to_json(self) -> dict:
        return {"v_min": self.support.v_min, "v_max": self.support.v_max,
                "masses": [float(x) for x in self.masses]}

    @classmethod
    def from_json(cls, obj) -> "CategoricalReturnDistribution":
        if isinstance(obj, str):
            obj = json.loads(obj)
        masses = np.asarray(obj["masses"], dtype=float)
        return cls(AtomSupport(float(obj["v_min"]), float(obj["v_max"]), len(masses)), masses)


def _check_same_support(*dists: CategoricalReturnDistribution) -> AtomSupport:
    support = dists[0].support
    for d in dists[1:]:
        if d.support != support:
            raise ValueError(f"support mismatch: {support} vs {d.support}")
    return support


# -- Bellman projection -------------------------------------------------------

def project_batch(masses: np.ndarray, rewards, discounts, terminals,
                  support: AtomSupport) -> np.ndarray:
    """Project ``r + gamma * z`` back onto ``support`` for a batch.

    ``masses`` is ``(B, N)``; ``rewards``, ``discounts`` and ``terminals``
    broadcast to ``(B,)``. Terminal rows collapse onto the projected reward.
    """
    masses = np.atleast_2d(np.asarray(masses, dtype=float))
    batch, n = masses.shape
    z = support.atoms
    rewards = np.broadcast_to(np.asarray(rewards, dtype=float), (batch,))
    discounts = np.broadcast_to(np.asarray(discounts, dtype=float), (batch,))
    live = ~np.broadcast_to(np.asarray(terminals, dtype=bool), (batch,))

    tz = rewards[:, None] + (discounts * live)[:, None] * z[None, :]
    tz = np.clip(tz, support.v_min, support.v_max)
    b = (tz - support.v_min) / support.delta
    # snap values that are an atom up to rounding so exact hits stay exact
    nearest = np.rint(b)
    b = np.where(np.abs(b - nearest) < 1e-9, nearest, b)
    lower = np.floor(b).astype(np.int64)
    upper = np.minimum(lower + 1, n - 1)
    frac = b - lower
    w_upper = masses * frac
    w_lower = masses - w_upper

    rows = (np.arange(batch) * n)[:, None]
    out = np.bincount((rows + lower).ravel(), weights=w_lower.ravel(), minlength=batch * n)
    out += np.bincount((rows + upper).ravel(), weights=w_upper.ravel(), minlength=batch * n)
    return out.reshape(batch, n)


def project_bellman(dist: CategoricalReturnDistribution, reward: float, discount: float,
                    terminal: bool = False) -> CategoricalReturnDistribution:
    if not 0.0 <= discount <= 1.0:
        raise ValueError(f"discount must lie in [0, 1], got {discount}")
    out = project_batch(dist.masses[None, :], reward, discount, terminal, dist.support)[0]
    return CategoricalReturnDistribution(dist.support, out)


# -- combination and comparison -----------------------------------------------

def mixture(dists, weights) -> CategoricalReturnDistribution:
    dists = list(dists)
    support = _check_same_support(*dists)
    w = np.asarray(weights, dtype=float)
    if w.shape != (len(dists),):
        raise ValueError(f"{len(dists)} distributions but {w.size} weights")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
        raise ValueError("weights must lie on the simplex")
    masses = w @ np.stack([d.masses for d in dists])
    return CategoricalReturnDistribution(support, masses / masses.sum())


def floor_renormalize(masses: np.ndarray, eps: float = KL_FLOOR) -> np.ndarray:
    m = np.maximum(masses, eps)
    return m / m.sum(axis=-1, keepdims=True)


def kl_batch(p: np.ndarray, q: np.ndarray, eps: float = KL_FLOOR) -> np.ndarray:
    """KL(p || q) along the last axis after flooring both at ``eps``."""
    p = floor_renormalize(p, eps)
    q = floor_renormalize(q, eps)
    return np.maximum(np.sum(p * (np.log(p) - np.log(q)), axis=-1), 0.0)


def kl_divergence(p: CategoricalReturnDistribution, q: CategoricalReturnDistribution) -> float:
    _check_same_support(p, q)
    return float(kl_batch(p.masses, q.masses))


def wasserstein1_batch(p: np.ndarray, q: np.ndarray, delta: float) -> np.ndarray:
    return delta * np.abs(np.cumsum(p, axis=-1) - np.cumsum(q, axis=-1)).sum(axis=-1)


def wasserstein1(p: CategoricalReturnDistribution, q: CategoricalReturnDistribution) -> float:
    support = _check_same_support(p, q)
    return float(wasserstein1_batch(p.masses, q.masses, support.delta))


def discretize_gaussian_mixture(model, support: AtomSupport) -> CategoricalReturnDistribution:
    """Bin a Gaussian mixture onto ``support`` by exact CDF mass per atom bin.

    ``model`` needs ``weights``, ``means`` and ``variances`` sequences. Atom i
    owns ``[z_i - dz/2, z_i + dz/2]``; the outermost bins extend to infinity.
    """
    z = support.atoms
    edges = np.concatenate(([-np.inf], z[:-1] + 0.5 * support.delta, [np.inf]))
    w = np.asarray(model.weights, dtype=float)
    mu = np.asarray(model.means, dtype=float)
    sd = np.sqrt(np.asarray(model.variances, dtype=float))
    with np.errstate(invalid="ignore"):
        cdf = ndtr((edges[None, :] - mu[:, None]) / sd[:, None])
    cdf[:, 0], cdf[:, -1] = 0.0, 1.0
    masses = w @ np.diff(cdf, axis=1)
    masses = np.maximum(masses, 0.0)
    return CategoricalReturnDistribution(support, masses / masses.sum())
