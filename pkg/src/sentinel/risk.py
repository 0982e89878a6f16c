"""Coherent risk measures and the aleatory / epistemic / composite functionals.

Conventions: all quantities are *returns* (higher is better) and CVaR is the
left-tail expectation of the worst ``alpha`` fraction, so ``alpha = 1`` gives
the mean and smaller ``alpha`` is more pessimistic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Optional, Sequence

import numpy as np

from .retdist import CategoricalReturnDistribution

_STD_NORMAL = NormalDist()


@dataclass(frozen=True)
class RiskMeasureSpec:
    kind: str = "neutral"
    alpha: Optional[float] = None

    def __post_init__(self):
        if self.kind == "neutral":
            if self.alpha is not None:
                raise ValueError("neutral risk measure takes no alpha")
        elif self.kind == "cvar":
            _check_level(self.alpha)
        else:
            raise ValueError(f"unknown risk measure kind {self.kind!r}")

    @classmethod
    def neutral(cls) -> "RiskMeasureSpec":
        return cls("neutral")

    @classmethod
    def cvar(cls, alpha: float) -> "RiskMeasureSpec":
        return cls("cvar", float(alpha))

    @property
    def level(self) -> float:
        """Tail fraction; neutral behaves exactly like CVaR at level 1."""
        return 1.0 if self.kind == "neutral" else self.alpha

    def to_dict(self) -> dict:
        return {"kind": self.kind, "alpha": self.alpha}

    @classmethod
    def from_dict(cls, d) -> "RiskMeasureSpec":
        if isinstance(d, RiskMeasureSpec):
            return d
        return cls(d.get("kind", "neutral"), d.get("alpha"))

    def __str__(self):
        return "neutral" if self.kind == "neutral" else f"cvar{self.alpha:g}"


@dataclass(frozen=True)
class TailStatistics:
    var: float
    cvar: float


@dataclass(frozen=True, eq=False)
class GaussianMixtureModel:
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        w, mu, var = (np.asarray(x, dtype=float) for x in (self.weights, self.means, self.variances))
        if not (w.shape == mu.shape == var.shape) or w.ndim != 1:
            raise ValueError("weights, means and variances must be 1-D and equally long")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must lie on the simplex")
        if np.any(var <= 0):
            raise ValueError("variances must be strictly positive")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "variances", var)

    @property
    def n_components(self) -> int:
        return self.weights.size

    def mean(self) -> float:
        return float(self.weights @ self.means)


def _check_level(alpha) -> None:
    if alpha is None or not (0.0 < alpha <= 1.0) or math.isnan(alpha):
        raise ValueError(f"invalid level alpha={alpha!r}; must lie in (0, 1]")


# -- CVaR in its three flavours ---------------------------------------------------

def cvar_empirical(samples, alpha: float) -> TailStatistics:
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("no samples")
    _check_level(alpha)
    if alpha == 1.0:
        return TailStatistics(var=float(x.max()), cvar=float(x.mean()))
    k = max(1, math.ceil(alpha * x.size - 1e-9))
    tail = np.partition(x, k - 1)[:k]
    return TailStatistics(var=float(tail.max()), cvar=float(tail.mean()))


def cvar_gaussian(mu: float, sigma: float, alpha: float) -> float:
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    _check_level(alpha)
    if alpha == 1.0:
        return float(mu)
    return float(mu - sigma * _STD_NORMAL.pdf(_STD_NORMAL.inv_cdf(alpha)) / alpha)


def cvar_weighted(values, weights, alpha: float) -> np.ndarray:
    """Left-tail CVaR of discrete distributions, vectorised over leading axes.

    ``values`` and ``weights`` have shape ``(..., M)``; the values need not be
    sorted. The boundary atom contributes fractionally so the tail mass is
    exactly ``alpha``.
    """
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if alpha == 1.0:
        return np.sum(values * weights, axis=-1)
    order = np.argsort(values, axis=-1, kind="stable")
    v = np.take_along_axis(values, order, axis=-1)
    w = np.take_along_axis(np.broadcast_to(weights, values.shape), order, axis=-1)
    return _sorted_tail_mean(v, w, alpha)


def _sorted_tail_mean(v, w, alpha):
    # mass of each atom that falls inside the lowest-alpha tail
    tail = alpha - (np.cumsum(w, axis=-1) - w)
    np.minimum(tail, w, out=tail)
    np.maximum(tail, 0.0, out=tail)
    return np.sum(tail * v, axis=-1) / alpha


def cvar_atoms(masses, atoms, alpha: float) -> np.ndarray:
    """CVaR for masses on an already increasing atom grid, batched over ``(..., N)``."""
    masses = np.asarray(masses, dtype=float)
    if alpha == 1.0:
        return masses @ atoms
    return _sorted_tail_mean(atoms, masses, alpha)


def var_atoms(masses, atoms, alpha: float) -> np.ndarray:
    cum = np.cumsum(masses, axis=-1)
    idx = np.argmax(cum >= alpha - 1e-12, axis=-1)
    return np.asarray(atoms)[idx]


def cvar_categorical(dist: CategoricalReturnDistribution, alpha: float) -> TailStatistics:
    _check_level(alpha)
    if abs(dist.masses.sum() - 1.0) > 1e-9:
        raise ValueError("invalid distribution")
    return TailStatistics(var=float(var_atoms(dist.masses, dist.atoms, alpha)),
                          cvar=float(cvar_atoms(dist.masses, dist.atoms, alpha)))


# -- applying a RiskMeasureSpec -------------------------------------------------------

def apply_risk(spec: RiskMeasureSpec, dist: CategoricalReturnDistribution) -> float:
    if spec.kind == "neutral":
        return dist.mean()
    return cvar_categorical(dist, spec.alpha).cvar


def apply_risk_discrete(spec: RiskMeasureSpec, values, weights) -> float:
    """Risk of the discrete distribution putting ``weights[i]`` on ``values[i]``."""
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if values.shape != weights.shape:
        raise ValueError(f"{values.size} values but {weights.size} weights")
    if spec.kind == "neutral":
        return float(values @ weights)
    return float(cvar_weighted(values, weights, spec.alpha))


def _belief(model_dists, belief_weights) -> np.ndarray:
    beta = np.asarray(belief_weights, dtype=float)
    if beta.shape != (len(model_dists),):
        raise ValueError(f"{len(model_dists)} models but {beta.size} belief weights")
    if np.any(beta < 0) or abs(beta.sum() - 1.0) > 1e-9:
        raise ValueError("belief weights must lie on the simplex")
    return beta


def epistemic_risk(model_dists: Sequence[CategoricalReturnDistribution], belief_weights,
                   u_e: RiskMeasureSpec) -> float:
    beta = _belief(model_dists, belief_weights)
    return apply_risk_discrete(u_e, [d.mean() for d in model_dists], beta)


def additive_risk(model_dists, belief_weights, u_a: RiskMeasureSpec) -> float:
    beta = _belief(model_dists, belief_weights)
    return float(beta @ np.array([apply_risk(u_a, d) for d in model_dists]))


def aleatory_risk(model_dists, belief_weights, u_a: RiskMeasureSpec) -> float:
    """Belief-averaged model risk, centred on the risk of the model means.

    Centring on ``U_A`` of the belief-weighted distribution of model means is
    what makes ``additive == aleatory + epistemic`` hold exactly when the
    epistemic measure is ``U_A`` too.
    """
    return additive_risk(model_dists, belief_weights, u_a) - epistemic_risk(model_dists, belief_weights, u_a)


def composite_risk(model_dists, belief_weights, u_a: RiskMeasureSpec, u_e: RiskMeasureSpec) -> float:
    beta = _belief(model_dists, belief_weights)
    inner = [apply_risk(u_a, d) for d in model_dists]
    return apply_risk_discrete(u_e, inner, beta)


# -- Gaussian mixture study ----------------------------------------------------------------

def sample_mixture_prior(m: int, rng_seed: int) -> GaussianMixtureModel:
    """Dir(0.5) weights, N(0, 1) means, inverse-gamma(shape 2, scale 1) variances."""
    if m < 1:
        raise ValueError("need at least one component")
    rng = np.random.default_rng(rng_seed)
    w = rng.dirichlet(np.full(m, 0.5))
    w = w / w.sum()
    mu = rng.standard_normal(m)
    var = 1.0 / rng.gamma(shape=2.0, scale=1.0, size=m)
    return GaussianMixtureModel(w, mu, var)


def sample_mixture(model: GaussianMixtureModel, n_samples: int, rng) -> np.ndarray:
    rng = np.random.default_rng(rng)
    comp = rng.choice(model.n_components, size=n_samples, p=model.weights)
    return rng.normal(model.means[comp], np.sqrt(model.variances[comp]))


def mixture_cvar_oracle(model: GaussianMixtureModel, alpha: float, n_samples: int = 100_000,
                        rng_seed: int = 0) -> float:
    _check_level(alpha)
    if n_samples < 10_000:
        raise ValueError("the oracle needs at least 10^4 samples")
    return cvar_empirical(sample_mixture(model, n_samples, rng_seed), alpha).cvar


def component_cvars(model: GaussianMixtureModel, alpha: float) -> np.ndarray:
    sd = np.sqrt(model.variances)
    return np.array([cvar_gaussian(m, s, alpha) for m, s in zip(model.means, sd)])
