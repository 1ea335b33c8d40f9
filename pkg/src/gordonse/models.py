"""Synthetic data for the two observation models, the weight functions that
define each update, and the initialization schemes.

Both models share Gaussian covariates x ~ N(0, I_d) and Gaussian noise
eps ~ N(0, sigma^2).  Phase retrieval observes |<x, theta*>| + eps, the
symmetric two-component mixture observes q * <x, theta*> + eps with a
Rademacher label q.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


class ModelKind(str, enum.Enum):
    PHASE_RETRIEVAL = "phase_retrieval"
    MIXTURE = "mixture_of_regressions"


class Algorithm(str, enum.Enum):
    AM_PR = "am_pr"
    GD_PR = "gd_pr"
    AM_MLR = "am_mlr"
    SUBGRAD_MLR = "subgrad_mlr"

    @property
    def model(self) -> ModelKind:
        if self in (Algorithm.AM_PR, Algorithm.GD_PR):
            return ModelKind.PHASE_RETRIEVAL
        return ModelKind.MIXTURE

    @property
    def first_order(self) -> bool:
        return self in (Algorithm.GD_PR, Algorithm.SUBGRAD_MLR)


def make_stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator addressed by ``(seed, *key)``.

    Streams with different keys never overlap, so trial ``k`` iteration ``t``
    can be regenerated without replaying anything else.
    """
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF,
                                spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class ModelSpec:
    kind: ModelKind
    sigma: float
    d: int
    n: int
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))
        if self.d < 1 or self.n < 1:
            raise ValueError(f"need d >= 1 and n >= 1, got d={self.d}, n={self.n}")
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")

    @property
    def kappa(self) -> float:
        return self.n / self.d


@dataclass(frozen=True)
class GroundTruth:
    theta_star: np.ndarray

    def __post_init__(self):
        norm = np.linalg.norm(self.theta_star)
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"theta_star must have unit norm, got {norm!r}")

    @property
    def d(self) -> int:
        return self.theta_star.shape[0]

    @classmethod
    def basis(cls, d: int) -> "GroundTruth":
        e1 = np.zeros(d)
        e1[0] = 1.0
        return cls(e1)

    @classmethod
    def random(cls, d: int, rng: np.random.Generator) -> "GroundTruth":
        u = rng.standard_normal(d)
        u /= np.linalg.norm(u)
        # renormalise once more so the 1e-12 invariant holds after rounding
        return cls(u / np.linalg.norm(u))


@dataclass
class Batch:
    X: np.ndarray
    y: np.ndarray
    q: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.X.shape[0]


def sign(x):
    """Sign with sign(0) = +1."""
    return np.where(np.asarray(x) >= 0, 1.0, -1.0)


def link(kind: ModelKind, t, q=None):
    """Noiseless response for projection ``t`` (and label ``q`` for mixtures)."""
    if ModelKind(kind) is ModelKind.PHASE_RETRIEVAL:
        return np.abs(t)
    if q is None:
        raise ValueError("mixture link needs latent labels")
    return q * t


def sample_batch(spec: ModelSpec, truth: GroundTruth,
                 rng: np.random.Generator) -> Batch:
    if truth.d != spec.d:
        raise ValueError(f"truth has dimension {truth.d}, spec says {spec.d}")
    X = rng.standard_normal((spec.n, spec.d))
    t = X @ truth.theta_star
    eps = spec.sigma * rng.standard_normal(spec.n)
    if spec.kind is ModelKind.PHASE_RETRIEVAL:
        return Batch(X, np.abs(t) + eps)
    q = np.where(rng.random(spec.n) < 0.5, -1.0, 1.0)
    return Batch(X, q * t + eps, q)


@dataclass(frozen=True)
class WeightFunction:
    """A scalar rule omega(x, y) applied to projections x = <x_i, theta>."""

    tag: str
    rule: Callable[[np.ndarray, np.ndarray], np.ndarray]
    first_order: bool = False

    def __call__(self, x, y):
        return self.rule(np.asarray(x, dtype=float), np.asarray(y, dtype=float))


def _am_pr(x, y):
    return sign(x) * y


def _am_mlr(x, y):
    return sign(y * x) * y


def first_order_weight(higher_order: WeightFunction, tag: str) -> WeightFunction:
    """First-order weight x - omega_HO(x, y) paired with a higher-order one."""
    rule = higher_order.rule
    return WeightFunction(tag, lambda x, y: x - rule(x, y), first_order=True)


AM_PR_WEIGHT = WeightFunction("am_pr", _am_pr)
AM_MLR_WEIGHT = WeightFunction("am_mlr", _am_mlr)
GD_PR_WEIGHT = first_order_weight(AM_PR_WEIGHT, "gd_pr")
SUBGRAD_MLR_WEIGHT = first_order_weight(AM_MLR_WEIGHT, "subgrad_mlr")

WEIGHTS = {
    Algorithm.AM_PR: AM_PR_WEIGHT,
    Algorithm.GD_PR: GD_PR_WEIGHT,
    Algorithm.AM_MLR: AM_MLR_WEIGHT,
    Algorithm.SUBGRAD_MLR: SUBGRAD_MLR_WEIGHT,
}


def weight_for(algorithm) -> WeightFunction:
    return WEIGHTS[Algorithm(algorithm)]


def _unit_sphere(d: int, rng: np.random.Generator) -> np.ndarray:
    u = rng.standard_normal(d)
    return u / np.linalg.norm(u)


def random_sphere_init(d: int, scale: float, rng: np.random.Generator) -> np.ndarray:
    if d < 1:
        raise ValueError(f"d must be positive, got {d}")
    if not scale > 0:
        raise ValueError(f"scale must be positive, got {scale}")
    return scale * _unit_sphere(d, rng)


def norm_matched_init(batch: Batch, rng: np.random.Generator) -> np.ndarray:
    scale = np.sqrt(np.mean(batch.y ** 2))
    return scale * _unit_sphere(batch.X.shape[1], rng)


def directional_init(truth: GroundTruth, alpha0: float,
                     rng: np.random.Generator) -> np.ndarray:
    """Point with state exactly (alpha0, sqrt(1 - alpha0^2)), random orthogonal part."""
    if not 0.0 <= alpha0 <= 1.0:
        raise ValueError(f"alpha0 must lie in [0, 1], got {alpha0}")
    ts = truth.theta_star
    if alpha0 == 1.0 or truth.d == 1:
        if alpha0 != 1.0:
            raise ValueError("no orthogonal direction exists in dimension 1")
        return ts.copy()
    g = _unit_sphere(truth.d, rng)
    perp = g - (g @ ts) * ts
    perp /= np.linalg.norm(perp)
    return alpha0 * ts + np.sqrt(1.0 - alpha0 ** 2) * perp
