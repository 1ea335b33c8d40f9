"""Empirical one-step operators and the sample-splitting trajectory runner."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import qr_multiply, solve_triangular

from .analysis import d_angle, d_l2
from .models import (Algorithm, Batch, GroundTruth, ModelSpec, WeightFunction,
                     make_stream, sample_batch, weight_for)
from .state_evolution import StatePoint

# largest tolerated ratio between the extreme diagonal entries of R
MAX_CONDITION = 1e12


class RankDeficientError(np.linalg.LinAlgError):
    def __init__(self, message: str, condition: float):
        super().__init__(message)
        self.condition = condition


class IterationError(RuntimeError):
    def __init__(self, iteration: int, cause: Exception):
        super().__init__(f"step {iteration} failed: {cause}")
        self.iteration = iteration
        self.cause = cause


@dataclass(frozen=True)
class AlgorithmSpec:
    kind: Algorithm
    eta: Optional[float] = None

    def __post_init__(self):
        kind = Algorithm(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind.first_order:
            if self.eta is None:
                object.__setattr__(self, "eta", 0.5)
            elif not self.eta > 0:
                raise ValueError(f"eta must be positive, got {self.eta}")
        elif self.eta is not None:
            raise ValueError(f"{kind.value} is a higher-order update and takes no stepsize")

    @property
    def weight(self) -> WeightFunction:
        return weight_for(self.kind)


def state_of(theta: np.ndarray, truth: GroundTruth) -> StatePoint:
    ts = truth.theta_star
    a = float(theta @ ts)
    return StatePoint(a, float(np.linalg.norm(theta - a * ts)))


def least_squares(X: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Solve min ||X c - target|| through a reduced QR factorization of X."""
    n, d = X.shape
    if n < d:
        raise RankDeficientError(f"n={n} < d={d}: design cannot have full column rank",
                                 float("inf"))
    # Householder QR applied to the target directly; Q is never formed
    qt_target, R = qr_multiply(X, target, mode="right")
    diag = np.abs(np.diag(R))
    cond = float(diag.max() / diag.min()) if diag.min() > 0 else float("inf")
    if cond > MAX_CONDITION:
        raise RankDeficientError(f"design is numerically singular (condition ~ {cond:.3e})", cond)
    return solve_triangular(R, qt_target[:d])


def step_higher_order(theta: np.ndarray, batch: Batch, w: WeightFunction) -> np.ndarray:
    target = w(batch.X @ theta, batch.y)
    return least_squares(batch.X, target)


def step_first_order(theta: np.ndarray, batch: Batch, w: WeightFunction,
                     eta: float) -> np.ndarray:
    target = w(batch.X @ theta, batch.y)
    return theta - (2.0 * eta / batch.n) * (batch.X.T @ target)


def step(theta: np.ndarray, batch: Batch, alg: AlgorithmSpec) -> np.ndarray:
    if alg.kind.first_order:
        return step_first_order(theta, batch, alg.weight, alg.eta)
    return step_higher_order(theta, batch, alg.weight)


@dataclass(eq=False)
class TrajectoryRecord:
    thetas: np.ndarray  # (T + 1, d)
    states: list
    d_l2: np.ndarray
    d_angle: np.ndarray
    seed: int
    spec: ModelSpec
    alg: AlgorithmSpec
    trial: int = 0
    seconds: list = field(default_factory=list)  # wall time per step, not replayable

    @property
    def T(self) -> int:
        return len(self.states) - 1

    @property
    def alpha(self) -> np.ndarray:
        return np.array([s.alpha for s in self.states])

    @property
    def beta(self) -> np.ndarray:
        return np.array([s.beta for s in self.states])

    def __len__(self):
        return len(self.states)


def run_trajectory(spec: ModelSpec, alg: AlgorithmSpec, theta0: np.ndarray, T: int,
                   truth: GroundTruth, *, seed: Optional[int] = None,
                   trial: int = 0) -> TrajectoryRecord:
    """Run ``T`` steps, each on a fresh batch drawn from stream (seed, trial, t)."""
    if T < 1:
        raise ValueError(f"T must be at least 1, got {T}")
    seed = spec.seed if seed is None else seed
    theta = np.asarray(theta0, dtype=float).copy()
    thetas = [theta]
    seconds = [0.0]
    for t in range(T):
        rng = make_stream(seed, trial, t)
        start = time.perf_counter()
        try:
            theta = step(theta, sample_batch(spec, truth, rng), alg)
        except Exception as exc:
            raise IterationError(t + 1, exc) from exc
        seconds.append(time.perf_counter() - start)
        thetas.append(theta)
    states = [state_of(th, truth) for th in thetas]
    return TrajectoryRecord(np.array(thetas), states,
                            np.array([d_l2(s) for s in states]),
                            np.array([d_angle(s) for s in states]),
                            seed, spec, alg, trial, seconds)
