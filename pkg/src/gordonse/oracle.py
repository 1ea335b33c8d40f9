"""Monte-Carlo estimates of the Omega moments behind every Gordon update.

Omega = omega(a Z1 + b Z2, f(Z1; Q) + sigma Z3) for i.i.d. standard normal
Z1, Z2, Z3 and the model latent Q.  Nothing here reads the closed forms in
``state_evolution``; the two routes are meant to check each other.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .models import ModelKind, WeightFunction, link
from .state_evolution import ExpandedState, Moments, NegativeVarianceError, StatePoint

MIN_SAMPLES = 10 ** 4
CHUNK = 1 << 18


@dataclass(frozen=True)
class OmegaSpec:
    weight: WeightFunction
    model: ModelKind
    sigma: float
    state: StatePoint

    def __post_init__(self):
        object.__setattr__(self, "model", ModelKind(self.model))


@dataclass(frozen=True)
class OracleEstimate:
    e_omega2: float
    e_z1_omega: float
    e_z2_omega: float
    stderr: tuple
    samples: int
    cov: np.ndarray  # per-sample covariance of (Omega^2, Z1 Omega, Z2 Omega)
    max_abs_omega: float = math.nan

    @property
    def moments(self) -> Moments:
        return Moments(self.e_omega2, self.e_z1_omega, self.e_z2_omega)

    def delta_stderr(self, grad) -> float:
        """Standard error of a smooth function of the three means (delta method)."""
        g = np.asarray(grad, dtype=float)
        return float(math.sqrt(max(g @ self.cov @ g, 0.0) / self.samples))

    def gap(self) -> float:
        return self.e_omega2 - self.e_z1_omega ** 2 - self.e_z2_omega ** 2

    def gap_stderr(self) -> float:
        return self.delta_stderr([1.0, -2.0 * self.e_z1_omega, -2.0 * self.e_z2_omega])


def _omega(spec: OmegaSpec, z1, z2, z3, q):
    a, b = spec.state.alpha, spec.state.beta
    y = link(spec.model, z1, q) + spec.sigma * z3
    return spec.weight(a * z1 + b * z2, y)


def estimate_expectations(spec: OmegaSpec, samples: int,
                          rng: np.random.Generator) -> OracleEstimate:
    if samples < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} samples, got {samples}")
    total = np.zeros(3)
    outer = np.zeros((3, 3))
    peak = 0.0
    done = 0
    while done < samples:
        m = min(CHUNK, samples - done)
        z = rng.standard_normal((3, m))
        q = None
        if spec.model is ModelKind.MIXTURE:
            q = np.where(rng.random(m) < 0.5, -1.0, 1.0)
        w = _omega(spec, z[0], z[1], z[2], q)
        v = np.stack([w * w, z[0] * w, z[1] * w])
        total += v.sum(axis=1)
        outer += v @ v.T
        peak = max(peak, float(np.max(np.abs(w))))
        done += m
    mean = total / samples
    cov = (outer - samples * np.outer(mean, mean)) / (samples - 1)
    se = np.sqrt(np.maximum(np.diag(cov), 0.0) / samples)
    return OracleEstimate(float(mean[0]), float(mean[1]), float(mean[2]),
                          tuple(float(x) for x in se), samples, cov, peak)


@dataclass(frozen=True)
class AssumptionReport:
    variance_gap: float
    variance_gap_stderr: float
    max_abs_omega: float
    tail_scale: float
    samples: int

    @property
    def tail_ratio(self) -> float:
        """max |Omega| over sqrt(2 log N); stays O(1) for sub-Gaussian Omega."""
        return self.max_abs_omega / self.tail_scale


def verify_assumptions(spec: OmegaSpec, samples: int,
                       rng: np.random.Generator) -> AssumptionReport:
    if samples < 10 ** 5:
        raise ValueError(f"need at least 1e5 samples, got {samples}")
    est = estimate_expectations(spec, samples, rng)
    return AssumptionReport(est.gap(), est.gap_stderr(), est.max_abs_omega,
                            math.sqrt(2.0 * math.log(samples)), samples)


@dataclass(frozen=True)
class OracleGordon:
    state: ExpandedState
    stderr: tuple  # for (alpha, mu, nu)
    beta: float
    beta_stderr: float
    estimate: OracleEstimate = None


def gordon_from_oracle(spec: OmegaSpec, kappa: float, order: str, eta: float = 0.5,
                       samples: int = 10 ** 6, rng: np.random.Generator = None) -> OracleGordon:
    """Expanded Gordon update assembled from Monte-Carlo moments.

    ``order`` is ``"HO"`` or ``"FO"``.  Standard errors are first-order delta
    method estimates using the joint covariance of the three sample means.
    """
    order = order.upper()
    if order not in ("HO", "FO"):
        raise ValueError(f"order must be HO or FO, got {order!r}")
    a0, b0 = spec.state.alpha, spec.state.beta
    if order == "FO" and eta == 0:
        return OracleGordon(ExpandedState(a0, b0, 0.0), (0.0, 0.0, 0.0), b0, 0.0)
    if order == "HO" and not kappa > 1:
        raise ValueError(f"higher-order update needs kappa > 1, got {kappa}")
    if order == "FO" and not kappa > 0:
        raise ValueError(f"first-order update needs kappa > 0, got {kappa}")
    est = estimate_expectations(spec, samples, rng)
    m0, m1, m2 = est.moments

    if order == "HO":
        gap, gap_se = est.gap(), est.gap_stderr()
        if gap < -4.0 * gap_se:
            raise NegativeVarianceError(
                f"variance gap estimate {gap:.3e} is below zero by more than 4 stderr ({gap_se:.3e})")
        gap = max(gap, 0.0)
        nu = math.sqrt(gap / (kappa - 1.0))
        alpha, mu = m1, m2
        if nu > 0:
            nu_se = est.delta_stderr(np.array([1.0, -2.0 * m1, -2.0 * m2]) / (2.0 * (kappa - 1.0) * nu))
        else:
            nu_se = math.sqrt(gap_se / (kappa - 1.0))
        beta = math.hypot(mu, nu)
        beta_grad = np.array([1.0 / (kappa - 1.0), -2.0 * m1 / (kappa - 1.0),
                              2.0 * m2 * (1.0 - 1.0 / (kappa - 1.0))]) / (2.0 * beta)
        se = (est.stderr[1], est.stderr[2], nu_se)
    else:
        alpha = a0 - 2.0 * eta * m1
        mu = b0 - 2.0 * eta * m2
        root = math.sqrt(max(m0, 0.0))
        nu = 2.0 * eta / math.sqrt(kappa) * root
        nu_grad = np.array([eta / (math.sqrt(kappa) * root) if root > 0 else 0.0, 0.0, 0.0])
        beta = math.hypot(mu, nu)
        mu_grad = np.array([0.0, 0.0, -2.0 * eta])
        beta_grad = (mu * mu_grad + nu * nu_grad) / beta if beta > 0 else np.zeros(3)
        se = (2.0 * eta * est.stderr[1], 2.0 * eta * est.stderr[2], est.delta_stderr(nu_grad))
    return OracleGordon(ExpandedState(alpha, mu, nu), se, beta,
                        est.delta_stderr(beta_grad), est)
