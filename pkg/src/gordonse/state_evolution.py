"""Deterministic state-evolution maps on the (alpha, beta) plane.

Every map here takes the state of the current iterate and returns the
predicted state of the next one.  ``kappa`` is the per-iteration
oversampling ratio n/d; passing ``math.inf`` removes the finite-sample
correction terms and yields the infinite-sample (population) map.

The closed forms are written with the angle phi = atan2(beta, |alpha|)
rather than the ratio rho = beta/alpha.  The two are algebraically
identical, and the angle form stays finite at alpha = 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .models import WEIGHTS, Algorithm, ModelKind, WeightFunction

TWO_OVER_PI = 2.0 / math.pi
ETA_ADVISORY = "eta_above_half"


@dataclass(frozen=True)
class StatePoint:
    alpha: float
    beta: float
    flags: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if not self.beta >= 0:
            raise ValueError(f"beta must be nonnegative, got {self.beta}")

    @property
    def phi(self) -> float:
        return math.atan2(self.beta, abs(self.alpha))

    @property
    def rho(self) -> float:
        if self.alpha == 0:
            return math.inf
        return self.beta / self.alpha

    def reflected(self) -> "StatePoint":
        return StatePoint(abs(self.alpha), self.beta, self.flags)


@dataclass(frozen=True)
class ExpandedState:
    """Parallel part, part along the old orthogonal direction, and the remainder norm."""

    alpha: float
    mu: float
    nu: float

    @property
    def beta(self) -> float:
        return math.hypot(self.mu, self.nu)

    def as_state(self) -> StatePoint:
        return StatePoint(self.alpha, self.beta)


class Moments(NamedTuple):
    """E[Omega^2], E[Z1 Omega], E[Z2 Omega]."""

    e_omega2: float
    e_z1_omega: float
    e_z2_omega: float


# ----------------------------------------------------------------------------
# closed-form pieces


def _sgn(alpha):
    return np.where(np.asarray(alpha) >= 0, 1.0, -1.0)


def pr_parts(alpha, beta):
    """(F, M) for phase retrieval: E[Z1 Omega] and E[Z2 Omega] of the AM weight."""
    phi = np.arctan2(beta, np.abs(alpha))
    par = 1.0 - (2.0 * phi - np.sin(2.0 * phi)) / math.pi
    perp = TWO_OVER_PI * np.sin(phi) ** 2
    return par, perp


def mlr_parts(alpha, beta, sigma):
    """(F_sigma, rho * B_sigma) for the mixture model.

    With s = sin(phi), c = cos(phi) and r = sqrt(s^2 + sigma^2) one has
    sqrt(rho^2 + sigma^2 + sigma^2 rho^2) = r / c, so that
    A = (2/pi) atan2(r, c), B = (2/pi) r c and rho B = (2/pi) r s.
    """
    phi = np.arctan2(beta, np.abs(alpha))
    s, c = np.sin(phi), np.cos(phi)
    r = np.sqrt(s * s + sigma * sigma)
    a_term = TWO_OVER_PI * np.arctan2(r, c)
    b_term = TWO_OVER_PI * r * c
    return 1.0 - a_term + b_term, TWO_OVER_PI * r * s


def mlr_shorthand(rho, sigma):
    """A_sigma(rho), B_sigma(rho) evaluated directly in the ratio rho."""
    root = np.sqrt(rho ** 2 + sigma ** 2 + sigma ** 2 * rho ** 2)
    return TWO_OVER_PI * np.arctan(root), TWO_OVER_PI * root / (1.0 + rho ** 2)


def _parts(model, alpha, beta, sigma):
    if ModelKind(model) is ModelKind.PHASE_RETRIEVAL:
        return pr_parts(alpha, beta)
    return mlr_parts(alpha, beta, sigma)


def _check_kappa(kappa, higher_order):
    if higher_order and not kappa > 1:
        raise ValueError(f"higher-order maps need kappa > 1, got {kappa}")
    if not higher_order and not kappa > 0:
        raise ValueError(f"first-order maps need kappa > 0, got {kappa}")


def _check_eta(eta):
    if not eta >= 0:
        raise ValueError(f"eta must be nonnegative, got {eta}")


# ----------------------------------------------------------------------------
# vectorised 2-D maps


def gordon_map(algorithm, alpha, beta, sigma, kappa, eta=0.5):
    """Gordon update of an array of states. Returns (alpha_next, beta_next)."""
    algorithm = Algorithm(algorithm)
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    _check_kappa(kappa, not algorithm.first_order)
    par, perp = _parts(algorithm.model, alpha, beta, sigma)
    sg = _sgn(alpha)
    if not algorithm.first_order:
        if algorithm.model is ModelKind.PHASE_RETRIEVAL:
            rad = perp ** 2 + (1.0 - par ** 2 - perp ** 2 + sigma ** 2) / (kappa - 1.0)
        else:
            rad = perp ** 2 + (1.0 + sigma ** 2 - par ** 2 - perp ** 2) / (kappa - 1.0)
        return sg * par, np.sqrt(np.maximum(rad, 0.0))
    _check_eta(eta)
    a = np.abs(alpha)
    energy = a ** 2 + beta ** 2 - 2.0 * a * par - 2.0 * beta * perp + 1.0 + sigma ** 2
    rad = ((1.0 - 2.0 * eta) * beta + 2.0 * eta * perp) ** 2 \
        + 4.0 * eta ** 2 / kappa * energy
    alpha_next = (1.0 - 2.0 * eta) * alpha + 2.0 * eta * sg * par
    return alpha_next, np.sqrt(np.maximum(rad, 0.0))


def population_map(algorithm, alpha, beta, sigma, eta=0.5):
    """Infinite-sample update of an array of states."""
    algorithm = Algorithm(algorithm)
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    par, perp = _parts(algorithm.model, alpha, beta, sigma)
    sg = _sgn(alpha)
    if not algorithm.first_order:
        return sg * par, perp
    _check_eta(eta)
    return ((1.0 - 2.0 * eta) * alpha + 2.0 * eta * sg * par,
            np.abs((1.0 - 2.0 * eta) * beta + 2.0 * eta * perp))


# ----------------------------------------------------------------------------
# StatePoint wrappers


def _wrap(pair, eta=None) -> StatePoint:
    flags = (ETA_ADVISORY,) if eta is not None and eta > 0.5 else ()
    return StatePoint(float(pair[0]), float(pair[1]), flags)


def gordon_am_pr(s: StatePoint, sigma: float, kappa: float) -> StatePoint:
    return _wrap(gordon_map(Algorithm.AM_PR, s.alpha, s.beta, sigma, kappa))


def gordon_gd_pr(s: StatePoint, sigma: float, kappa: float, eta: float = 0.5) -> StatePoint:
    return _wrap(gordon_map(Algorithm.GD_PR, s.alpha, s.beta, sigma, kappa, eta), eta)


def gordon_am_mlr(s: StatePoint, sigma: float, kappa: float) -> StatePoint:
    return _wrap(gordon_map(Algorithm.AM_MLR, s.alpha, s.beta, sigma, kappa))


def gordon_subgrad_mlr(s: StatePoint, sigma: float, kappa: float,
                       eta: float = 0.5) -> StatePoint:
    return _wrap(gordon_map(Algorithm.SUBGRAD_MLR, s.alpha, s.beta, sigma, kappa, eta), eta)


def gordon(algorithm, s: StatePoint, sigma: float, kappa: float, eta: float = 0.5) -> StatePoint:
    algorithm = Algorithm(algorithm)
    eta_used = eta if algorithm.first_order else None
    return _wrap(gordon_map(algorithm, s.alpha, s.beta, sigma, kappa, eta), eta_used)


def population(algorithm, s: StatePoint, sigma: float, eta: float = 0.5) -> StatePoint:
    algorithm = Algorithm(algorithm)
    eta_used = eta if algorithm.first_order else None
    return _wrap(population_map(algorithm, s.alpha, s.beta, sigma, eta), eta_used)


# ----------------------------------------------------------------------------
# expanded three-dimensional updates


def _known_algorithm(weight) -> Optional[Algorithm]:
    if isinstance(weight, (Algorithm, str)):
        return Algorithm(weight)
    for alg, w in WEIGHTS.items():
        if w is weight:
            return alg
    return None


def closed_form_moments(weight, model, s: StatePoint, sigma: float) -> Optional[Moments]:
    """Exact Omega moments when the (weight, model) pair has a closed form, else None."""
    alg = _known_algorithm(weight)
    if alg is None or alg.model is not ModelKind(model):
        return None
    a = abs(s.alpha)
    par, perp = _parts(alg.model, a, s.beta, sigma)
    par, perp = float(par), float(perp)
    e2 = 1.0 + sigma ** 2
    if not alg.first_order:
        return Moments(e2, par, perp)
    # first-order weight is x - omega_HO with x = alpha Z1 + beta Z2
    return Moments(a * a + s.beta ** 2 - 2.0 * a * par - 2.0 * s.beta * perp + e2,
                   a - par, s.beta - perp)


class NegativeVarianceError(ValueError):
    pass


def expanded_from_moments(m: Moments, s_sharp: StatePoint, kappa: float,
                          first_order: bool, eta: float = 0.5,
                          stderr: Optional[float] = None) -> ExpandedState:
    """Assemble (alpha, mu, nu) from Omega moments at a reflected state."""
    if not first_order:
        _check_kappa(kappa, True)
        gap = m.e_omega2 - m.e_z1_omega ** 2 - m.e_z2_omega ** 2
        if gap < 0:
            if stderr is None or gap < -4.0 * stderr:
                raise NegativeVarianceError(
                    f"E[Omega^2] - E[Z1 Omega]^2 - E[Z2 Omega]^2 = {gap:.3e}"
                    + ("" if stderr is None else f" (stderr {stderr:.3e})"))
            gap = 0.0
        return ExpandedState(m.e_z1_omega, m.e_z2_omega, math.sqrt(gap / (kappa - 1.0)))
    _check_kappa(kappa, False)
    _check_eta(eta)
    return ExpandedState(s_sharp.alpha - 2.0 * eta * m.e_z1_omega,
                         s_sharp.beta - 2.0 * eta * m.e_z2_omega,
                         2.0 * eta / math.sqrt(kappa) * math.sqrt(max(m.e_omega2, 0.0)))


def _moments_or_oracle(weight, model, s, sigma, samples, rng):
    m = closed_form_moments(weight, model, s, sigma)
    if m is not None:
        return m, None
    if rng is None:
        raise ValueError("no closed form for this weight; pass rng (and samples) for the oracle")
    from .oracle import OmegaSpec, estimate_expectations

    if not isinstance(weight, WeightFunction):
        weight = WEIGHTS[Algorithm(weight)]
    est = estimate_expectations(OmegaSpec(weight, model, sigma, s), samples, rng)
    return Moments(est.e_omega2, est.e_z1_omega, est.e_z2_omega), est


def gordon_expanded_ho(s_sharp: StatePoint, weight, model, sigma: float, kappa: float,
                       samples: int = 10 ** 6, rng=None) -> ExpandedState:
    s = s_sharp.reflected()
    m, est = _moments_or_oracle(weight, model, s, sigma, samples, rng)
    err = None if est is None else est.gap_stderr()
    return expanded_from_moments(m, s, kappa, False, stderr=err)


def gordon_expanded_fo(s_sharp: StatePoint, weight, model, sigma: float, kappa: float,
                       eta: float = 0.5, samples: int = 10 ** 6, rng=None) -> ExpandedState:
    s = s_sharp.reflected()
    if eta == 0:
        return ExpandedState(s.alpha, s.beta, 0.0)
    m, _ = _moments_or_oracle(weight, model, s, sigma, samples, rng)
    return expanded_from_moments(m, s, kappa, True, eta)


# ----------------------------------------------------------------------------
# operators and iteration


@dataclass(frozen=True)
class SEOperator:
    algorithm: Algorithm
    kind: str = "gordon"
    sigma: float = 0.0
    kappa: float = math.inf
    eta: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "algorithm", Algorithm(self.algorithm))
        if self.kind not in ("gordon", "population"):
            raise ValueError(f"operator kind must be gordon or population, got {self.kind!r}")
        if self.kind == "gordon":
            _check_kappa(self.kappa, not self.algorithm.first_order)

    @property
    def advisory(self) -> bool:
        return self.algorithm.first_order and self.eta > 0.5

    def __call__(self, s: StatePoint) -> StatePoint:
        if self.kind == "population":
            return population(self.algorithm, s, self.sigma, self.eta)
        return gordon(self.algorithm, s, self.sigma, self.kappa, self.eta)

    def arrays(self, alpha, beta):
        if self.kind == "population":
            return population_map(self.algorithm, alpha, beta, self.sigma, self.eta)
        return gordon_map(self.algorithm, alpha, beta, self.sigma, self.kappa, self.eta)


def iterate_se(op, s0: StatePoint, T: int) -> list:
    if T < 0:
        raise ValueError(f"T must be nonnegative, got {T}")
    out = [s0]
    for _ in range(T):
        out.append(op(out[-1]))
    return out

