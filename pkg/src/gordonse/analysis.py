"""Error metrics, the good region, convergence-rate fits, deviation statistics
and grid scans of map inequalities."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .models import Algorithm
from .state_evolution import StatePoint, gordon_map, mlr_parts, pr_parts

GOOD_ALPHA_MIN = 0.55
GOOD_ALPHA_MAX = 1.05
GOOD_RATIO_MIN = 5.0


def l2_error(alpha, beta):
    return np.sqrt((1.0 - np.abs(alpha)) ** 2 + np.asarray(beta) ** 2)


def angle_error(alpha, beta):
    return np.arctan2(beta, np.abs(alpha))


def d_l2(s: StatePoint) -> float:
    """Distance to the nearer of +theta* and -theta*."""
    return math.hypot(1.0 - abs(s.alpha), s.beta)


def d_angle(s: StatePoint) -> float:
    return math.atan2(s.beta, abs(s.alpha))


def in_good_region(s: StatePoint) -> bool:
    if not GOOD_ALPHA_MIN <= s.alpha <= GOOD_ALPHA_MAX:
        return False
    return s.beta == 0 or s.alpha / s.beta >= GOOD_RATIO_MIN


def in_good_region_arrays(alpha, beta):
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    with np.errstate(divide="ignore"):
        ratio = np.where(beta == 0, np.inf, alpha / np.where(beta == 0, 1.0, beta))
    return (alpha >= GOOD_ALPHA_MIN) & (alpha <= GOOD_ALPHA_MAX) & (ratio >= GOOD_RATIO_MIN)


def good_region_grid(points: int = 100):
    """points x points states covering the good region, boundaries included."""
    a = np.linspace(GOOD_ALPHA_MIN, GOOD_ALPHA_MAX, points)
    frac = np.linspace(0.0, 1.0, points)
    A, Fr = np.meshgrid(a, frac, indexing="ij")
    return A.ravel(), (Fr * A / GOOD_RATIO_MIN).ravel()


# ----------------------------------------------------------------------------
# convergence rates


class InsufficientTrajectoryError(ValueError):
    pass


@dataclass(frozen=True)
class RateFit:
    exponent_lambda: float
    coefficient: float
    floor: float
    window: tuple  # (first, last) iteration index used, inclusive
    r_squared: float
    label: Optional[str] = None


FLOOR_REL_CHANGE = 0.05
MIN_R_SQUARED = 0.98


def detect_floor(errors: Sequence[float]) -> float:
    """Median of the last three errors if they agree within 5%, else 0."""
    tail = np.asarray(errors[-3:], dtype=float)
    if len(tail) < 3:
        return 0.0
    med = float(np.median(tail))
    if med > 0 and (tail.max() - tail.min()) / med < FLOOR_REL_CHANGE:
        return med
    return 0.0


def _label(lam: float) -> str:
    if lam > 1.1:
        return "superlinear"
    if lam < 0.9:
        return "sublinear"
    return "linear"


def fit_rate(errors: Sequence[float], floor_guard: float = 2.0) -> RateFit:
    """Fit log d[t+1] = lambda * log d[t] + log c over the stretch before the floor."""
    e = np.asarray(errors, dtype=float)
    floor = detect_floor(e)
    keep = (e > floor_guard * floor) & (e > 0) & np.isfinite(e)
    stop = int(np.argmin(keep)) if not keep.all() else len(e)
    if stop < 4:
        raise InsufficientTrajectoryError(
            f"insufficient pre-floor trajectory: {stop} usable iterations above "
            f"{floor_guard:g} x floor {floor:.3e}; use a smaller sigma or a larger starting error")
    x = np.log(e[: stop - 1])
    y = np.log(e[1:stop])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    label = _label(slope) if r2 >= MIN_R_SQUARED else None
    return RateFit(float(slope), float(math.exp(intercept)), floor, (0, stop - 1), r2, label)


# ----------------------------------------------------------------------------
# empirical vs predicted trajectories


QUANTITIES = ("alpha", "beta", "d_l2", "d_angle")


def _series(states):
    a = np.array([s.alpha for s in states])
    b = np.array([s.beta for s in states])
    return {"alpha": a, "beta": b, "d_l2": l2_error(a, b), "d_angle": angle_error(a, b)}


@dataclass
class DeviationReport:
    per_iteration: dict   # quantity -> (trials, T + 1) absolute deviations
    per_trial_max: dict   # quantity -> (trials,)
    envelope: dict        # quantity -> (min over trials, max over trials), each (T + 1,)
    mean: dict            # quantity -> (T + 1,) empirical mean
    stderr: dict          # quantity -> (T + 1,)
    trials: int

    def mean_max(self, quantity: str) -> float:
        return float(np.mean(self.per_trial_max[quantity]))

    def worst(self, quantity: str) -> float:
        return float(np.max(self.per_trial_max[quantity]))

    def summary(self) -> dict:
        return {q: {"mean_max": self.mean_max(q), "max": self.worst(q)} for q in QUANTITIES}


def deviation_report(trials, prediction: Sequence[StatePoint]) -> DeviationReport:
    if not trials:
        raise ValueError("no trials given")
    pred = _series(prediction)
    rows = {q: [] for q in QUANTITIES}
    for k, rec in enumerate(trials):
        states = rec.states if hasattr(rec, "states") else rec
        if len(states) != len(prediction):
            raise ValueError(f"trial {k} has {len(states)} states, prediction has {len(prediction)}")
        emp = _series(states)
        for q in QUANTITIES:
            rows[q].append(emp[q])
    values = {q: np.array(rows[q]) for q in QUANTITIES}
    dev = {q: np.abs(values[q] - pred[q]) for q in QUANTITIES}
    m = len(trials)
    return DeviationReport(
        per_iteration=dev,
        per_trial_max={q: dev[q].max(axis=1) for q in QUANTITIES},
        envelope={q: (values[q].min(axis=0), values[q].max(axis=0)) for q in QUANTITIES},
        mean={q: values[q].mean(axis=0) for q in QUANTITIES},
        stderr={q: (values[q].std(axis=0, ddof=1) / math.sqrt(m) if m > 1
                    else np.zeros(values[q].shape[1])) for q in QUANTITIES},
        trials=m,
    )


# ----------------------------------------------------------------------------
# inequality scans


@dataclass(frozen=True)
class InequalityCheck:
    """``margin(alpha, beta)`` is nonnegative wherever the inequality holds."""

    name: str
    margin: Callable
    sampler: Optional[Callable] = None
    slack: float = 0.0


@dataclass(frozen=True)
class ScanResult:
    name: str
    passed: bool
    worst_margin: float
    worst_state: tuple
    points: int

    @property
    def violation(self) -> float:
        return max(0.0, -self.worst_margin)


def map_property_scan(checks: Sequence[InequalityCheck], sampler: Optional[Callable] = None):
    if not checks:
        raise ValueError("empty check set")
    out = []
    for chk in checks:
        draw = chk.sampler or sampler
        if draw is None:
            raise ValueError(f"check {chk.name!r} has no region sampler")
        alpha, beta = draw()
        margin = np.broadcast_to(np.asarray(chk.margin(alpha, beta), dtype=float),
                                 np.shape(alpha))
        bad = np.isnan(margin)
        margin = np.where(bad, -np.inf, margin)
        i = int(np.argmin(margin))
        worst = float(margin.flat[i])
        out.append(ScanResult(chk.name, worst >= -chk.slack, worst,
                              (float(np.ravel(alpha)[i]), float(np.ravel(beta)[i])),
                              int(np.size(margin))))
    return out


class MapFamily:
    """The parallel and perpendicular maps the inequality checks are phrased in.

    ``pr_*`` are the phase-retrieval maps (parallel part independent of noise),
    the unprefixed ones are the mixture maps.  ``perp_ho`` is the
    alternating-minimization perpendicular map and ``perp_fo`` the
    half-stepsize subgradient one.  Subclass to inject a test double.
    """

    def par(self, alpha, beta, sigma):
        return mlr_parts(alpha, beta, sigma)[0]

    def perp_term(self, alpha, beta, sigma):
        return mlr_parts(alpha, beta, sigma)[1]

    def perp_ho(self, alpha, beta, sigma, kappa):
        return gordon_map(Algorithm.AM_MLR, alpha, beta, sigma, kappa)[1]

    def perp_fo(self, alpha, beta, sigma, kappa):
        return gordon_map(Algorithm.SUBGRAD_MLR, alpha, beta, sigma, kappa, 0.5)[1]

    def pr_par(self, alpha, beta):
        return pr_parts(alpha, beta)[0]

    def pr_perp_ho(self, alpha, beta, sigma, kappa):
        return gordon_map(Algorithm.AM_PR, alpha, beta, sigma, kappa)[1]

    def pr_perp_fo(self, alpha, beta, sigma, kappa):
        return gordon_map(Algorithm.GD_PR, alpha, beta, sigma, kappa, 0.5)[1]


FD_STEP = 1e-5
FD_SLACK = 1e-3


def grad_l1(fn, alpha, beta, h: float = FD_STEP):
    """l1 norm of the central-difference gradient of fn(alpha, beta)."""
    da = (fn(alpha + h, beta) - fn(alpha - h, beta)) / (2 * h)
    db = (fn(alpha, beta + h) - fn(alpha, beta - h)) / (2 * h)
    return np.abs(da) + np.abs(db)


def _grid(a_lo, a_hi, b_lo, b_hi, points=60):
    A, B = np.meshgrid(np.linspace(a_lo, a_hi, points), np.linspace(b_lo, b_hi, points),
                       indexing="ij")
    return A.ravel(), B.ravel()


def _ratio_grid(a_lo, a_hi, r_lo, r_hi, points=60, b_max=None):
    A, R = np.meshgrid(np.linspace(a_lo, a_hi, points), np.linspace(r_lo, r_hi, points),
                       indexing="ij")
    A, B = A.ravel(), (A * R).ravel()
    if b_max is not None:
        keep = B <= b_max
        A, B = A[keep], B[keep]
    return A, B


def _all_states():
    a, b = _grid(0.0, 2.0, 0.0, 2.0, 40)
    return np.concatenate([a, [0.0, 0.0, 1.0]]), np.concatenate([b, [1.0, 0.3, 0.0]])


def _over_sigmas(sigmas, fn):
    def margin(alpha, beta):
        return np.min([fn(alpha, beta, s) for s in sigmas], axis=0)
    return margin


NOISE_LEVELS = (0.0, 0.05, 0.1, 0.25, 0.5)
LARGE_KAPPA = 1e3


def map_inequality_checks(maps: Optional[MapFamily] = None, kappa: float = LARGE_KAPPA):
    """Grid checks of the parallel/perpendicular map bounds and gradient bounds."""
    m = maps or MapFamily()
    pi = math.pi
    checks = []

    def phi(alpha, beta):
        return np.arctan2(beta, np.abs(alpha))

    def cubic_sandwich(alpha, beta):
        f0 = m.pr_par(alpha, beta)
        lower = np.maximum(1.0 - 4.0 * phi(alpha, beta) ** 3 / (3 * pi), 0.0)
        return np.minimum(f0 - lower, 1.0 - f0)

    checks.append(InequalityCheck("parallel_map_cubic_sandwich", cubic_sandwich, _all_states))
    checks.append(InequalityCheck(
        "parallel_map_cubic_gap_small_ratio",
        lambda a, b: 1.0 - m.pr_par(a, b) - 0.4 * phi(a, b) ** 3,
        lambda: _ratio_grid(0.05, 2.0, 0.0, 0.2)))
    checks.append(InequalityCheck(
        "parallel_map_boost_large_ratio",
        lambda a, b: m.pr_par(a, b) - 1.06 * a,
        lambda: _ratio_grid(1e-3, 0.5, 2.0, 1e3, b_max=1.0)))

    sig_fine = np.linspace(0.0, 2.0, 41)

    def monotone_in_noise(alpha, beta):
        vals = np.array([m.par(alpha, beta, s) for s in sig_fine])
        return np.min(np.diff(vals, axis=0), axis=0)

    checks.append(InequalityCheck("parallel_map_monotone_in_noise", monotone_in_noise,
                                  _all_states, slack=1e-14))
    checks.append(InequalityCheck(
        "parallel_map_noise_ceiling",
        _over_sigmas(sig_fine, lambda a, b, s: 1.0 + 2.0 * s ** 3 / (3 * pi) - m.par(a, b, s)),
        _all_states, slack=1e-14))

    def perp_bounds(a, b, s):
        g = m.perp_ho(a, b, s, kappa)
        lower = np.sqrt(np.maximum(1.0 - m.par(a, b, s) ** 2, 0.0) / (kappa - 1.0))
        return np.minimum(g - lower, 0.8 - g)

    checks.append(InequalityCheck("perp_map_bounds", _over_sigmas(NOISE_LEVELS, perp_bounds),
                                  _all_states, slack=1e-14))
    checks.append(InequalityCheck(
        "perp_map_cubic_in_good_region",
        lambda a, b: phi(a, b) ** 3 / 10.0 - m.perp_ho(a, b, 0.0, kappa) ** 2,
        lambda: good_region_grid(60)))

    def fo_sandwich(a, b, s, kap):
        G2 = m.perp_ho(a, b, s, kap) ** 2
        g2 = m.perp_fo(a, b, s, kap) ** 2
        rb = m.perp_term(a, b, s)
        f = m.par(a, b, s)
        upper = G2 + 2.0 / kap * ((1 - a) ** 2 + b ** 2 + rb ** 2 + (1 - f) ** 2)
        return np.minimum(g2 - (kap - 1.0) / kap * G2, upper - g2)

    sandwich_sigmas = (0.0, 0.1, 0.5, 1.0, 2.0)
    checks.append(InequalityCheck(
        "fo_perp_map_sandwich",
        lambda a, b: np.min([fo_sandwich(a, b, s, k) for s in sandwich_sigmas
                             for k in (2.0, 10.0, 100.0, kappa)], axis=0),
        _all_states, slack=1e-12))

    def ratio_bounds(a, b, s):
        f = m.par(a, b, s)
        g = m.perp_ho(a, b, s, kappa)
        rho = b / a
        rb = m.perp_term(a, b, s)
        lower = np.sqrt(rb ** 2 * (kappa - 2) / (kappa - 1) + s ** 2 / (2 * (kappa - 1))) \
            / (1.0 + 2.0 * s ** 3 / (3 * pi))
        upper = 0.8 * rho + 2.0 * s / math.sqrt(kappa - 1)
        return np.minimum(g / f - lower, upper - g / f)

    checks.append(InequalityCheck("perp_to_parallel_ratio",
                                  _over_sigmas(NOISE_LEVELS, ratio_bounds),
                                  lambda: _ratio_grid(0.05, 2.0, 0.0, 2.0), slack=1e-14))

    local = (lambda: _ratio_grid(0.5, 3.0, 0.0, 0.25, 60))
    grad_sigmas = (0.0, 0.1, 0.25, 0.5)
    checks.append(InequalityCheck(
        "parallel_map_gradient",
        _over_sigmas(grad_sigmas, lambda a, b, s: 0.5 - grad_l1(
            lambda x, y: m.par(x, y, s), a, b)),
        lambda: _shift_beta(local()), slack=FD_SLACK))
    checks.append(InequalityCheck(
        "perp_map_gradient",
        _over_sigmas(grad_sigmas, lambda a, b, s: 0.98 - grad_l1(
            lambda x, y: m.perp_ho(x, y, s, kappa), a, b)),
        lambda: _shift_beta(local()), slack=FD_SLACK))

    def noise_shrinks(a, b, s):
        return np.minimum(
            grad_l1(lambda x, y: m.pr_perp_ho(x, y, 0.0, kappa), a, b)
            - grad_l1(lambda x, y: m.pr_perp_ho(x, y, s, kappa), a, b),
            grad_l1(lambda x, y: m.pr_perp_fo(x, y, 0.0, kappa), a, b)
            - grad_l1(lambda x, y: m.pr_perp_fo(x, y, s, kappa), a, b))

    checks.append(InequalityCheck(
        "noise_shrinks_perp_gradient", _over_sigmas(grad_sigmas[1:], noise_shrinks),
        lambda: _grid(0.05, 2.0, 1e-3, 2.0, 50), slack=FD_SLACK))

    def fo_gradient(a, b, s):
        gf = grad_l1(lambda x, y: m.par(x, y, s), a, b)
        gG = grad_l1(lambda x, y: m.perp_ho(x, y, s, kappa), a, b)
        gg = grad_l1(lambda x, y: m.perp_fo(x, y, s, kappa), a, b)
        return gG + (3.0 + gf) / math.sqrt(kappa) - gg

    checks.append(InequalityCheck(
        "fo_perp_gradient", _over_sigmas(grad_sigmas, fo_gradient),
        lambda: _shift_beta(_ratio_grid(0.05, 3.0, 0.0, 0.25, 60)), slack=FD_SLACK))
    return checks


def _shift_beta(ab, lo=1e-3):
    # keep central differences away from beta = 0, where maps are not differentiable
    a, b = ab
    return a, np.maximum(b, lo)


def scan_faithfulness(op, points: int = 100):
    """Does ``op`` map every grid state of the good region back into it?"""
    alpha, beta = good_region_grid(points)
    a1, b1 = op.arrays(alpha, beta)
    inside = in_good_region_arrays(a1, b1)
    return bool(inside.all()), int((~inside).sum())


# ----------------------------------------------------------------------------
# algebraic identities between maps


@dataclass(frozen=True)
class IdentityResult:
    name: str
    max_diff: float
    tolerance: float
    points: int

    @property
    def passed(self) -> bool:
        return bool(self.max_diff <= self.tolerance)


IDENTITY_TOL = 1e-12


def identity_grid():
    """1000 states, negative alpha included so sign restoration is exercised."""
    A, B = np.meshgrid(np.linspace(-1.5, 1.5, 40), np.linspace(0.0, 1.5, 25), indexing="ij")
    return A.ravel(), B.ravel()


def identity_checks(sigmas=(0.0, 0.1, 0.5), kappa: float = 20.0, tol: float = IDENTITY_TOL):
    from .models import ModelKind
    from .state_evolution import (closed_form_moments, expanded_from_moments,
                                  population_map)

    alpha, beta = identity_grid()
    npts = alpha.size
    out = []

    def record(name, diffs, tolerance=tol):
        out.append(IdentityResult(name, float(max(np.max(np.abs(d)) for d in diffs)),
                                  tolerance, npts * len(sigmas)))

    for model, ho, fo in ((ModelKind.PHASE_RETRIEVAL, Algorithm.AM_PR, Algorithm.GD_PR),
                          (ModelKind.MIXTURE, Algorithm.AM_MLR, Algorithm.SUBGRAD_MLR)):
        diffs = []
        for s in sigmas:
            diffs += [x - y for x, y in zip(population_map(fo, alpha, beta, s, 0.5),
                                            population_map(ho, alpha, beta, s))]
        record(f"population_half_step_coincidence_{model.value}", diffs)

    for pr, mlr in ((Algorithm.AM_PR, Algorithm.AM_MLR), (Algorithm.GD_PR, Algorithm.SUBGRAD_MLR)):
        g = [x - y for x, y in zip(gordon_map(pr, alpha, beta, 0.0, kappa),
                                   gordon_map(mlr, alpha, beta, 0.0, kappa))]
        p = [x - y for x, y in zip(population_map(pr, alpha, beta, 0.0),
                                   population_map(mlr, alpha, beta, 0.0))]
        record(f"noiseless_pr_equals_mixture_{pr.value}", g + p)

    diffs = []
    for s in sigmas:
        f_pr, g_pr = gordon_map(Algorithm.AM_PR, alpha, beta, s, kappa)
        f_0, g_0 = gordon_map(Algorithm.AM_MLR, alpha, beta, 0.0, kappa)
        diffs += [f_pr - f_0, g_pr ** 2 - (g_0 ** 2 + s ** 2 / (kappa - 1.0))]
    record("pr_noise_shifts_ho_perp_square", diffs)

    diffs = []
    for s in sigmas:
        f_pr, g_pr = gordon_map(Algorithm.GD_PR, alpha, beta, s, kappa, 0.5)
        f_0, g_0 = gordon_map(Algorithm.SUBGRAD_MLR, alpha, beta, 0.0, kappa, 0.5)
        diffs += [f_pr - f_0, g_pr ** 2 - (g_0 ** 2 + s ** 2 / kappa)]
    record("pr_noise_shifts_fo_perp_square", diffs)

    for alg in Algorithm:
        diffs = []
        for s in sigmas:
            _, b_map = gordon_map(alg, alpha, beta, s, kappa, 0.5)
            b_exp = np.empty(npts)
            for i in range(npts):
                st = StatePoint(float(alpha[i]), float(beta[i])).reflected()
                m = closed_form_moments(alg, alg.model, st, s)
                b_exp[i] = expanded_from_moments(m, st, kappa, alg.first_order, 0.5).beta
            diffs.append(b_map - b_exp)
        record(f"expanded_beta_reconstruction_{alg.value}", diffs)
    return out
