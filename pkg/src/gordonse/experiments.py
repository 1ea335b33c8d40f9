"""Trial orchestration and result files behind the command-line interface."""
from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .analysis import (InsufficientTrajectoryError, MapFamily, angle_error,
                       deviation_report, fit_rate, identity_checks, l2_error,
                       map_inequality_checks, map_property_scan, scan_faithfulness)
from .config import RunConfig
from .iterates import AlgorithmSpec, TrajectoryRecord, run_trajectory, state_of
from .models import (Algorithm, GroundTruth, ModelKind, ModelSpec, directional_init,
                     make_stream, norm_matched_init, random_sphere_init, sample_batch,
                     weight_for)
from .oracle import OmegaSpec, estimate_expectations, gordon_from_oracle, verify_assumptions
from .state_evolution import (SEOperator, StatePoint, closed_form_moments,
                              expanded_from_moments, iterate_se)

# stream keys kept clear of the per-iteration keys (trial, t)
TRUTH_KEY = 10 ** 6 + 1
INIT_KEY = 10 ** 6
INIT_BATCH_KEY = 10 ** 6 + 2
ORACLE_KEY = 10 ** 6 + 3

NUMBER = "%.17e"


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, float) or isinstance(x, np.floating):
        return NUMBER % float(x)
    return str(x)


def write_csv(path: Path, header: Sequence[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def resolve_threads(threads: Optional[int]) -> int:
    if threads is None:
        env = os.environ.get("GORDONSE_THREADS")
        threads = int(env) if env else 1
    if threads < 1:
        raise ValueError(f"thread count must be positive, got {threads}")
    return threads


# ----------------------------------------------------------------------------
# trials


@dataclass
class Experiment:
    spec: ModelSpec
    alg: AlgorithmSpec
    truth: GroundTruth
    theta0s: list  # one starting point per trial
    T: int
    seed: int


def build_truth(kind: str, d: int, seed: int) -> GroundTruth:
    if kind == "random":
        return GroundTruth.random(d, make_stream(seed, TRUTH_KEY))
    return GroundTruth.basis(d)


def build_init(cfg: RunConfig, spec: ModelSpec, truth: GroundTruth, seed: int,
               trial: Optional[int]) -> np.ndarray:
    key = (INIT_KEY,) if trial is None else (trial, INIT_KEY)
    rng = make_stream(seed, *key)
    scheme = cfg.init.scheme
    if scheme == "truth":
        return truth.theta_star.copy()
    if scheme == "directional":
        return directional_init(truth, cfg.init.alpha0, rng)
    if scheme == "random_sphere":
        return random_sphere_init(spec.d, cfg.init.scale, rng)
    bkey = (INIT_BATCH_KEY,) if trial is None else (trial, INIT_BATCH_KEY)
    return norm_matched_init(sample_batch(spec, truth, make_stream(seed, *bkey)), rng)


def experiment_from_config(cfg: RunConfig, seed: Optional[int] = None) -> Experiment:
    seed = cfg.run.seed if seed is None else seed
    m = cfg.model
    spec = ModelSpec(m.kind, m.sigma, m.d, m.n, seed)
    alg_kind = Algorithm(cfg.algorithm.kind)
    alg = AlgorithmSpec(alg_kind, cfg.algorithm.eta if alg_kind.first_order else None)
    truth = build_truth(m.truth, m.d, seed)
    if cfg.init.shared:
        theta0 = build_init(cfg, spec, truth, seed, None)
        theta0s = [theta0] * cfg.run.trials
    else:
        theta0s = [build_init(cfg, spec, truth, seed, k) for k in range(cfg.run.trials)]
    return Experiment(spec, alg, truth, theta0s, cfg.run.T, seed)


def _one_trial(exp: Experiment, k: int) -> TrajectoryRecord:
    theta0 = np.asarray(exp.theta0s[k], dtype=float)
    if exp.T == 0:
        s = state_of(theta0, exp.truth)
        return TrajectoryRecord(theta0[None, :].copy(), [s],
                                np.array([float(l2_error(s.alpha, s.beta))]),
                                np.array([float(angle_error(s.alpha, s.beta))]),
                                exp.seed, exp.spec, exp.alg, k, [0.0])
    return run_trajectory(exp.spec, exp.alg, theta0, exp.T, exp.truth, seed=exp.seed, trial=k)


def run_trials(exp: Experiment, threads: int = 1) -> list:
    """All trials, ordered by trial index whatever the thread count."""
    idx = range(len(exp.theta0s))
    if threads == 1:
        return [_one_trial(exp, k) for k in idx]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda k: _one_trial(exp, k), idx))


def predictions(exp: Experiment, s0: StatePoint):
    sigma, kappa = exp.spec.sigma, exp.spec.kappa
    eta = exp.alg.eta if exp.alg.eta is not None else 0.5
    gor = iterate_se(SEOperator(exp.alg.kind, "gordon", sigma, kappa, eta), s0, exp.T)
    pop = iterate_se(SEOperator(exp.alg.kind, "population", sigma, eta=eta), s0, exp.T)
    return gor, pop


def metric_name(model: ModelKind, requested: str = "auto") -> str:
    if requested != "auto":
        return requested
    return "angle" if ModelKind(model) is ModelKind.MIXTURE else "l2"


def metric_values(states, metric: str) -> np.ndarray:
    a = np.array([s.alpha for s in states])
    b = np.array([s.beta for s in states])
    return angle_error(a, b) if metric == "angle" else l2_error(a, b)


def _fit_dict(errors) -> dict:
    try:
        f = fit_rate(errors)
    except InsufficientTrajectoryError as exc:
        return {"status": "insufficient", "message": str(exc)}
    return {"status": "ok", "exponent_lambda": f.exponent_lambda, "coefficient": f.coefficient,
            "floor": f.floor, "window": list(f.window), "r_squared": f.r_squared,
            "label": f.label}


def simulate(cfg: RunConfig, out: Path, seed: Optional[int] = None, threads: int = 1) -> dict:
    exp = experiment_from_config(cfg, seed)
    records = run_trials(exp, threads)
    s0 = records[0].states[0]
    gor, pop = predictions(exp, s0)

    write_csv(out / "trajectories.csv", ["trial", "iter", "alpha", "beta", "d_l2", "d_angle"],
              ((r.trial, t, s.alpha, s.beta, r.d_l2[t], r.d_angle[t])
               for r in records for t, s in enumerate(r.states)))
    use_g, use_p = cfg.predict.gordon, cfg.predict.population
    write_csv(out / "predictions.csv",
              ["iter", "alpha_gor", "beta_gor", "alpha_pop", "beta_pop", "d_l2_gor", "d_l2_pop"],
              ((t,
                g.alpha if use_g else None, g.beta if use_g else None,
                p.alpha if use_p else None, p.beta if use_p else None,
                float(l2_error(g.alpha, g.beta)) if use_g else None,
                float(l2_error(p.alpha, p.beta)) if use_p else None)
               for t, (g, p) in enumerate(zip(gor, pop))))

    metric = metric_name(exp.spec.kind, cfg.rate.metric)
    mean_err = np.mean([metric_values(r.states, metric) for r in records], axis=0)
    summary = {
        "algorithm": exp.alg.kind.value,
        "seed": exp.seed,
        "trials": len(records),
        "T": exp.T,
        "kappa": exp.spec.kappa,
        "eta_advisory": bool(exp.alg.kind.first_order and exp.alg.eta > 0.5),
        "rate_metric": metric,
        "rate_fits": {"empirical_mean": _fit_dict(mean_err)},
        "deviation": {},
    }
    if use_g:
        summary["deviation"]["gordon"] = deviation_report(records, gor).summary()
        summary["rate_fits"]["gordon"] = _fit_dict(metric_values(gor, metric))
    if use_p:
        summary["deviation"]["population"] = deviation_report(records, pop).summary()
        summary["rate_fits"]["population"] = _fit_dict(metric_values(pop, metric))
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


# ----------------------------------------------------------------------------
# oracle agreement


ORACLE_HEADER = ["algorithm", "state", "sigma", "quantity", "closed_form", "mc_estimate",
                 "stderr", "z_score"]
MOMENT_NAMES = ("e_omega2", "e_z1_omega", "e_z2_omega")
Z_LIMIT = 4.0


def oracle_states(cfg: RunConfig, seed: int):
    if cfg.oracle.explicit_states:
        out = []
        for entry in cfg.oracle.explicit_states:
            a, b = entry.split(":")
            out.append(StatePoint(float(a), float(b)))
        return out
    rng = make_stream(seed, ORACLE_KEY)
    alpha = rng.uniform(-1.2, 1.2, cfg.oracle.states)
    beta = rng.uniform(0.0, 1.2, cfg.oracle.states)
    return [StatePoint(float(a), float(b)) for a, b in zip(alpha, beta)]


def _z(closed, est, se):
    if se > 0:
        return (est - closed) / se
    return 0.0 if est == closed else math.copysign(math.inf, est - closed)


def _oracle_rows(alg: Algorithm, s: StatePoint, sigma: float, kappa: float, eta: float,
                 samples: int, rng, quantities: str):
    weight = weight_for(alg)
    spec = OmegaSpec(weight, alg.model, sigma, s.reflected())
    if quantities == "moments":
        est = estimate_expectations(spec, samples, rng)
        closed = closed_form_moments(alg, alg.model, s.reflected(), sigma)
        return [(n, c, e, se) for n, c, e, se in
                zip(MOMENT_NAMES, closed, est.moments, est.stderr)]
    order = "FO" if alg.first_order else "HO"
    mc = gordon_from_oracle(spec, kappa, order, eta, samples, rng)
    sr = s.reflected()
    closed_m = closed_form_moments(alg, alg.model, sr, sigma)
    closed_x = expanded_from_moments(closed_m, sr, kappa, alg.first_order, eta)
    rows = [(n, c, e, se) for n, c, e, se in
            zip(MOMENT_NAMES, closed_m, mc.estimate.moments, mc.estimate.stderr)]
    rows += [("alpha_gor", closed_x.alpha, mc.state.alpha, mc.stderr[0]),
             ("mu_gor", closed_x.mu, mc.state.mu, mc.stderr[1]),
             ("nu_gor", closed_x.nu, mc.state.nu, mc.stderr[2]),
             ("beta_gor", closed_x.beta, mc.beta, mc.beta_stderr)]
    return rows


def verify_oracle(cfg: RunConfig, out: Path, seed: Optional[int] = None,
                  threads: int = 1) -> tuple:
    """Returns (rows, failures); failures are rows still above the z limit after a retry."""
    seed = cfg.run.seed if seed is None else seed
    oc = cfg.oracle
    states = oracle_states(cfg, seed)
    jobs = [(Algorithm(a), si, s, sigma)
            for a in oc.algorithms for si, s in enumerate(states) for sigma in oc.sigmas]

    def run(job, attempt):
        alg, si, s, sigma = job
        rng = make_stream(seed, ORACLE_KEY, list(Algorithm).index(alg), si,
                          oc.sigmas.index(sigma), attempt)
        return _oracle_rows(alg, s, sigma, oc.kappa, oc.eta, oc.samples, rng, oc.quantities)

    def run_job(job):
        rows = run(job, 0)
        if any(abs(_z(c, e, se)) > Z_LIMIT for _, c, e, se in rows):
            rows = run(job, 1)
        return rows

    if threads == 1:
        results = [run_job(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_job, jobs))

    table, failures = [], []
    for (alg, _, s, sigma), rows in zip(jobs, results):
        for name, c, e, se in rows:
            z = _z(c, e, se)
            row = (alg.value, f"{s.alpha!r}:{s.beta!r}", float(sigma), name, float(c), float(e),
                   float(se), float(z))
            table.append(row)
            if abs(z) > Z_LIMIT:
                failures.append(row)
    write_csv(out / "oracle.csv", ORACLE_HEADER, table)
    return table, failures


# ----------------------------------------------------------------------------
# rate classification


RATE_HEADER = ["source", "algorithm", "metric", "exponent_lambda", "coefficient", "floor",
               "window_start", "window_end", "r_squared", "label", "status"]
RATE_ADVICE = ("too few iterations above the noise floor; use a smaller noise level "
               "or start farther from the truth")


def init_at_state(truth: GroundTruth, s: StatePoint, rng) -> np.ndarray:
    ts = truth.theta_star
    g = rng.standard_normal(truth.d)
    perp = g - (g @ ts) * ts
    perp /= np.linalg.norm(perp)
    return s.alpha * ts + s.beta * perp


def classify_rate(cfg: RunConfig, out: Path, seed: Optional[int] = None,
                  threads: int = 1) -> tuple:
    seed = cfg.run.seed if seed is None else seed
    alg = Algorithm(cfg.algorithm.kind)
    metric = metric_name(alg.model, cfg.rate.metric)
    s0 = StatePoint(cfg.rate.start_alpha, cfg.rate.start_beta)
    sigma, kappa, eta, T = cfg.model.sigma, cfg.kappa, cfg.algorithm.eta, cfg.rate.T
    series = {
        "gordon": metric_values(iterate_se(SEOperator(alg, "gordon", sigma, kappa, eta), s0, T),
                                metric),
        "population": metric_values(iterate_se(SEOperator(alg, "population", sigma, eta=eta),
                                               s0, T), metric),
    }
    spec = ModelSpec(cfg.model.kind, sigma, cfg.model.d, cfg.model.n, seed)
    truth = build_truth(cfg.model.truth, cfg.model.d, seed)
    theta0 = init_at_state(truth, s0, make_stream(seed, INIT_KEY))
    exp = Experiment(spec, AlgorithmSpec(alg, eta if alg.first_order else None), truth,
                     [theta0] * cfg.run.trials, T, seed)
    records = run_trials(exp, threads)
    series["empirical_mean"] = np.mean([metric_values(r.states, metric) for r in records], axis=0)

    rows, insufficient = [], []
    for source, errs in series.items():
        try:
            f = fit_rate(errs)
            rows.append((source, alg.value, metric, f.exponent_lambda, f.coefficient, f.floor,
                         f.window[0], f.window[1], f.r_squared, f.label or "", "ok"))
        except InsufficientTrajectoryError:
            insufficient.append(source)
            rows.append((source, alg.value, metric, None, None, None, None, None, None, "",
                         "insufficient"))
    write_csv(out / "rates.csv", RATE_HEADER, rows)
    return rows, insufficient


# ----------------------------------------------------------------------------
# property suite


@dataclass(frozen=True)
class SuiteRow:
    name: str
    passed: bool
    value: float  # worst margin, max diff or outside-count
    detail: str


def property_suite(maps: Optional[MapFamily] = None, assumption_samples: int = 10 ** 5,
                   seed: int = 0) -> list:
    rows = []
    for r in map_property_scan(map_inequality_checks(maps)):
        rows.append(SuiteRow(r.name, r.passed, r.worst_margin,
                             f"worst at alpha={r.worst_state[0]:.6g} beta={r.worst_state[1]:.6g}"))
    for r in identity_checks():
        rows.append(SuiteRow(r.name, r.passed, r.max_diff, f"tolerance {r.tolerance:.1e}"))
    for alg in Algorithm:
        ok, outside = scan_faithfulness(SEOperator(alg, "gordon", 0.01, 500.0))
        rows.append(SuiteRow(f"good_region_faithful_{alg.value}", ok, float(outside),
                             "grid states mapped outside the good region"))
    for k, alg in enumerate(Algorithm):
        spec = OmegaSpec(weight_for(alg), alg.model, 0.1, StatePoint(0.6, 0.8))
        rep = verify_assumptions(spec, assumption_samples, make_stream(seed, ORACLE_KEY, k))
        ok = rep.tail_ratio < 5.0
        if not alg.first_order:
            ok = ok and rep.variance_gap > 4.0 * rep.variance_gap_stderr
        rows.append(SuiteRow(f"weight_assumptions_{alg.value}", ok, rep.variance_gap,
                             f"tail ratio {rep.tail_ratio:.3f}"))
    return rows
