"""Settings for each reproducible figure and the driver that renders them."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .experiments import (INIT_KEY, Experiment, build_truth, metric_values, predictions,
                          run_trials, write_csv)
from .iterates import AlgorithmSpec
from .models import (Algorithm, ModelKind, ModelSpec, directional_init, make_stream,
                     random_sphere_init)
from .plotting import plot_figure


@dataclass(frozen=True)
class FigureSpec:
    fig_id: str
    title: str
    algorithms: tuple
    sigma: float
    d: int
    n: int
    T: int
    trials: int
    alpha0: Optional[float] = None  # None: random sphere start of unit norm
    truth: str = "basis"
    eta: float = 0.5
    show_gordon: bool = True
    show_population: bool = False
    band: str = "minmax"  # minmax | ci

    @property
    def metric(self) -> str:
        return "angle" if Algorithm(self.algorithms[0]).model is ModelKind.MIXTURE else "l2"

    def scaled(self, scale: str) -> "FigureSpec":
        if scale == "native":
            return self
        if scale != "desk":
            raise ValueError(f"scale must be native or desk, got {scale!r}")
        return replace(self, d=self.d // 4, n=self.n // 4)


PR = (Algorithm.AM_PR, Algorithm.GD_PR)
MLR = (Algorithm.AM_MLR, Algorithm.SUBGRAD_MLR)

FIGURES = {f.fig_id: f for f in (
    FigureSpec("1", "phase retrieval, population prediction", PR, 1e-8, 600, 12000, 17, 100,
               alpha0=0.2, show_gordon=False, show_population=True, band="ci"),
    FigureSpec("2", "phase retrieval, Gordon prediction", PR, 1e-8, 600, 12000, 17, 100,
               alpha0=0.2, band="ci"),
    FigureSpec("3a", "mixture, sigma=0.05, kappa=20", MLR, 0.05, 500, 10000, 15, 50, alpha0=0.5),
    FigureSpec("3b", "mixture, sigma=0.25, kappa=100", MLR, 0.25, 500, 50000, 15, 20, alpha0=0.5),
    FigureSpec("4", "gradient descent, eta=0.95", (Algorithm.GD_PR,), 0.0, 250, 2500, 140, 10,
               alpha0=0.6, eta=0.95, show_population=True),
    FigureSpec("6", "phase retrieval, random start", PR, 1e-6, 800, 80000, 12, 12, truth="random"),
    FigureSpec("7a", "phase retrieval, sigma=1e-10, kappa=20", PR, 1e-10, 500, 10000, 12, 100,
               alpha0=0.8),
    FigureSpec("7b", "phase retrieval, sigma=1e-6, kappa=100", PR, 1e-6, 500, 50000, 12, 100,
               alpha0=0.8),
    FigureSpec("8", "mixture, random start", MLR, 1e-6, 800, 80000, 12, 12, truth="random"),
    FigureSpec("9a", "mixture, sigma=1e-6, kappa=20", MLR, 1e-6, 500, 10000, 12, 100, alpha0=0.8),
    FigureSpec("9b", "mixture, sigma=1e-2, kappa=6", MLR, 1e-2, 500, 3000, 12, 100, alpha0=0.8),
)}

FIGURE_HEADER = ["algorithm", "iter", "emp_mean", "emp_min", "emp_max", "emp_ci_lo",
                 "emp_ci_hi", "gordon", "population"]


class UnknownFigureError(KeyError):
    def __str__(self):
        return self.args[0]


def figure_spec(fig_id: str) -> FigureSpec:
    try:
        return FIGURES[str(fig_id)]
    except KeyError:
        raise UnknownFigureError(
            f"unknown figure id {fig_id!r}; valid ids: {', '.join(FIGURES)}") from None


def _start(fs: FigureSpec, truth, seed: int) -> np.ndarray:
    rng = make_stream(seed, INIT_KEY)
    if fs.alpha0 is None:
        return random_sphere_init(fs.d, 1.0, rng)
    return directional_init(truth, fs.alpha0, rng)


def figure_data(fs: FigureSpec, seed: int = 0, threads: int = 1) -> list:
    """Per-algorithm dict of iteration-wise summaries for one figure."""
    truth = build_truth(fs.truth, fs.d, seed)
    theta0 = _start(fs, truth, seed)
    panels = []
    for alg in fs.algorithms:
        alg = Algorithm(alg)
        spec = ModelSpec(alg.model, fs.sigma, fs.d, fs.n, seed)
        aspec = AlgorithmSpec(alg, fs.eta if alg.first_order else None)
        exp = Experiment(spec, aspec, truth, [theta0] * fs.trials, fs.T, seed)
        records = run_trials(exp, threads)
        gor, pop = predictions(exp, records[0].states[0])
        vals = np.array([metric_values(r.states, fs.metric) for r in records])
        mean = vals.mean(axis=0)
        se = (vals.std(axis=0, ddof=1) / math.sqrt(len(records)) if len(records) > 1
              else np.zeros_like(mean))
        panels.append({
            "name": alg.value, "iters": np.arange(fs.T + 1), "mean": mean,
            "min": vals.min(axis=0), "max": vals.max(axis=0),
            "ci_lo": mean - 2.0 * se, "ci_hi": mean + 2.0 * se,
            "gordon_all": metric_values(gor, fs.metric),
            "population_all": metric_values(pop, fs.metric),
            "values": vals,
        })
    return panels


def reproduce_figure(fig_id: str, scale: str, out: Path, seed: int = 0,
                     threads: int = 1, svg: bool = True) -> list:
    fs = figure_spec(fig_id).scaled(scale)
    panels = figure_data(fs, seed, threads)
    rows = []
    for p in panels:
        for t in p["iters"]:
            rows.append((p["name"], int(t), p["mean"][t], p["min"][t], p["max"][t],
                         p["ci_lo"][t], p["ci_hi"][t], p["gordon_all"][t],
                         p["population_all"][t]))
    write_csv(out / f"figure_{fs.fig_id}.csv", FIGURE_HEADER, rows)
    if svg:
        lo, hi = ("ci_lo", "ci_hi") if fs.band == "ci" else ("min", "max")
        view = [{"name": p["name"], "iters": p["iters"], "mean": p["mean"],
                 "lo": p[lo], "hi": p[hi],
                 "gordon": p["gordon_all"] if fs.show_gordon else None,
                 "population": p["population_all"] if fs.show_population else None}
                for p in panels]
        ylabel = "angular error" if fs.metric == "angle" else "l2 error"
        band = "mean +/- 2 stderr" if fs.band == "ci" else "min/max"
        plot_figure(out / f"figure_{fs.fig_id}.svg",
                    f"figure {fs.fig_id}: {fs.title} (d={fs.d}, n={fs.n})", ylabel, view, band)
    return panels
