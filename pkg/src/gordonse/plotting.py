"""Static log-scale SVG views of figure data.  Plotting never feeds back into the CSVs."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# keep SVG output stable across runs
matplotlib.rcParams["svg.hashsalt"] = "gordonse"
matplotlib.rcParams["svg.fonttype"] = "none"

_TINY = 1e-300


def _positive(x):
    return np.maximum(np.asarray(x, dtype=float), _TINY)


def plot_figure(path: Path, title: str, ylabel: str, panels: list, band: str) -> None:
    """``panels``: list of dicts with keys name, iters, mean, lo, hi and optional
    gordon / population arrays.  ``band`` names the shaded region for the legend."""
    fig, axes = plt.subplots(1, len(panels), figsize=(5.0 * len(panels), 3.8), squeeze=False)
    for ax, p in zip(axes[0], panels):
        it = p["iters"]
        ax.fill_between(it, _positive(p["lo"]), _positive(p["hi"]), color="C0", alpha=0.25,
                        linewidth=0, label=f"empirical {band}")
        ax.plot(it, _positive(p["mean"]), "o-", color="C0", markersize=3, label="empirical mean")
        if p.get("gordon") is not None:
            ax.plot(it, _positive(p["gordon"]), "--", color="C3", label="Gordon")
        if p.get("population") is not None:
            ax.plot(it, _positive(p["population"]), ":", color="k", label="population")
        ax.set_yscale("log")
        ax.set_xlabel("iteration")
        ax.set_ylabel(ylabel)
        ax.set_title(p["name"])
        ax.legend(fontsize=8)
    fig.suptitle(title)
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
