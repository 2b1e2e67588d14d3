"""Figures for a finished training run, rendered to files.

Reads the delimited outputs a run directory already contains
(``result.csv``, ``summary.json``) and saves PNGs next to them:
convergence history, design-variable paths, and, when a config and
target are supplied, the target-vs-fitted output overlay.
"""

import csv
import json
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .neuro import broadcast_design
from .simulation import simulate


def load_result_rows(path):
    """(iterations, designs (n, d), rmse (n,)) from a result.csv."""
    its, xs, errs = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        d = sum(1 for c in header if c.startswith("x_"))
        has_err = "rmse" in header
        for row in reader:
            its.append(int(row[0]))
            xs.append([float(v) for v in row[1:1 + d]])
            errs.append(float(row[1 + d]) if has_err else np.nan)
    return np.array(its), np.array(xs), np.array(errs)


def render_run_report(run_dir, config=None, target=None):
    """Write the report figures; returns the list of files created."""
    its, xs, errs = load_result_rows(os.path.join(run_dir, "result.csv"))
    written = []

    fig, ax = plt.subplots(figsize=(6, 4))
    positive = errs[np.isfinite(errs) & (errs > 0)]
    if positive.size:
        ax.semilogy(its, np.where(errs > 0, errs, np.nan), "o-")
    else:
        ax.plot(its, errs, "o-")
    ax.set_xlabel("iteration")
    ax.set_ylabel("rmse")
    ax.set_title("Training convergence")
    ax.grid(True, which="both", alpha=0.3)
    path = os.path.join(run_dir, "convergence.png")
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(6, 4))
    for i in range(xs.shape[1]):
        ax.plot(its, xs[:, i], "o-", label=f"w_{i}")
    ax.set_xlabel("iteration")
    ax.set_ylabel("output weight [Pa]")
    ax.set_title("Design variable paths")
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    path = os.path.join(run_dir, "design_path.png")
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    written.append(path)

    if config is not None and target is not None:
        summary_path = os.path.join(run_dir, "summary.json")
        if os.path.exists(summary_path):
            with open(summary_path) as fh:
                xopt = np.array(json.load(fh)["xopt"], dtype=float)
        else:
            xopt = xs[-1]
        fitted = simulate(config, broadcast_design(xopt, config.n_elems))
        t = fitted.times
        fig, ax = plt.subplots(figsize=(7, 4))
        ax.plot(t, np.asarray(target, dtype=float), label="target", lw=1.2)
        ax.plot(t, fitted.values, "--", label="fitted", lw=1.2)
        ax.set_xlabel("time [s]")
        ax.set_ylabel("output displacement [m]")
        ax.set_title("Target vs fitted output")
        ax.legend(loc="best")
        ax.grid(True, alpha=0.3)
        path = os.path.join(run_dir, "fit.png")
        fig.savefig(path, dpi=120, bbox_inches="tight")
        plt.close(fig)
        written.append(path)

    return written
