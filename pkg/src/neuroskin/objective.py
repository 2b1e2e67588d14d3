"""Training objective (RMSE of the output history) and FD sensitivities.

The gradient is a forward finite difference: the base point and the d
perturbed points are simulated concurrently by a worker pool and joined
in index order, so results are bit-identical for any worker count.

In ``normalized`` scaling the optimizer sees variables in [0, 1]^d mapped
affinely onto the raw bounds; the FD step then acts on order-one numbers
instead of perturbing ~4.5e5-sized weights by an absolute 1e-2. ``raw``
scaling reproduces the ill-scaled literal setup for fidelity runs.
"""

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import EvaluationError, NeuroSkinError
from .neuro import broadcast_design
from .simulation import SimConfig, TimeSeries, run_and_write, simulate

log = logging.getLogger(__name__)


def _as_values(series) -> np.ndarray:
    if isinstance(series, TimeSeries):
        return series.values
    return np.asarray(series, dtype=float).ravel()


def mse(yhat, y) -> float:
    """Mean squared residual between two equally long series."""
    a, b = _as_values(yhat), _as_values(y)
    if a.size != b.size:
        raise ValueError(f"series lengths differ: {a.size} vs {b.size}")
    r = a - b
    return float(np.mean(r * r))


def rmse(yhat, y) -> float:
    """Root-mean-square residual between two equally long series."""
    return float(np.sqrt(mse(yhat, y)))


@dataclass
class TrainingProblem:
    """Inverse-identification problem: match a target output history.

    ``bounds`` are raw (Pa) per-variable boxes. ``eval_root``, when set,
    makes every simulation write a run directory named by a global
    evaluation index.
    """

    sim_config: SimConfig
    target: np.ndarray
    bounds: np.ndarray
    fd_delta: float = 1.0e-2
    design_scaling: str = "normalized"   # "raw" or "normalized"
    worker_count: int = 1
    eval_root: str | None = None
    _eval_counter: int = field(default=0, repr=False)

    def __post_init__(self):
        self.target = _as_values(self.target)
        self.bounds = np.asarray(self.bounds, dtype=float).reshape(-1, 2)
        if self.target.size != self.sim_config.n_steps:
            raise ValueError(
                f"target length {self.target.size} != n_steps "
                f"{self.sim_config.n_steps}")
        if np.any(self.bounds[:, 0] >= self.bounds[:, 1]):
            raise ValueError("each bound pair needs lower < upper")
        if not self.fd_delta > 0:
            raise ValueError(f"fd_delta must be > 0, got {self.fd_delta}")
        if self.design_scaling not in ("raw", "normalized"):
            raise ValueError(f"unknown design_scaling {self.design_scaling!r}")
        if self.bounds.shape[0] != self.design_dim:
            raise ValueError(
                f"{self.bounds.shape[0]} bound pairs for design_dim "
                f"{self.design_dim}")

    @property
    def design_dim(self) -> int:
        return self.sim_config.design_dim

    def to_raw(self, x) -> np.ndarray:
        """Map an optimizer-space vector to raw output weights [Pa]."""
        x = np.asarray(x, dtype=float).ravel()
        if self.design_scaling == "raw":
            return x
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        return lo + x * (hi - lo)

    def from_raw(self, w) -> np.ndarray:
        """Inverse of :meth:`to_raw`."""
        w = np.asarray(w, dtype=float).ravel()
        if self.design_scaling == "raw":
            return w
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        return (w - lo) / (hi - lo)

    def optimizer_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """(lower, upper) in optimizer space."""
        if self.design_scaling == "raw":
            return self.bounds[:, 0].copy(), self.bounds[:, 1].copy()
        d = self.design_dim
        return np.zeros(d), np.ones(d)

    def in_bounds(self, x) -> bool:
        lo, hi = self.optimizer_bounds()
        x = np.asarray(x, dtype=float).ravel()
        return bool(np.all(x >= lo) and np.all(x <= hi))

    def _next_eval_dirs(self, count: int) -> list:
        if self.eval_root is None:
            return [None] * count
        dirs = [os.path.join(self.eval_root, f"{self._eval_counter + i:06d}")
                for i in range(count)]
        self._eval_counter += count
        return dirs


@dataclass(frozen=True)
class EvalResult:
    """Objective value, FD gradient, and simulation count of one call."""

    f: float
    g: np.ndarray
    n_sims: int


def _sim_rmse(payload) -> float:
    """Worker task: simulate one raw design and return its RMSE."""
    config, x_raw, target, run_dir = payload
    if run_dir is None:
        series = simulate(config, broadcast_design(x_raw, config.n_elems))
    else:
        series = run_and_write(run_dir, config, x_raw)
    return rmse(series, target)


def _run_payloads(payloads, worker_count: int) -> list:
    """Evaluate payloads, concurrently if asked, joined in index order."""
    if worker_count <= 1 or len(payloads) == 1:
        return [_sim_rmse(p) for p in payloads]
    workers = min(worker_count, len(payloads))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_sim_rmse, p) for p in payloads]
        results = []
        for i, fut in enumerate(futures):
            try:
                results.append(fut.result())
            except NeuroSkinError as exc:
                raise EvaluationError(i, f"perturbation {i} failed: {exc}")
    return results


def objective_and_gradient(x, problem: TrainingProblem) -> EvalResult:
    """RMSE and forward-difference gradient at ``x`` (optimizer space).

    Runs d+1 simulations: the base point and x + delta*e_i for each i.
    No caching across calls.
    """
    x = np.asarray(x, dtype=float).ravel()
    if not problem.in_bounds(x):
        raise ValueError(f"design {x} outside optimizer bounds")
    d = x.size
    delta = problem.fd_delta
    points = [x] + [x + delta * np.eye(d)[i] for i in range(d)]
    dirs = problem._next_eval_dirs(d + 1)
    payloads = [(problem.sim_config, problem.to_raw(p), problem.target, rd)
                for p, rd in zip(points, dirs)]
    try:
        fs = _run_payloads(payloads, problem.worker_count)
    except NeuroSkinError as exc:
        if isinstance(exc, EvaluationError):
            raise
        raise EvaluationError(0, str(exc))
    f = fs[0]
    g = (np.asarray(fs[1:]) - f) / delta
    return EvalResult(f=float(f), g=g, n_sims=d + 1)


def evaluate_batch(xs, problem: TrainingProblem) -> list:
    """RMSE per design vector, order-preserving.

    A diverging item is reported (logged, NaN in the result) without
    aborting the rest of the batch.
    """
    xs = [np.asarray(x, dtype=float).ravel() for x in xs]
    payloads = [(problem.sim_config, problem.to_raw(x), problem.target, None)
                for x in xs]
    results = []
    if problem.worker_count <= 1:
        for i, p in enumerate(payloads):
            try:
                results.append(_sim_rmse(p))
            except NeuroSkinError as exc:
                log.warning("batch item %d failed: %s", i, exc)
                results.append(float("nan"))
        return results
    workers = min(problem.worker_count, max(1, len(payloads)))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_sim_rmse, p) for p in payloads]
        for i, fut in enumerate(futures):
            try:
                results.append(fut.result())
            except NeuroSkinError as exc:
                log.warning("batch item %d failed: %s", i, exc)
                results.append(float("nan"))
    return results
