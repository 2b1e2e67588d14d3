"""Training objective: RMSE, FD gradients, scaling maps, worker pool."""

import numpy as np
import pytest
from dataclasses import replace

from neuroskin.errors import EvaluationError
from neuroskin.objective import (
    EvalResult,
    TrainingProblem,
    evaluate_batch,
    mse,
    objective_and_gradient,
    rmse,
)
from neuroskin.simulation import Excitation, SimConfig, simulate
from neuroskin.neuro import broadcast_design


def small_config(**overrides):
    base = SimConfig(nx=2, ny=4,
                     excitation=Excitation(node_ids=(13,), amplitude=50.0,
                                           waveform="half_sine",
                                           t_start=0.0, t_end=0.05),
                     n_steps=40, output_node=7, design_dim=2,
                     bounds=((4.0e5, 5.5e5),))
    from dataclasses import replace as _replace
    return _replace(base, **overrides)


def make_problem(**kwargs):
    config = kwargs.pop("config", small_config())
    w_true = np.array([4.3e5, 5.1e5])[:config.design_dim]
    target = simulate(config, broadcast_design(w_true, config.n_elems))
    defaults = dict(sim_config=config, target=target,
                    bounds=config.design_bounds())
    defaults.update(kwargs)
    return TrainingProblem(**defaults), w_true


def test_rmse_mse_basic():
    a = np.array([1.0, 2.0, 3.0])
    b = np.array([1.0, 0.0, 3.0])
    assert mse(a, b) == pytest.approx(4.0 / 3.0)
    assert rmse(a, b) == pytest.approx(np.sqrt(4.0 / 3.0))
    assert rmse(a, a) == 0.0
    with pytest.raises(ValueError):
        mse(a, b[:2])


def test_objective_zero_at_target():
    problem, w_true = make_problem()
    result = objective_and_gradient(problem.from_raw(w_true), problem)
    assert isinstance(result, EvalResult)
    assert result.f == 0.0
    assert result.n_sims == problem.design_dim + 1


def test_scaling_round_trip():
    problem, _ = make_problem()
    rng = np.random.default_rng(3)
    for _ in range(20):
        x = rng.uniform(0.0, 1.0, problem.design_dim)
        w = problem.to_raw(x)
        assert np.all(w >= problem.bounds[:, 0] - 1e-9)
        assert np.all(w <= problem.bounds[:, 1] + 1e-9)
        np.testing.assert_allclose(problem.from_raw(w), x,
                                   rtol=1e-12, atol=1e-12)
    raw_problem, _ = make_problem(design_scaling="raw")
    w = np.array([4.4e5, 5.0e5])
    np.testing.assert_array_equal(raw_problem.to_raw(w), w)
    np.testing.assert_array_equal(raw_problem.from_raw(w), w)


def test_optimizer_bounds_per_scaling():
    problem, _ = make_problem()
    lo, hi = problem.optimizer_bounds()
    np.testing.assert_array_equal(lo, np.zeros(2))
    np.testing.assert_array_equal(hi, np.ones(2))
    raw_problem, _ = make_problem(design_scaling="raw")
    lo, hi = raw_problem.optimizer_bounds()
    np.testing.assert_array_equal(lo, raw_problem.bounds[:, 0])
    np.testing.assert_array_equal(hi, raw_problem.bounds[:, 1])


def test_gradient_matches_central_difference_oracle():
    """The FD gradient agrees with an independent central difference.

    Central differences with a smaller step have O(h^2) truncation error
    and serve as the oracle for the forward-difference implementation.
    """
    problem, _ = make_problem(fd_delta=1.0e-3)
    x = np.array([0.35, 0.6])
    result = objective_and_gradient(x, problem)

    h = 1.0e-4
    for i in range(2):
        e = np.eye(2)[i]
        fp = objective_and_gradient(x + h * e, problem).f
        fm = objective_and_gradient(x - h * e, problem).f
        central = (fp - fm) / (2.0 * h)
        assert result.g[i] == pytest.approx(central, rel=2e-2)


def test_gradient_bit_identical_across_worker_counts():
    problem1, _ = make_problem(worker_count=1)
    problemN, _ = make_problem(worker_count=problem1.design_dim + 1)
    x = np.array([0.2, 0.8])
    r1 = objective_and_gradient(x, problem1)
    rN = objective_and_gradient(x, problemN)
    assert r1.f == rN.f
    assert np.array_equal(r1.g, rN.g)


def test_out_of_bounds_rejected():
    problem, _ = make_problem()
    with pytest.raises(ValueError):
        objective_and_gradient(np.array([-0.1, 0.5]), problem)


def test_eval_dirs_written(tmp_path):
    problem, _ = make_problem(eval_root=str(tmp_path / "evals"))
    objective_and_gradient(np.array([0.5, 0.5]), problem)
    dirs = sorted(p.name for p in (tmp_path / "evals").iterdir())
    assert dirs == ["000000", "000001", "000002"]
    for d in dirs:
        assert (tmp_path / "evals" / d / "output.out").exists()
        assert (tmp_path / "evals" / d / "params.csv").exists()


def test_evaluate_batch_order_and_nan_on_failure():
    problem, w_true = make_problem()
    good = problem.from_raw(w_true)
    xs = [good, np.array([0.5, 0.5]), good]
    vals = evaluate_batch(xs, problem)
    assert vals[0] == 0.0 and vals[2] == 0.0
    assert vals[1] > 0.0

    # a diverging design (overflowing state) yields NaN without
    # aborting the rest of the batch
    unstable = replace(problem.sim_config, bounds=((-1.0e308, 1.0e308),))
    bad_problem = TrainingProblem(sim_config=unstable, target=problem.target,
                                  bounds=np.array([[-1.0e308, 1.0e308]] * 2),
                                  design_scaling="raw")
    with np.errstate(all="ignore"):
        vals = evaluate_batch([np.array([0.0, 0.0]),
                               np.array([1.0e308, -1.0e308]),
                               np.array([0.0, 0.0])], bad_problem)
    assert np.isfinite(vals[0]) and np.isfinite(vals[2])
    assert np.isnan(vals[1])


def test_problem_validation():
    config = small_config()
    target = np.zeros(config.n_steps)
    bounds = config.design_bounds()
    with pytest.raises(ValueError):
        TrainingProblem(sim_config=config, target=np.zeros(5), bounds=bounds)
    with pytest.raises(ValueError):
        TrainingProblem(sim_config=config, target=target,
                        bounds=np.array([[2.0, 1.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        TrainingProblem(sim_config=config, target=target, bounds=bounds,
                        fd_delta=0.0)
    with pytest.raises(ValueError):
        TrainingProblem(sim_config=config, target=target, bounds=bounds,
                        design_scaling="log")
    with pytest.raises(ValueError):
        TrainingProblem(sim_config=config, target=target,
                        bounds=np.array([[0.0, 1.0]] * 3))
