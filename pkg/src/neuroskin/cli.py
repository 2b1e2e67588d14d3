"""Command-line surface: target generation, training, evaluation, simulation.

Owns every on-disk format of a run directory:

* ``manifest.json``   config hash and options, written before any simulation
* ``result.csv``      one row per accepted iterate: iter, x_0..x_{d-1}, rmse, mse
* ``summary.json``    xopt, fopt, status, n_evaluations, wall time
* ``evals/``          per-evaluation run directories (pruned unless kept)

Exit codes: 0 success, 2 config or validation error, 3 simulation
divergence, 4 evaluation or optimizer failure.
"""

import argparse
import datetime
import json
import os
import shutil
import sys
import time

import numpy as np

from .config import config_sha256, load_config
from .errors import ConfigError, EvaluationError, NeuroSkinError, SimulationDivergedError
from .lbfgsb import Bounds, LbfgsbOptions, minimize
from .neuro import broadcast_design
from .objective import TrainingProblem, evaluate_batch, mse, objective_and_gradient, rmse
from .simulation import read_series, run_and_write, simulate, write_series

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_EVAL = 4


def _fmt(v: float) -> str:
    return f"{float(v):.17g}"


def _parse_design(text: str) -> np.ndarray:
    try:
        return np.array([float(p) for p in text.split(",") if p.strip() != ""])
    except ValueError:
        raise ConfigError(f"cannot parse design vector {text!r}")


def _design_from_args(args, config) -> np.ndarray:
    """Design vector from --w (list or params.csv path) or config default."""
    if args.w is None:
        return np.full(config.design_dim, config.default_w_o)
    if os.path.exists(args.w):
        rows = np.loadtxt(args.w, delimiter=",", skiprows=1, ndmin=2)
        w_full = rows[:, 1]
        if w_full.size != config.n_elems:
            raise ConfigError(
                f"params file has {w_full.size} elements, expected {config.n_elems}")
        k = config.n_elems // config.design_dim
        blocks = w_full.reshape(config.design_dim, k)
        if not np.all(blocks == blocks[:, :1]):
            raise ConfigError("params file is not block-constant for this design_dim")
        return blocks[:, 0].copy()
    return _parse_design(args.w)


def _check_in_bounds(w: np.ndarray, config) -> None:
    b = config.design_bounds()
    if w.size != config.design_dim:
        raise ConfigError(
            f"design has {w.size} entries, config design_dim is {config.design_dim}")
    if np.any(w < b[:, 0]) or np.any(w > b[:, 1]):
        raise ConfigError("design out of bounds")


def cmd_gen_target(args) -> int:
    config = load_config(args.config)
    w = _design_from_args(args, config)
    _check_in_bounds(w, config)
    series = simulate(config, broadcast_design(w, config.n_elems))
    out_dir = os.path.dirname(os.path.abspath(args.out))
    os.makedirs(out_dir, exist_ok=True)
    write_series(args.out, series.values)
    rms = float(np.sqrt(np.mean(series.values ** 2)))
    print(f"wrote {len(series)} samples to {args.out}, rms amplitude {rms:.6g}")
    return EXIT_OK


def _optimizer_options(args) -> LbfgsbOptions:
    return LbfgsbOptions(maxiter=args.maxiter, maxfun=args.maxfun,
                         factr=args.factr, pgtol=args.pgtol)


def _write_manifest(out_dir, args, config) -> None:
    manifest = {
        "command": " ".join(sys.argv[1:]),
        "config_path": os.path.abspath(args.config),
        "config_sha256": config_sha256(args.config),
        "design_dim": config.design_dim,
        "options": {
            "delta": args.delta,
            "scaling": args.scaling,
            "maxiter": args.maxiter,
            "maxfun": args.maxfun,
            "factr": args.factr,
            "pgtol": args.pgtol,
            "workers": args.workers,
        },
        "outputs": ["result.csv", "summary.json"],
        "started": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _result_header(d: int) -> str:
    cols = ["iter"] + [f"x_{i}" for i in range(d)] + ["rmse", "mse"]
    return ",".join(cols)


def _write_result_rows(path, rows) -> None:
    """rows: list of (iteration, raw design vector, rmse or None)."""
    d = rows[0][1].size
    with open(path, "w", newline="\n") as fh:
        fh.write(_result_header(d) + "\n")
        for it, w, err in rows:
            cells = [str(it)] + [_fmt(v) for v in w]
            if err is None or not np.isfinite(err):
                cells += ["nan", "nan"]
            else:
                cells += [_fmt(err), _fmt(err * err)]
            fh.write(",".join(cells) + "\n")


def cmd_train(args) -> int:
    config = load_config(args.config)
    target = read_series(args.target)
    out_dir = os.path.abspath(args.out)
    os.makedirs(out_dir, exist_ok=True)
    result_path = os.path.join(out_dir, "result.csv")
    if os.path.exists(result_path):
        os.remove(result_path)  # fresh trace; never append to a stale run
    _write_manifest(out_dir, args, config)

    eval_root = os.path.join(out_dir, "evals")
    problem = TrainingProblem(sim_config=config, target=target,
                              bounds=config.design_bounds(),
                              fd_delta=args.delta,
                              design_scaling=args.scaling,
                              worker_count=args.workers,
                              eval_root=eval_root)
    x0 = problem.from_raw(np.full(config.design_dim, config.default_w_o))
    lo, hi = problem.optimizer_bounds()

    iterates = [problem.to_raw(x0)]
    live = open(result_path, "w", buffering=1, newline="\n")
    live.write(_result_header(config.design_dim) + "\n")
    live.write(",".join(["0"] + [_fmt(v) for v in iterates[0]]) + "\n")

    def on_iterate(x):
        w = problem.to_raw(x)
        iterates.append(w)
        live.write(",".join([str(len(iterates) - 1)] + [_fmt(v) for v in w]) + "\n")

    def fg(x):
        res = objective_and_gradient(x, problem)
        return res.f, res.g

    start = time.monotonic()
    result = minimize(fg, x0, Bounds(lo, hi), _optimizer_options(args),
                      on_iterate=on_iterate)
    wall = time.monotonic() - start
    live.close()

    # re-evaluate every logged iterate and rewrite the trace with errors
    errs = evaluate_batch([problem.from_raw(w) for w in iterates], problem)
    _write_result_rows(result_path,
                       [(i, w, e) for i, (w, e) in enumerate(zip(iterates, errs))])

    xopt_raw = problem.to_raw(result.xopt)
    summary = {
        "xopt": [float(v) for v in xopt_raw],
        "fopt": result.fopt,
        "status": result.status,
        "n_evaluations": result.n_evaluations,
        "wall_time_s": wall,
    }
    with open(os.path.join(out_dir, "summary.json"), "w", newline="\n") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")

    if not args.keep_evals and os.path.isdir(eval_root):
        shutil.rmtree(eval_root)

    print("xopt:", " ".join(_fmt(v) for v in xopt_raw))
    print("fopt:", _fmt(result.fopt))
    if result.status == "aborted":
        return EXIT_EVAL
    return EXIT_OK


def cmd_evaluate(args) -> int:
    config = load_config(args.config)
    target = read_series(args.target)
    d = config.design_dim
    rows = []
    with open(args.result) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            try:
                vals = [float(p) for p in parts]
            except ValueError:
                continue  # header
            if len(vals) < d:
                raise ConfigError(
                    f"row has {len(vals)} columns, need at least {d}")
            if len(vals) == d:
                it, w = len(rows), np.array(vals)
            else:
                it, w = int(vals[0]), np.array(vals[1:1 + d])
            rows.append((it, w))
    if not rows:
        print("no iterates", file=sys.stderr)
        return EXIT_EVAL

    problem = TrainingProblem(sim_config=config, target=target,
                              bounds=config.design_bounds(),
                              design_scaling="raw",
                              worker_count=args.workers)
    errs = evaluate_batch([w for _, w in rows], problem)
    _write_result_rows(args.result,
                       [(it, w, e) for (it, w), e in zip(rows, errs)])
    for (it, w), e in zip(rows, errs):
        print(f"iter {it}: rmse {_fmt(e) if np.isfinite(e) else 'nan'}")
    if any(not np.isfinite(e) for e in errs):
        return EXIT_EVAL
    return EXIT_OK


def cmd_simulate(args) -> int:
    config = load_config(args.config)
    w = _design_from_args(args, config)
    _check_in_bounds(w, config)
    series = run_and_write(os.path.abspath(args.out), config, w)
    print(f"wrote {len(series)} samples to {os.path.join(args.out, 'output.out')}")
    return EXIT_OK


def cmd_report(args) -> int:
    from .report import render_run_report
    config = load_config(args.config) if args.config else None
    target = read_series(args.target) if args.target else None
    paths = render_run_report(os.path.abspath(args.out), config=config,
                              target=target)
    for p in paths:
        print("wrote", p)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="neuroskin",
        description="Dynamic neuro-skin membrane: simulate and train "
                    "per-element output weights against a target response.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, target=False, out=True):
        p.add_argument("--config", required=True, help="JSON config file")
        if target:
            p.add_argument("--target", required=True,
                           help="target series (one float per line)")
        if out:
            p.add_argument("--out", required=True, help="output path")
        p.add_argument("--workers", type=int, default=1,
                       help="concurrent simulations (default 1)")

    p = sub.add_parser("gen-target", help="simulate a chosen design and save its output")
    common(p)
    p.add_argument("--w", help="comma-separated design vector (default: config default_w_o)")
    p.set_defaults(func=cmd_gen_target)

    p = sub.add_parser("train", help="identify output weights matching a target")
    common(p, target=True)
    p.add_argument("--delta", type=float, default=1.0e-2,
                   help="forward-difference step (default 1e-2)")
    p.add_argument("--scaling", choices=("raw", "normalized"),
                   default="normalized", help="design variable scaling")
    p.add_argument("--maxiter", type=int, default=5)
    p.add_argument("--maxfun", type=int, default=100)
    p.add_argument("--factr", type=float, default=1.0e12)
    p.add_argument("--pgtol", type=float, default=1.0e-5)
    p.add_argument("--keep-evals", action="store_true",
                   help="keep per-evaluation run directories under out/evals")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="recompute rmse/mse for logged iterates")
    common(p, target=True, out=False)
    p.add_argument("--result", required=True, help="result.csv to rewrite")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("simulate", help="single forward run, write params + output")
    common(p)
    p.add_argument("--w", help="comma-separated design vector or params.csv path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="render figures for a finished training run")
    p.add_argument("--out", required=True, help="training run directory")
    p.add_argument("--config", help="config (enables target-vs-fit overlay)")
    p.add_argument("--target", help="target series (enables target-vs-fit overlay)")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except EvaluationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EVAL
    except NeuroSkinError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EVAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
