"""Subcommand execution: turns a loaded experiment config into data files, trained models and reports."""

import json
import logging
import math
import os
import time
from dataclasses import dataclass, replace

import numpy as np
from scipy.stats import norm

from attacks import evaluate_robust_accuracy, save_report
from baselines import run_wdro_baseline, train_erm, wdro_inner_maximize
from config_format import experiment_from_data, fill_defaults, load_config, override, theta_from_text, validate_config
from core_model import HyperParams, RandomStream, save_anchors, theta_array
from datasets import generate_synthetic_dataset
from double_loop import DoubleLoopConfig, estimator_diagnostics, run_double_loop
from errors import ConfigError, UnsupportedDimensionError
from gradient_check import check_gradients
from langevin import LSI_USER_SUPPLIED, LsiEstimate, run_chains, theorem_chain_config
from losses import make_loss
from oracles import (
    TRAPEZOID, closed_form_worstcase, default_lsi, dual_objective_quadrature, empirical_w2_1d,
    grid_moments, make_grid, true_hypergradient_quadrature, worstcase_density_on_grid,
)
from particles import save_bank
from presets import load_preset
from settings import (
    BANK_FILE, FD_REL_TOL, FD_STEP, FLOAT_FORMAT, REPORT_FILE, SAMPLES_FILE, STREAM_SAMPLER,
    SUMMARY_FILE, SWEEP_FILE, TEST_FILE, THETA_FILE, TRACE_FILE, TRAIN_FILE,
)
from single_loop import SingleLoopConfig, run_single_loop
from solver_trace import save_trace
from utils import format_float

logger = logging.getLogger(__name__)

SDRO_SOLVERS = ("sdro_double", "sdro_single")
ORACLE_SAMPLES = 2000
QUADRATURE_FD_TOL = 1e-6
GRID_MOMENT_TOL = 1e-5


@dataclass
class TrainResult:
    solver: str
    theta: np.ndarray
    trace: object = None
    bank: object = None
    wall_clock_s: float = 0.0

    def summary(self):
        steps = self.trace.total_langevin_steps if self.trace is not None else 0
        grads = self.trace.total_grad_evals if self.trace is not None else 0
        return {"solver": self.solver, "theta": [float(v) for v in self.theta],
                "total_langevin_steps": int(steps), "total_grad_evals": int(grads),
                "wall_clock_s": self.wall_clock_s}


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------

def load_experiment_data(config_path=None, preset=None, seed=None, out_dir=None):
    """Config data from a file or a named preset, with --seed and --out-dir applied."""
    if config_path and preset:
        raise ConfigError("give either --config or --preset, not both")
    if config_path:
        data = load_config(config_path)
    elif preset:
        data = fill_defaults(load_preset(preset))
    else:
        raise ConfigError("a config file (--config) or a preset (--preset) is required")
    if seed is not None:
        data = override(data, "dataset", "seed", int(seed))
        data = override(data, "solver", "seed", int(seed))
    if out_dir is not None:
        data = override(data, "output", "dir", out_dir)
    validate_config(data)
    return data


def build_problem(exp):
    """(train, test, model) for an experiment."""
    train, test = generate_synthetic_dataset(exp.dataset)
    model = make_loss(exp.loss_kind, exp.loss_params, anchors=train, hp=exp.hp)
    return train, test, model


def user_lsi(exp):
    """The [hyper] lsi_alpha estimate, or None when the config leaves it unset."""
    return LsiEstimate(exp.lsi_alpha, LSI_USER_SUPPLIED) if exp.lsi_alpha else None


def resolve_lsi(exp, model, anchors, theta=None):
    """User-supplied alpha, else default_lsi at *theta* (over the theta region when None)."""
    return user_lsi(exp) or default_lsi(model, anchors, exp.hp, theta)


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

def train_solver(exp, train, model, solver=None):
    """Train one solver on *train*. The returned theta follows [solver] output (last or uniform)."""
    solver = solver or exp.solver
    hp = exp.hp
    p = exp.solver_params
    seed = int(p["seed"])
    stream = RandomStream(seed)
    started = time.perf_counter()
    trace = bank = None
    if solver == "erm":
        theta = train_erm(train, model, int(p["steps"]), float(p["eta"]), stream).theta
    elif solver == "wdro":
        theta = run_wdro_baseline(train, hp.lam, model, int(p["steps"]), float(p["eta"]),
                                  int(p["wdro_inner_steps"]), stream,
                                  ascent_rate=float(p["wdro_ascent_rate"])).theta
    elif solver == "sdro_double":
        config = DoubleLoopConfig(
            eta=float(p["eta"]), T_out=int(p["T_out"]) or None, delta=float(p["delta"]),
            varrho=float(p["varrho"]) or None, seed=seed,
            inner_tau=float(p["inner_tau"]) or None, inner_steps=int(p["inner_steps"]) or None,
            F_gap=float(p["F_gap"]),
        )
        _, trace = run_double_loop(config, train, hp, model, user_lsi(exp))
    elif solver == "sdro_single":
        config = SingleLoopConfig(
            tau=float(p["tau"]), eta=float(p["eta_upper"]), beta0=float(p["beta0"]),
            batch=int(p["batch"]), M=int(p["M"]), T=int(p["T"]) or None, seed=seed,
            varrho=float(p["varrho"]) or None, F_gap=float(p["F_gap"]),
        )
        _, bank, trace = run_single_loop(config, train, hp, model, stream, user_lsi(exp))
    else:
        raise ConfigError(f"unknown solver '{solver}'")
    if trace is not None:
        theta = trace.theta_last if p["output"] == "last" else trace.theta_hat
    return TrainResult(solver, np.array(theta), trace, bank, time.perf_counter() - started)


def _write_summary(out_dir, command, seed, payload):
    path = os.path.join(out_dir, SUMMARY_FILE)
    os.makedirs(out_dir, exist_ok=True)
    with open(path, "w") as f:
        json.dump({"command": command, "seed": seed, **payload}, f, indent=2)
        f.write("\n")
    logger.info("wrote %s", path)


def _save_theta(path, theta):
    theta = np.atleast_1d(theta)
    np.savetxt(path, theta.reshape(1, -1), fmt=FLOAT_FORMAT, delimiter=",",
               header=",".join(f"theta_{j}" for j in range(theta.shape[0])), comments="")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_gen_data(data, **_):
    exp = experiment_from_data(data)
    train, test = generate_synthetic_dataset(exp.dataset)
    for name, anchors in ((TRAIN_FILE, train), (TEST_FILE, test)):
        path = os.path.join(exp.out_dir, name)
        save_anchors(path, anchors)
        logger.info("wrote %s (%d points)", path, anchors.n)
    return 0


def cmd_train(data, **_):
    exp = experiment_from_data(data)
    train, test, model = build_problem(exp)
    result = train_solver(exp, train, model)
    os.makedirs(exp.out_dir, exist_ok=True)
    _save_theta(os.path.join(exp.out_dir, THETA_FILE), result.theta)
    if result.trace is not None:
        save_trace(os.path.join(exp.out_dir, TRACE_FILE), result.trace, log_theta=exp.log_theta)
    if result.bank is not None:
        save_bank(os.path.join(exp.out_dir, BANK_FILE), result.bank)
    payload = result.summary()
    payload["clean_accuracy"] = None
    if test.labeled and hasattr(model, "predict"):
        predictions = model.rebind(test.labels).predict(result.theta, test.points)
        payload["clean_accuracy"] = float(np.mean(predictions == test.labels))
    _write_summary(exp.out_dir, "train", int(exp.solver_params["seed"]), payload)
    return 0


def cmd_sample_worstcase(data, theta=None, samples=ORACLE_SAMPLES, **_):
    """Run the Langevin sampler at a fixed theta for every anchor; write samples.csv."""
    exp = experiment_from_data(data)
    train, _, model = build_problem(exp)
    theta = theta_from_text(theta, model.d_theta)
    lsi = resolve_lsi(exp, model, train, theta)
    stream = RandomStream(int(exp.solver_params["seed"]))
    delta = float(exp.solver_params["delta"])
    rows = []
    for i in range(train.n):
        config = theorem_chain_config(train.points[i], i, exp.hp, model, lsi, delta)
        z = run_chains(config, theta, exp.hp, model, stream, replicas=samples, tags=(STREAM_SAMPLER, i))
        rows.append(np.column_stack([np.full(samples, i), np.arange(samples), z]))
    table = np.vstack(rows)
    os.makedirs(exp.out_dir, exist_ok=True)
    path = os.path.join(exp.out_dir, SAMPLES_FILE)
    header = ",".join(["anchor_index", "sample_index"] + [f"z_{j + 1}" for j in range(train.d)])
    np.savetxt(path, table, fmt=["%d", "%d"] + [FLOAT_FORMAT] * train.d, delimiter=",",
               header=header, comments="")
    logger.info("wrote %s (%d anchors x %d samples)", path, train.n, samples)
    return 0


def cmd_attack_eval(data, workers=1, **_):
    """Train ERM, WDRO and the configured solver; write the misclassification-vs-radius report."""
    exp = experiment_from_data(data)
    train, test, model = build_problem(exp)
    solvers = ["erm", "wdro"] + ([exp.solver] if exp.solver in SDRO_SOLVERS else [])
    reports, summaries = [], {}
    for solver in solvers:
        result = train_solver(exp, train, model, solver)
        report = evaluate_robust_accuracy(result.theta, test, model, exp.attack, solver=solver, workers=workers)
        reports.append(report)
        summaries[solver] = {**result.summary(), "clean_accuracy": report.clean_accuracy,
                             "misclassification": list(report.misclassification)}
    save_report(os.path.join(exp.out_dir, REPORT_FILE), reports)
    logger.info("wrote %s", os.path.join(exp.out_dir, REPORT_FILE))
    main = summaries[solvers[-1]]
    _write_summary(exp.out_dir, "attack-eval", int(exp.solver_params["seed"]),
                   {**main, "solvers": summaries})
    return 0


def cmd_sweep_eps(data, workers=1, **_):
    """Train the configured Sinkhorn-DRO solver for each epsilon and write one robustness curve per epsilon."""
    exp = experiment_from_data(data)
    if exp.solver not in SDRO_SOLVERS:
        raise ConfigError(f"sweep-eps needs a Sinkhorn-DRO solver, config names '{exp.solver}'")
    train, test, model = build_problem(exp)
    os.makedirs(exp.out_dir, exist_ok=True)
    path = os.path.join(exp.out_dir, SWEEP_FILE)
    lines = ["epsilon,radius_fraction,radius,misclassification"]
    for eps in exp.solver_params["sweep_epsilons"]:
        hp = HyperParams(exp.hp.lam, float(eps))
        result = train_solver(replace(exp, hp=hp), train, model)
        report = evaluate_robust_accuracy(result.theta, test, model, exp.attack,
                                          solver=f"{exp.solver}@{eps:g}", workers=workers)
        for frac, radius, rate in zip(report.radius_fractions, report.radii, report.misclassification):
            lines.append(",".join(format_float(v) for v in (eps, frac, radius, rate)))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")
    logger.info("wrote %s", path)
    return 0


# ---------------------------------------------------------------------------
# Oracle consistency suite
# ---------------------------------------------------------------------------

def _rel(a, b):
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-6)))


def oracle_checks(exp, train, model, theta, stream, samples=ORACLE_SAMPLES, workers=1):
    """Run every applicable consistency check. Returns a list of (name, passed, detail)."""
    hp = exp.hp
    delta = float(exp.solver_params["delta"])
    lsi = resolve_lsi(exp, model, train, theta)
    results = []

    report = check_gradients(model, theta, train.points[0])
    results.append(("loss gradients vs finite differences", report.passes(FD_REL_TOL),
                    f"max rel err {report.max_rel_err:.2e}"))

    reference = None
    try:
        grid = make_grid(train.d)
    except UnsupportedDimensionError:
        grid = None
    if grid is not None:
        reference = true_hypergradient_quadrature(theta, train, hp, model, grid)
        fd = np.empty(model.d_theta)
        for j in range(model.d_theta):
            step = np.zeros(model.d_theta)
            step[j] = FD_STEP
            fd[j] = (dual_objective_quadrature(theta + step, train, hp, model, grid)
                     - dual_objective_quadrature(theta - step, train, hp, model, grid)) / (2.0 * FD_STEP)
        err = _rel(reference, fd)
        results.append(("quadrature hypergradient vs finite differences", err <= QUADRATURE_FD_TOL,
                        f"max rel err {err:.2e}"))

    closed = closed_form_worstcase(model, theta, train.points[0], hp)
    if closed is not None:
        if train.d <= 2:
            z, probs, _ = worstcase_density_on_grid(theta, train.points[0], hp, model, make_grid(train.d, TRAPEZOID))
            mean, var = grid_moments(z, probs)
            err = max(float(np.max(np.abs(mean - closed.mean))), abs(var - closed.variance_scale))
            results.append(("grid worst case vs closed form", err <= GRID_MOMENT_TOL, f"max abs err {err:.2e}"))
        if train.d == 1:
            config = theorem_chain_config(train.points[0], 0, hp, model, lsi, delta)
            z = run_chains(config, theta, hp, model, stream, replicas=samples)
            quantiles = closed.mean[0] + math.sqrt(closed.variance_scale) * norm.ppf(
                (np.arange(samples) + 0.5) / samples)
            w2 = empirical_w2_1d(z[:, 0], quantiles)
            tol = delta + 0.05 * math.sqrt(closed.variance_scale)
            results.append((f"sampler W2 at delta={delta:g} ({config.T} steps)", w2 <= tol,
                            f"W2 {w2:.4f} <= {tol:.4f}"))
        if model.kind == "quadratic":
            z_star = wdro_inner_maximize(theta, train.points[0], hp.lam, model,
                                         int(exp.solver_params["wdro_inner_steps"]),
                                         float(exp.solver_params["wdro_ascent_rate"]))
            err = float(np.max(np.abs(z_star - closed.mean)))
            results.append(("WDRO maximizer vs worst-case mean", err <= 1e-4, f"max abs err {err:.2e}"))

    if reference is not None:
        diag = estimator_diagnostics(theta, train, hp, model, delta, lsi, samples, stream, reference,
                                     workers=workers)
        results.append((f"estimator bias at delta={delta:g}", diag.bias_ok,
                        f"{diag.bias:.4f} <= {diag.bias_ceiling:.4f}"))
        results.append((f"estimator variance at delta={delta:g}", diag.variance_ok,
                        f"{diag.variance:.4f} <= {diag.variance_ceiling:.4f}"))
    return results


def cmd_oracle_check(data, theta=None, samples=ORACLE_SAMPLES, workers=1, **_):
    """Print a PASS/FAIL table; returns 0 iff every check passes, 1 otherwise."""
    exp = experiment_from_data(data)
    train, _, model = build_problem(exp)
    theta = theta_from_text(theta, model.d_theta) if theta else np.full(model.d_theta, 0.6)
    stream = RandomStream(int(exp.solver_params["seed"]))
    results = oracle_checks(exp, train, model, theta_array(theta), stream, samples, workers)
    width = max(len(name) for name, _, _ in results)
    for name, passed, detail in results:
        print(f"{name:<{width}}  {'PASS' if passed else 'FAIL'}  {detail}")
    failed = sum(1 for _, passed, _ in results if not passed)
    logger.info("oracle check: %d/%d passed", len(results) - failed, len(results))
    return 0 if failed == 0 else 1


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "sample-worstcase": cmd_sample_worstcase,
    "attack-eval": cmd_attack_eval,
    "oracle-check": cmd_oracle_check,
    "sweep-eps": cmd_sweep_eps,
}


def execute_command(name, data, **options):
    """Run subcommand *name* on validated config data and return its exit status."""
    if name not in COMMANDS:
        raise ConfigError(f"unknown command '{name}'")
    return COMMANDS[name](data, **options)
