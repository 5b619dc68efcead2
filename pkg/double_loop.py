"""Double-loop solver: per-iteration anchor sampling, an inner Langevin chain, and a one-sample hypergradient step."""

import logging
import math
from dataclasses import dataclass

import numpy as np

from core_model import Decision, RandomStream, theta_array
from errors import ConfigError, DivergenceError, SdroError, UnsupportedDimensionError
from langevin import SamplerConfig, run_chains, theorem_chain_config
from oracles import default_lsi, estimate_sigma2, lemma34_variance_bound
from settings import (
    DEFAULT_F_GAP, LOG_EVERY, PILOT_SAMPLES,
    STREAM_DIAGNOSTICS, STREAM_DOUBLE_LOOP, STREAM_DOUBLE_LOOP_CHAIN, STREAM_DOUBLE_LOOP_SELECT,
    STREAM_STATIONARITY,
)
from solver_trace import TraceRecorder
from utils import map_ordered

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DoubleLoopConfig:
    """Outer step size eta, outer iterations T_out and inner W2 accuracy delta.

    With *varrho* set, eta, T_out and delta follow the stationarity-target
    formulas; an explicit T_out still caps the run and eta is then
    re-derived as 1/sqrt(T_out V). inner_tau / inner_steps override the
    theorem chain parameters.
    """
    eta: float = 0.01
    T_out: int | None = 1000
    delta: float = 0.1
    varrho: float | None = None
    seed: int = 0
    inner_tau: float | None = None
    inner_steps: int | None = None
    kl0: float | None = None
    F_gap: float = DEFAULT_F_GAP
    theta0: np.ndarray | None = None

    def __post_init__(self):
        if self.varrho is None:
            if not self.eta >= 0:
                raise ConfigError(f"eta must be >= 0, got {self.eta}")
            if self.T_out is None or int(self.T_out) < 1:
                raise ConfigError(f"T_out must be >= 1, got {self.T_out}")
            if not self.delta > 0:
                raise ConfigError(f"delta must be > 0, got {self.delta}")
        elif not self.varrho > 0:
            raise ConfigError(f"varrho must be > 0, got {self.varrho}")
        if (self.inner_tau is None) != (self.inner_steps is None):
            raise ConfigError("inner_tau and inner_steps must be given together")


@dataclass(frozen=True)
class Theorem35Params:
    T_out: int
    eta: float
    delta: float


def hypergradient_estimate(theta, z, model, anchor_index=0) -> np.ndarray:
    """One-sample hypergradient estimator: grad_theta f_theta(z) at a worst-case sample z."""
    return np.asarray(model.grad_theta(theta, z, anchor_index), dtype=np.float64)


def theorem35_eta(T_out, V) -> float:
    """eta = 1 / sqrt(T_out V)."""
    return 1.0 / math.sqrt(T_out * V)


def theorem35_params(varrho, V, L_f2, F_gap=DEFAULT_F_GAP) -> Theorem35Params:
    """delta = varrho / (2 L_f2), T_out = ceil(16 V (2 F_gap + L_f2)^2 / varrho^4), eta = 1/sqrt(T_out V)."""
    if min(varrho, V, L_f2, F_gap) <= 0:
        raise ConfigError("theorem35_params needs positive varrho, V, L_f2 and F_gap")
    T_out = max(1, math.ceil(16.0 * V * (2.0 * F_gap + L_f2) ** 2 / varrho ** 4))
    return Theorem35Params(T_out=T_out, eta=theorem35_eta(T_out, V), delta=varrho / (2.0 * L_f2))


# ---------------------------------------------------------------------------
# Inner chains
# ---------------------------------------------------------------------------

def _chain_for(anchors, i, hp, model, lsi, delta, tau=None, steps=None, kl0=None):
    if tau is not None:
        return SamplerConfig(tau=tau, T=steps, anchor=anchors.points[i], anchor_index=i)
    return theorem_chain_config(anchors.points[i], i, hp, model, lsi, delta, kl0)


def worstcase_samples(theta, anchors, hp, model, lsi, delta, counts, stream, module,
                      tau=None, steps=None, workers=1):
    """Draw counts[i] delta-accurate chain samples per anchor i. Returns a list of (counts[i], d) arrays."""
    if tau is None and lsi is None:
        lsi = default_lsi(model, anchors, hp, theta)
    def draw(i):
        if counts[i] == 0:
            return np.empty((0, anchors.d))
        config = _chain_for(anchors, i, hp, model, lsi, delta, tau, steps)
        return run_chains(config, theta, hp, model, stream, replicas=int(counts[i]), tags=(module, i))
    return map_ordered(draw, range(anchors.n), workers)


def stationarity_norm(theta, anchors, hp, model, replicas, delta_eval, stream, lsi=None,
                      chain_tau=None, chain_steps=None, workers=1) -> float:
    """Monte-Carlo |grad F(theta)|: fresh accurate chains, *replicas* per anchor, estimates averaged."""
    if replicas < 1:
        raise ConfigError(f"replicas must be >= 1, got {replicas}")
    samples = worstcase_samples(theta, anchors, hp, model, lsi, delta_eval, [replicas] * anchors.n,
                                stream, STREAM_STATIONARITY, chain_tau, chain_steps, workers)
    total = np.zeros(model.d_theta)
    for i, z in enumerate(samples):
        total += hypergradient_estimate(theta, z, model, i).reshape(replicas, -1).sum(axis=0)
    return float(np.linalg.norm(total / (anchors.n * replicas)))


# ---------------------------------------------------------------------------
# Estimator diagnostics (bias / variance against their ceilings)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EstimatorDiagnostics:
    delta: float
    bias: float
    standard_error: float
    bias_ceiling: float
    variance: float
    sigma2: float
    variance_ceiling: float

    @property
    def bias_ok(self) -> bool:
        return self.bias <= self.bias_ceiling

    @property
    def variance_ok(self) -> bool:
        return self.variance <= self.variance_ceiling


def estimator_diagnostics(theta, anchors, hp, model, delta, lsi, samples, stream, reference_grad,
                          chain_tau=None, chain_steps=None, workers=1) -> EstimatorDiagnostics:
    """Measure bias and variance of the one-sample estimator at accuracy *delta*.

    The bias ceiling is L_f2 * delta plus three standard errors of the mean;
    the variance ceiling is the bound V with sigma^2 estimated from exact
    worst-case draws.
    """
    lsi = lsi or default_lsi(model, anchors, hp, theta)
    gen = stream.generator(STREAM_DIAGNOSTICS, 0)
    counts = np.bincount(gen.integers(0, anchors.n, samples), minlength=anchors.n)
    draws = worstcase_samples(theta, anchors, hp, model, lsi, delta, counts, stream,
                              STREAM_DIAGNOSTICS, chain_tau, chain_steps, workers)
    grads = np.vstack([
        hypergradient_estimate(theta, z, model, i).reshape(len(z), -1)
        for i, z in enumerate(draws) if len(z)
    ])
    mean = grads.mean(axis=0)
    centered = grads - mean
    variance = float(np.mean(np.sum(centered ** 2, axis=1)))
    se = math.sqrt(variance / samples)
    sigma2 = estimate_sigma2(theta, anchors, hp, model, samples, stream.generator(STREAM_DIAGNOSTICS, 1))
    L_f1 = model.L_f1 if model.L_f1 is not None else float(np.linalg.norm(grads, axis=1).max())
    L_f2 = model.L_f2 if model.L_f2 is not None else 0.0
    bias = float(np.linalg.norm(mean - np.asarray(reference_grad, dtype=np.float64)))
    return EstimatorDiagnostics(
        delta=delta, bias=bias, standard_error=se, bias_ceiling=L_f2 * delta + 3.0 * se,
        variance=variance, sigma2=sigma2,
        variance_ceiling=lemma34_variance_bound(sigma2, L_f1, L_f2, lsi.alpha, delta),
    )


def pilot_variance_bound(theta, anchors, hp, model, lsi, delta, stream, samples=PILOT_SAMPLES):
    """V from a pilot of exact worst-case draws (sigma^2) and the declared or observed L_f1, L_f2."""
    lsi = lsi or default_lsi(model, anchors, hp, theta)
    try:
        sigma2 = estimate_sigma2(theta, anchors, hp, model, samples, stream.generator(STREAM_DIAGNOSTICS, 2))
    except UnsupportedDimensionError:
        counts = np.bincount(stream.generator(STREAM_DIAGNOSTICS, 3).integers(0, anchors.n, samples),
                             minlength=anchors.n)
        draws = worstcase_samples(theta, anchors, hp, model, lsi, delta, counts, stream, STREAM_DIAGNOSTICS)
        grads = np.vstack([hypergradient_estimate(theta, z, model, i).reshape(len(z), -1)
                           for i, z in enumerate(draws) if len(z)])
        sigma2 = float(np.mean(np.sum((grads - grads.mean(axis=0)) ** 2, axis=1)))
    L_f1 = model.L_f1
    if L_f1 is None:
        grads = [model.grad_theta(theta, anchors.points[i], i) for i in range(anchors.n)]
        L_f1 = float(max(np.linalg.norm(g) for g in grads))
    L_f2 = model.L_f2 if model.L_f2 is not None else 1.0
    V = lemma34_variance_bound(sigma2, L_f1, L_f2, lsi.alpha, delta)
    logger.info("pilot: sigma^2=%.4g L_f1=%.4g L_f2=%.4g -> V=%.4g", sigma2, L_f1, L_f2, V)
    return V


# ---------------------------------------------------------------------------
# Solver
# ---------------------------------------------------------------------------

def run_double_loop(config, anchors, hp, model, lsi=None):
    """Outer SGD on theta with an inner Langevin chain per step. Returns (theta_hat, SolverTrace)."""
    if lsi is None and (config.varrho is not None or config.inner_tau is None):
        lsi = default_lsi(model, anchors, hp)
    stream = RandomStream(config.seed)
    theta = theta_array(config.theta0) if config.theta0 is not None else model.initial_theta().theta
    theta = np.array(theta, dtype=np.float64)
    theta0 = theta.copy()

    eta, T_out, delta = config.eta, config.T_out, config.delta
    if config.varrho is not None:
        L_f2 = model.L_f2 if model.L_f2 is not None else 1.0
        delta = config.varrho / (2.0 * L_f2)
        V = pilot_variance_bound(theta, anchors, hp, model, lsi, delta, stream)
        params = theorem35_params(config.varrho, V, L_f2, config.F_gap)
        if config.T_out is None:
            T_out, eta = params.T_out, params.eta
        else:
            T_out, eta = int(config.T_out), theorem35_eta(int(config.T_out), V)
        logger.info("stationarity target %.4g: T_out=%d (theorem %d) eta=%.4g delta=%.4g",
                    config.varrho, T_out, params.T_out, eta, delta)
    T_out = int(T_out)

    chains = [_chain_for(anchors, i, hp, model, lsi, delta, config.inner_tau, config.inner_steps, config.kl0)
              for i in range(anchors.n)]
    logger.info("double loop: n=%d T_out=%d eta=%.4g inner tau=%.4g steps=%d",
                anchors.n, T_out, eta, chains[0].tau, chains[0].T)

    recorder = TraceRecorder(model.d_theta)
    for k in range(T_out):
        i = int(stream.integers((STREAM_DOUBLE_LOOP, k), anchors.n))
        try:
            z = run_chains(chains[i], theta, hp, model, stream, tags=(STREAM_DOUBLE_LOOP_CHAIN, i, k))[0]
            grad = hypergradient_estimate(theta, z, model, i)
        except SdroError as exc:
            raise type(exc)(f"outer iteration {k}: {exc}") from exc
        theta = theta - eta * grad
        if not np.all(np.isfinite(theta)):
            raise DivergenceError(f"theta became non-finite at outer iteration {k}", step=k,
                                  hint="reduce eta")
        recorder.count(langevin_steps=chains[i].T, grad_evals=chains[i].T + 1)
        recorder.capture(k, float(np.linalg.norm(grad)), i, theta)
        if (k + 1) % LOG_EVERY == 0:
            logger.debug("outer %d/%d |grad|=%.4g theta[0]=%.6g", k + 1, T_out, np.linalg.norm(grad), theta[0])

    selected = int(stream.integers((STREAM_DOUBLE_LOOP_SELECT,), T_out))
    trace = recorder.finish(selected, theta0, meta={"solver": "sdro_double", "eta": eta, "T_out": T_out,
                                                   "delta": delta, "inner_tau": chains[0].tau,
                                                   "inner_steps": chains[0].T})
    logger.info("double loop done: theta_hat=%s (iterate %d) theta_last=%s",
                np.array2string(trace.theta_hat, precision=4), selected + 1,
                np.array2string(trace.theta_last, precision=4))
    return Decision(trace.theta_hat), trace
