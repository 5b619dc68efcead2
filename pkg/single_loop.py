"""Single-loop solver: particle banks advanced one Langevin step per iteration, with momentum-averaged theta updates."""

import logging
import math
from dataclasses import dataclass

import numpy as np

from core_model import Decision, RandomStream, theta_array
from errors import ConfigError, DegenerateInputError, DivergenceError, SdroError
from oracles import default_lsi
from particles import init_bank, update_bank
from settings import (
    DEFAULT_BETA0, DEFAULT_F_GAP, DEFAULT_PARTICLES, LOG_EVERY,
    STREAM_SINGLE_LOOP_BATCH, STREAM_SINGLE_LOOP_SELECT,
)
from solver_trace import TraceRecorder

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SingleLoopConfig:
    """Langevin step tau, upper step eta (theta moves by tau * eta * r), momentum beta0, batch size, M and T.

    With *varrho* set, beta0, tau and eta come from theorem45_params and T
    defaults to its T_min; an explicit T caps the run.
    """
    tau: float = 0.05
    eta: float = 0.4
    beta0: float = DEFAULT_BETA0
    batch: int = 1
    M: int = DEFAULT_PARTICLES
    T: int | None = 1000
    seed: int = 0
    varrho: float | None = None
    F_gap: float = DEFAULT_F_GAP
    theta0: np.ndarray | None = None

    def __post_init__(self):
        if int(self.batch) < 1:
            raise ConfigError(f"batch must be >= 1, got {self.batch}")
        if int(self.M) < 1:
            raise ConfigError(f"particle count M must be >= 1, got {self.M}")
        if self.varrho is not None:
            if not self.varrho > 0:
                raise ConfigError(f"varrho must be > 0, got {self.varrho}")
            return
        if not self.tau > 0:
            raise ConfigError(f"tau must be > 0, got {self.tau}")
        if not self.eta >= 0:
            raise ConfigError(f"eta must be >= 0, got {self.eta}")
        if not 0.0 < self.beta0 <= 1.0:
            raise ConfigError(f"beta0 must lie in (0, 1], got {self.beta0}")
        if self.T is None or int(self.T) < 1:
            raise ConfigError(f"T must be >= 1, got {self.T}")


@dataclass(frozen=True)
class MomentumState:
    """Momentum average r and the last raw estimate v."""
    r: np.ndarray
    v: np.ndarray

    @classmethod
    def zeros(cls, dim):
        return cls(np.zeros(dim), np.zeros(dim))


@dataclass(frozen=True)
class Theorem45Params:
    beta0: float
    tau: float
    eta: float
    T_min: int
    L_G2: float


def gradient_estimator(bank, batch_indices, theta, model) -> np.ndarray:
    """Average of grad_theta f over every particle of the batch anchors."""
    idx = np.unique(np.asarray(list(batch_indices), dtype=np.int64))
    if idx.size == 0:
        raise DegenerateInputError("gradient_estimator needs a nonempty batch")
    z = bank.particles[idx].reshape(-1, bank.d)
    owner = np.repeat(idx, bank.M)
    grads = np.asarray(model.grad_theta(theta, z, owner), dtype=np.float64).reshape(z.shape[0], -1)
    return grads.mean(axis=0)


def momentum_update(state, v_new, beta0) -> MomentumState:
    """r' = (1 - beta0) r + beta0 v_new."""
    if not 0.0 < beta0 <= 1.0:
        raise ConfigError(f"beta0 must lie in (0, 1], got {beta0}")
    v_new = np.asarray(v_new, dtype=np.float64)
    if beta0 == 1.0:
        return MomentumState(v_new.copy(), v_new.copy())
    return MomentumState((1.0 - beta0) * state.r + beta0 * v_new, v_new.copy())


def theorem45_params(varrho, lam, epsilon, alpha, L_f1, L_f2, d, n, batch,
                     F_gap=DEFAULT_F_GAP, g0=None, K0=None) -> Theorem45Params:
    """Step sizes at their upper bounds and the iteration count for a varrho-stationary output.

    beta0 = varrho^2 |I| / (6 L_f2^2), capped at 1
    tau   = varrho^2 alpha / (384 eps d L_G2^2 L_f1^2), L_G2 = 1 + L_f2 / lambda
    eta   = min(varrho^2 lambda eps alpha |I| / (144 L_f1^2 L_f2^2 n), lambda eps alpha |I| / (160 L_f2^2 n))
    T_min = ceil(max(12 F_gap / (eta tau varrho^2), 6 g0 / (beta0 varrho^2), 48 L_f2^2 K0 / (alpha tau |I| varrho^2)))

    g0 (initial momentum error) defaults to L_f1^2 and K0 (initial KL budget) to n d.
    """
    if min(varrho, lam, epsilon, alpha, L_f1, L_f2, F_gap) <= 0 or min(d, n, batch) < 1:
        raise ConfigError("theorem45_params needs positive constants")
    if batch > n:
        raise ConfigError(f"batch {batch} exceeds the number of anchors {n}")
    rho2 = varrho ** 2
    L_G2 = 1.0 + L_f2 / lam
    beta0 = min(1.0, rho2 * batch / (6.0 * L_f2 ** 2))
    tau = rho2 * alpha / (384.0 * epsilon * d * L_G2 ** 2 * L_f1 ** 2)
    eta = min(rho2 * lam * epsilon * alpha * batch / (144.0 * L_f1 ** 2 * L_f2 ** 2 * n),
              lam * epsilon * alpha * batch / (160.0 * L_f2 ** 2 * n))
    g0 = L_f1 ** 2 if g0 is None else g0
    K0 = float(n * d) if K0 is None else K0
    T_min = math.ceil(max(12.0 * F_gap / (eta * tau * rho2),
                          6.0 * g0 / (beta0 * rho2),
                          48.0 * L_f2 ** 2 * K0 / (alpha * tau * batch * rho2)))
    return Theorem45Params(beta0=beta0, tau=tau, eta=eta, T_min=max(1, T_min), L_G2=L_G2)


def _resolve_steps(config, anchors, hp, model, lsi):
    if config.varrho is None:
        return config.tau, config.eta, config.beta0, int(config.T)
    L_f1 = model.L_f1 if model.L_f1 else 1.0
    L_f2 = model.L_f2 if model.L_f2 else 1.0
    lsi = lsi or default_lsi(model, anchors, hp)
    params = theorem45_params(config.varrho, hp.lam, hp.epsilon, lsi.alpha, L_f1, L_f2,
                              anchors.d, anchors.n, int(config.batch), F_gap=config.F_gap)
    T = params.T_min if config.T is None else int(config.T)
    logger.info("stationarity target %.4g: beta0=%.4g tau=%.4g eta=%.4g T=%d (theorem %d)",
                config.varrho, params.beta0, params.tau, params.eta, T, params.T_min)
    return params.tau, params.eta, params.beta0, T


def run_single_loop(config, anchors, hp, model, stream=None, lsi=None):
    """Run the single-loop solver. Returns (theta_hat, final ParticleBank, SolverTrace).

    Each iteration samples a batch without replacement, forms the estimator
    from the bank as it stood before this iteration, advances the batch rows
    one Langevin step at the current theta, then moves theta by tau * eta * r.
    """
    if int(config.batch) > anchors.n:
        raise ConfigError(f"batch {config.batch} exceeds the number of anchors {anchors.n}")
    stream = stream if stream is not None else RandomStream(config.seed)
    tau, eta, beta0, T = _resolve_steps(config, anchors, hp, model, lsi)
    batch = int(config.batch)

    theta = theta_array(config.theta0) if config.theta0 is not None else model.initial_theta().theta
    theta = np.array(theta, dtype=np.float64)
    theta0 = theta.copy()
    bank = init_bank(anchors, int(config.M), hp, stream)
    state = MomentumState.zeros(model.d_theta)
    logger.info("single loop: n=%d M=%d batch=%d T=%d tau=%.4g eta=%.4g beta0=%.4g",
                anchors.n, bank.M, batch, T, tau, eta, beta0)

    recorder = TraceRecorder(model.d_theta, momentum=True)
    for k in range(T):
        idx = stream.choice((STREAM_SINGLE_LOOP_BATCH, k), anchors.n, batch)
        try:
            v = gradient_estimator(bank, idx, theta, model)
            bank = update_bank(bank, idx, theta, anchors, hp, model, tau, stream, iteration=k)
        except SdroError as exc:
            raise type(exc)(f"iteration {k}: {exc}") from exc
        state = momentum_update(state, v, beta0)
        theta = theta - tau * eta * state.r
        if not np.all(np.isfinite(theta)):
            raise DivergenceError(f"theta became non-finite at iteration {k}", step=k,
                                  hint="reduce tau or eta")
        recorder.count(langevin_steps=batch * bank.M, grad_evals=2 * batch * bank.M)
        recorder.capture(k, float(np.linalg.norm(v)), int(idx[0]), theta,
                         r_norm=float(np.linalg.norm(state.r)), v_norm=float(np.linalg.norm(v)),
                         batch_size=batch)
        if (k + 1) % LOG_EVERY == 0:
            logger.debug("iter %d/%d |r|=%.4g theta[0]=%.6g", k + 1, T, np.linalg.norm(state.r), theta[0])

    selected = int(stream.integers((STREAM_SINGLE_LOOP_SELECT,), T))
    trace = recorder.finish(selected, theta0, meta={"solver": "sdro_single", "tau": tau, "eta": eta,
                                                   "beta0": beta0, "T": T, "M": bank.M, "batch": batch})
    logger.info("single loop done: theta_hat=%s (iterate %d) theta_last=%s",
                np.array2string(trace.theta_hat, precision=4), selected + 1,
                np.array2string(trace.theta_last, precision=4))
    return Decision(trace.theta_hat), bank, trace
