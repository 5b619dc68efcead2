"""Baseline trainers: empirical risk minimization and the soft-constrained Wasserstein DRO limit."""

import logging

import numpy as np

from core_model import Decision, theta_array
from errors import DivergenceError
from settings import LOG_EVERY, STREAM_BASELINE, WDRO_ASCENT_RATE, WDRO_INNER_STEPS
from utils import as_batch

logger = logging.getLogger(__name__)

_ERM, _WDRO = 0, 1


def _start(model, theta0):
    theta = theta_array(theta0) if theta0 is not None else model.initial_theta().theta
    return np.array(theta, dtype=np.float64)


def train_erm(train, model, steps, eta, stream, theta0=None) -> Decision:
    """Plain SGD on (1/n) sum_i f_theta(x_i), one uniformly drawn anchor per step."""
    theta = _start(model, theta0)
    if steps <= 0:
        return Decision(theta)
    picks = stream.integers((STREAM_BASELINE, _ERM), train.n, steps)
    for k, i in enumerate(picks):
        theta = theta - eta * np.asarray(model.grad_theta(theta, train.points[i], int(i)))
        if not np.all(np.isfinite(theta)):
            raise DivergenceError(f"ERM theta became non-finite at step {k}", step=k, hint="reduce eta")
        if (k + 1) % LOG_EVERY == 0:
            logger.debug("erm step %d/%d", k + 1, steps)
    logger.info("erm done after %d steps: |theta|=%.4g", steps, np.linalg.norm(theta))
    return Decision(theta)


def wdro_inner_maximize(theta, anchor, hp_lambda, model, steps=WDRO_INNER_STEPS,
                        ascent_rate=WDRO_ASCENT_RATE, anchor_index=0) -> np.ndarray:
    """Gradient ascent on z -> f_theta(z) - (lambda/2)|z - x|^2 started at x; no noise.

    *anchor* may be a single point or an (m, d) batch with matching anchor_index.
    """
    x, single = as_batch(anchor)
    z = x.copy()
    for t in range(steps):
        grad = np.asarray(model.grad_z(theta, z, anchor_index), dtype=np.float64).reshape(z.shape)
        z = z + ascent_rate * (grad - hp_lambda * (z - x))
        if not np.all(np.isfinite(z)):
            raise DivergenceError(f"WDRO inner ascent became non-finite at step {t}", step=t,
                                  hint="increase lambda or lower the ascent rate")
    return z[0] if single else z


def run_wdro_baseline(train, hp_lambda, model, steps, eta, inner_steps, stream,
                      ascent_rate=WDRO_ASCENT_RATE, theta0=None) -> Decision:
    """SGD on the soft-constrained Wasserstein DRO dual: theta -= eta * grad_theta f(z*) with z* the inner maximizer."""
    theta = _start(model, theta0)
    if steps <= 0:
        return Decision(theta)
    picks = stream.integers((STREAM_BASELINE, _WDRO), train.n, steps)
    for k, i in enumerate(picks):
        i = int(i)
        z = wdro_inner_maximize(theta, train.points[i], hp_lambda, model, inner_steps, ascent_rate, i)
        theta = theta - eta * np.asarray(model.grad_theta(theta, z, i))
        if not np.all(np.isfinite(theta)):
            raise DivergenceError(f"WDRO theta became non-finite at step {k}", step=k, hint="reduce eta")
        if (k + 1) % LOG_EVERY == 0:
            logger.debug("wdro step %d/%d", k + 1, steps)
    logger.info("wdro done after %d steps (lambda=%.4g, %d ascent steps): |theta|=%.4g",
                steps, hp_lambda, inner_steps, np.linalg.norm(theta))
    return Decision(theta)
