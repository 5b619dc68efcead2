"""Langevin sampling of the per-anchor worst-case density, with the step-size, iteration-count and LSI formulas."""

import logging
import math
from dataclasses import dataclass

import numpy as np

from core_model import theta_array
from errors import ConfigError
from settings import INITIAL_ANCHOR_GAUSSIAN, INITIAL_CUSTOM, STREAM_SAMPLER
from utils import as_batch, require_finite

logger = logging.getLogger(__name__)

# Floats of Gaussian noise drawn per tagged block when running many chains at once.
NOISE_BLOCK = 1 << 20

LSI_BOUNDED_LOSS = "bounded_loss"
LSI_LIPSCHITZ_GRADIENT = "lipschitz_gradient"
LSI_USER_SUPPLIED = "user_supplied"
LSI_GAUSSIAN = "gaussian_closed_form"


@dataclass(frozen=True)
class SamplerConfig:
    """Step size tau, iteration count T and initial law mu_0 for one anchor.

    *initial* is "anchor_gaussian" (N(x, eps I)) or "custom", in which case
    mu_0 = N(initial_mean, initial_scale * I). *deterministic* suppresses every
    noise draw, leaving only the drift.
    """
    tau: float
    T: int
    anchor: np.ndarray
    anchor_index: int = 0
    initial: str = INITIAL_ANCHOR_GAUSSIAN
    initial_mean: np.ndarray | None = None
    initial_scale: float = 0.0
    deterministic: bool = False

    def __post_init__(self):
        if not self.tau > 0:
            raise ConfigError(f"tau must be > 0, got {self.tau}")
        if int(self.T) < 1:
            raise ConfigError(f"T must be >= 1, got {self.T}")
        object.__setattr__(self, "T", int(self.T))
        object.__setattr__(self, "anchor", np.atleast_1d(np.asarray(self.anchor, dtype=np.float64)))
        if self.initial not in (INITIAL_ANCHOR_GAUSSIAN, INITIAL_CUSTOM):
            raise ConfigError(f"unknown initial distribution '{self.initial}'")
        if self.initial == INITIAL_CUSTOM:
            if self.initial_mean is None:
                raise ConfigError("custom initial distribution needs initial_mean")
            if self.initial_scale < 0:
                raise ConfigError(f"initial_scale must be >= 0, got {self.initial_scale}")


@dataclass(frozen=True)
class LsiEstimate:
    """Log-Sobolev constant alpha of the worst-case density, with where it came from."""
    alpha: float
    provenance: str = LSI_USER_SUPPLIED

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and self.alpha > 0):
            raise ConfigError(f"LSI constant must be > 0, got {self.alpha}")


# ---------------------------------------------------------------------------
# One step and whole chains
# ---------------------------------------------------------------------------

def langevin_step(z, theta, anchor, hp, model, tau, noise=None, anchor_index=0):
    """z' = z - tau * (-grad_z f(z) / lambda + (z - x)) + sqrt(2 tau eps) * noise.

    *z* and *noise* may be single points or (m, d) batches; noise=None is the
    deterministic mode. The result is returned as computed, never clipped.
    """
    zb, single = as_batch(z)
    grad = np.asarray(model.grad_z(theta, zb, anchor_index), dtype=np.float64).reshape(zb.shape)
    require_finite(grad, "z-gradient in Langevin step")
    drift = -grad / hp.lam + (zb - np.asarray(anchor, dtype=np.float64))
    out = zb - tau * drift
    if noise is not None:
        out = out + math.sqrt(2.0 * tau * hp.epsilon) * np.asarray(noise, dtype=np.float64).reshape(zb.shape)
    require_finite(out, "Langevin iterate")
    return out[0] if single else out


def _initial_draw(config, hp, noise):
    if config.initial == INITIAL_CUSTOM:
        mean, scale = np.asarray(config.initial_mean, dtype=np.float64), config.initial_scale
    else:
        mean, scale = config.anchor, hp.epsilon
    if config.deterministic:
        return np.broadcast_to(mean, noise.shape).copy()
    return mean + math.sqrt(scale) * noise


def run_chains(config, theta, hp, model, stream, replicas=1, tags=None):
    """Run *replicas* independent chains for one anchor, vectorized. Returns the (replicas, d) final states.

    Noise for replica r is row r of blocks keyed by tags + (block,), where
    tags defaults to (sampler module, anchor index). Block 0 is the initial
    draw; blocks 1.. hold consecutive runs of step noise.
    """
    d = config.anchor.shape[0]
    theta = theta_array(theta)
    prefix = tuple(tags) if tags is not None else (STREAM_SAMPLER, config.anchor_index)
    z = _initial_draw(config, hp, stream.normal(prefix + (0,), (replicas, d)))
    steps_per_block = max(1, NOISE_BLOCK // (replicas * d))
    block = None
    for t in range(config.T):
        noise = None
        if not config.deterministic:
            if t % steps_per_block == 0:
                rows = min(steps_per_block, config.T - t)
                block = stream.normal(prefix + (1 + t // steps_per_block,), (rows, replicas, d))
            noise = block[t % steps_per_block]
        z = langevin_step(z, theta, config.anchor, hp, model, config.tau, noise, config.anchor_index)
    return z


def run_chain(config, theta, hp, model, stream, tags=None):
    """Langevin sampler: T steps from a draw of mu_0. Returns the final state z_T."""
    return run_chains(config, theta, hp, model, stream, replicas=1, tags=tags)[0]


# ---------------------------------------------------------------------------
# Parameter formulas
# ---------------------------------------------------------------------------

def theorem_step_size(alpha, hp, L_f2, delta, d):
    """tau = alpha eps / (4 (1 + L_f2/lambda)^2) * min{1, delta^2 alpha / (8 d)}."""
    if alpha <= 0 or delta <= 0 or d < 1 or L_f2 < 0:
        raise ConfigError("theorem_step_size needs alpha, delta > 0, L_f2 >= 0 and d >= 1")
    base = alpha * hp.epsilon / (4.0 * (1.0 + L_f2 / hp.lam) ** 2)
    return base * min(1.0, delta ** 2 * alpha / (8.0 * d))


def theorem_iteration_count(alpha, tau, epsilon, kl0, delta):
    """T = ceil(log(4 KL0 / (delta^2 alpha)) / (alpha tau eps)); 1 when the log argument is <= 1."""
    if kl0 <= 0:
        raise ConfigError(f"kl0 must be > 0, got {kl0}")
    ratio = 4.0 * kl0 / (delta ** 2 * alpha)
    if ratio <= 1.0:
        return 1
    return max(1, math.ceil(math.log(ratio) / (alpha * tau * epsilon)))


def lsi_constant_bounded_loss(B, hp) -> LsiEstimate:
    """alpha = exp(-4B / (lambda eps)) / eps for a loss with oscillation below B."""
    if B < 0:
        raise ConfigError(f"B must be >= 0, got {B}")
    return LsiEstimate(math.exp(-4.0 * B / hp.scale) / hp.epsilon, LSI_BOUNDED_LOSS)


def lsi_constant_lipschitz_loss(M, hp, d) -> LsiEstimate:
    """LSI constant for a loss whose z-gradient norm is bounded by M (dimension d)."""
    if M < 0 or d < 1:
        raise ConfigError("lsi_constant_lipschitz_loss needs M >= 0 and d >= 1")
    ratio2 = (M / hp.lam) ** 2
    first = math.exp(-4.0 * ratio2 * math.sqrt(2.0 * d / math.pi))
    second = 1.0 / (4.0 + (M / hp.lam + math.sqrt(2.0)) ** 2 * (2.0 + d + 4.0 * ratio2)
                    * math.exp(ratio2 / 2.0))
    return LsiEstimate(max(first, second) / (2.0 * hp.epsilon), LSI_LIPSCHITZ_GRADIENT)


def theorem_chain_config(anchor, anchor_index, hp, model, lsi, delta, kl0=None):
    """SamplerConfig with tau and T from the theorem formulas at W2 accuracy *delta*.

    kl0 defaults to the dimension d; L_f2 comes from the model (0 when undeclared).
    """
    anchor = np.atleast_1d(np.asarray(anchor, dtype=np.float64))
    d = anchor.shape[0]
    L_f2 = model.L_f2 if model.L_f2 is not None else 0.0
    tau = theorem_step_size(lsi.alpha, hp, L_f2, delta, d)
    T = theorem_iteration_count(lsi.alpha, tau, hp.epsilon, float(kl0 if kl0 is not None else d), delta)
    logger.debug("theorem chain parameters: tau=%.6g T=%d (delta=%.4g alpha=%.4g)", tau, T, delta, lsi.alpha)
    return SamplerConfig(tau=tau, T=T, anchor=anchor, anchor_index=anchor_index)
