"""Gradient verification: central finite differences and empirical Lipschitz probes for loss models."""

import logging
from dataclasses import dataclass

import numpy as np

from core_model import theta_array
from errors import DegenerateInputError, EvaluationDomainError
from settings import FD_ABS_FLOOR, FD_STEP, STREAM_PROBE

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GradientReport:
    max_rel_err_theta: float
    max_rel_err_z: float

    @property
    def max_rel_err(self) -> float:
        return max(self.max_rel_err_theta, self.max_rel_err_z)

    def passes(self, tol) -> bool:
        return self.max_rel_err <= tol


@dataclass(frozen=True)
class SmoothnessEstimate:
    L_f1_hat: float
    L_f2_hat: float
    pairs_used: int


def _rel_err(analytic, numeric):
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), FD_ABS_FLOOR)
    err = np.abs(analytic - numeric) / denom
    return float(err.max()) if err.size else 0.0


def _value(model, theta, z, anchor_index):
    v = float(np.asarray(model.value(theta, z, anchor_index)).reshape(-1)[0])
    if not np.isfinite(v):
        raise EvaluationDomainError(f"loss value is non-finite at the probe point ({v})")
    return v


def _central_differences(fn, x, h):
    grad = np.empty_like(x)
    for j in range(x.shape[0]):
        step = np.zeros_like(x)
        step[j] = h
        grad[j] = (fn(x + step) - fn(x - step)) / (2.0 * h)
    return grad


def check_gradients(model, theta, z, h=FD_STEP, anchor_index=0) -> GradientReport:
    """Compare analytic gradients at (theta, z) with central differences of step *h*, coordinate-wise."""
    if not h > 0:
        raise ValueError(f"finite-difference step must be > 0, got {h}")
    th = theta_array(theta).copy()
    zz = np.atleast_1d(np.asarray(z, dtype=np.float64)).copy()
    _value(model, th, zz, anchor_index)

    fd_theta = _central_differences(lambda t: _value(model, t, zz, anchor_index), th, h)
    fd_z = _central_differences(lambda p: _value(model, th, p, anchor_index), zz, h)
    g_theta = np.asarray(model.grad_theta(th, zz, anchor_index), dtype=np.float64).reshape(-1)
    g_z = np.asarray(model.grad_z(th, zz, anchor_index), dtype=np.float64).reshape(-1)
    return GradientReport(_rel_err(g_theta, fd_theta), _rel_err(g_z, fd_z))


def _ball(gen, dim, radius):
    """Uniform draw from the closed Euclidean ball of *radius* in R^dim."""
    direction = gen.standard_normal(dim)
    norm = np.linalg.norm(direction)
    if norm == 0.0 or radius == 0.0:
        return np.zeros(dim)
    return direction / norm * radius * gen.uniform() ** (1.0 / dim)


def _full_gradient(model, theta, z, anchor_index):
    g_theta = np.asarray(model.grad_theta(theta, z, anchor_index)).reshape(-1)
    g_z = np.asarray(model.grad_z(theta, z, anchor_index)).reshape(-1)
    return g_theta, np.concatenate([g_theta, g_z])


def smoothness_probe(model, pair_count, stream, z_radius=1.0, theta_radius=1.0,
                     z_center=None, anchor_index=0) -> SmoothnessEstimate:
    """Empirical lower bounds on L_f1 (max |grad_theta|) and L_f2 (max gradient-difference ratio).

    Even-numbered pairs share theta and differ in z; odd-numbered pairs share z
    and differ in theta. Probes are uniform in balls of the given radii.
    """
    if pair_count < 2:
        raise ValueError(f"pair_count must be >= 2, got {pair_count}")
    center = np.zeros(model.d) if z_center is None else np.asarray(z_center, dtype=np.float64)
    l1 = 0.0
    l2 = 0.0
    used = 0
    for k in range(pair_count):
        gen = stream.generator(STREAM_PROBE, k)
        theta_a = _ball(gen, model.d_theta, theta_radius)
        z_a = center + _ball(gen, model.d, z_radius)
        if k % 2 == 0:
            theta_b, z_b = theta_a, center + _ball(gen, model.d, z_radius)
            gap = np.linalg.norm(z_a - z_b)
        else:
            theta_b, z_b = _ball(gen, model.d_theta, theta_radius), z_a
            gap = np.linalg.norm(theta_a - theta_b)
        gt_a, full_a = _full_gradient(model, theta_a, z_a, anchor_index)
        gt_b, full_b = _full_gradient(model, theta_b, z_b, anchor_index)
        l1 = max(l1, float(np.linalg.norm(gt_a)), float(np.linalg.norm(gt_b)))
        if gap == 0.0:
            continue
        used += 1
        l2 = max(l2, float(np.linalg.norm(full_a - full_b) / gap))
    if used == 0:
        raise DegenerateInputError("every probe pair coincided; widen the probe radii")
    logger.debug("smoothness probe: L_f1_hat=%.6g L_f2_hat=%.6g over %d pairs", l1, l2, used)
    return SmoothnessEstimate(l1, l2, used)
