"""Ground-truth computations: Gaussian worst cases, quadrature objective and hypergradient, W2 distances, variance bounds."""

import logging
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.special import logsumexp, softmax

from core_model import theta_array
from errors import ConfigError, EvaluationDomainError, NonNormalizableError, UnsupportedDimensionError
from langevin import LSI_GAUSSIAN, LsiEstimate, lsi_constant_lipschitz_loss
from losses import LinearLoss, QuadraticLoss
from settings import QUAD_MAX_DIM, QUAD_MIN_NODES, QUAD_NODES, QUAD_TRUNCATION

logger = logging.getLogger(__name__)

GAUSS_HERMITE = "gauss_hermite"
TRAPEZOID = "trapezoid"


@dataclass(frozen=True)
class GaussianDist:
    """Isotropic Gaussian N(mean, variance_scale * I)."""
    mean: np.ndarray
    variance_scale: float

    def __post_init__(self):
        object.__setattr__(self, "mean", np.atleast_1d(np.asarray(self.mean, dtype=np.float64)))
        if not self.variance_scale > 0:
            raise ValueError(f"variance_scale must be > 0, got {self.variance_scale}")

    @property
    def d(self) -> int:
        return self.mean.shape[0]

    def sample(self, gen, size) -> np.ndarray:
        return self.mean + math.sqrt(self.variance_scale) * gen.standard_normal((size, self.d))


@dataclass(frozen=True)
class QuadratureGrid:
    """Nodes and weights for expectations under the standard normal N(0, I_d).

    Expectations under N(x, eps I) use the nodes x + sqrt(eps) * u.
    """
    nodes: np.ndarray
    weights: np.ndarray
    kind: str

    @property
    def d(self) -> int:
        return self.nodes.shape[1]


def make_grid(d, kind=GAUSS_HERMITE, nodes=QUAD_NODES, truncation=QUAD_TRUNCATION) -> QuadratureGrid:
    """Tensor-product grid for N(0, I_d) with *nodes* points per axis (d <= 2)."""
    if d > QUAD_MAX_DIM:
        raise UnsupportedDimensionError(f"quadrature supports d <= {QUAD_MAX_DIM}, got d={d}")
    if nodes < QUAD_MIN_NODES:
        raise ValueError(f"quadrature needs at least {QUAD_MIN_NODES} nodes per axis, got {nodes}")
    if kind == GAUSS_HERMITE:
        t, w = hermgauss(nodes)
        u, w1 = math.sqrt(2.0) * t, w / math.sqrt(math.pi)
    elif kind == TRAPEZOID:
        u = np.linspace(-truncation, truncation, nodes)
        trap = np.full(nodes, u[1] - u[0])
        trap[[0, -1]] *= 0.5
        w1 = trap * np.exp(-0.5 * u ** 2) / math.sqrt(2.0 * math.pi)
    else:
        raise ValueError(f"unknown quadrature kind '{kind}'")
    keep = w1 > 0.0
    u, w1 = u[keep], w1[keep]
    if d == 1:
        return QuadratureGrid(u.reshape(-1, 1), w1, kind)
    uu, vv = np.meshgrid(u, u, indexing="ij")
    weights = np.outer(w1, w1).ravel()
    return QuadratureGrid(np.column_stack([uu.ravel(), vv.ravel()]), weights, kind)


# ---------------------------------------------------------------------------
# Closed-form worst cases
# ---------------------------------------------------------------------------

def gaussian_worstcase_linear(theta, anchor, hp) -> GaussianDist:
    """Worst case for f = theta . z: N(x + theta / lambda, eps I)."""
    anchor = np.atleast_1d(np.asarray(anchor, dtype=np.float64))
    t = theta_array(theta)
    if t.shape != anchor.shape:
        raise ValueError(f"theta shape {t.shape} does not match anchor shape {anchor.shape}")
    return GaussianDist(anchor + t / hp.lam, hp.epsilon)


def gaussian_worstcase_quadratic(c, anchor, hp) -> GaussianDist:
    """Worst case for f = (c/2)|z|^2: N(lambda x / (lambda - c), lambda eps / (lambda - c) I)."""
    if not c < hp.lam:
        raise NonNormalizableError(f"worst-case density is not normalizable for c={c} >= lambda={hp.lam}")
    anchor = np.atleast_1d(np.asarray(anchor, dtype=np.float64))
    ratio = hp.lam / (hp.lam - c)
    return GaussianDist(ratio * anchor, ratio * hp.epsilon)


def closed_form_worstcase(model, theta, anchor, hp):
    """Closed-form worst case when the model admits one, else None."""
    if isinstance(model, LinearLoss):
        return gaussian_worstcase_linear(theta, anchor, hp)
    if isinstance(model, QuadraticLoss):
        return gaussian_worstcase_quadratic(model.c, anchor, hp)
    return None


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

def _check_dim(anchors, grid):
    if anchors.d > QUAD_MAX_DIM:
        raise UnsupportedDimensionError(f"quadrature supports d <= {QUAD_MAX_DIM}, got d={anchors.d}")
    if grid.d != anchors.d:
        raise ValueError(f"grid dimension {grid.d} does not match anchor dimension {anchors.d}")


def _tilted_log_weights(theta, anchor, anchor_index, hp, model, grid):
    """Grid points z and log(w * exp(f(z) / (lambda eps))) for one anchor."""
    z = anchor + math.sqrt(hp.epsilon) * grid.nodes
    f = np.asarray(model.value(theta, z, anchor_index), dtype=np.float64)
    if not np.all(np.isfinite(f)):
        raise EvaluationDomainError("loss is non-finite on the quadrature grid")
    return z, np.log(grid.weights) + f / hp.scale


def dual_objective_quadrature(theta, anchors, hp, model, grid) -> float:
    """(lambda eps / n) * sum_i log E_{z ~ N(x_i, eps I)} exp(f(z) / (lambda eps)), in log domain.

    Defined up to a theta-independent constant; compare differences, not levels.
    """
    _check_dim(anchors, grid)
    total = 0.0
    for i in range(anchors.n):
        _, logw = _tilted_log_weights(theta, anchors.points[i], i, hp, model, grid)
        total += logsumexp(logw)
    return hp.scale * total / anchors.n


def true_hypergradient_quadrature(theta, anchors, hp, model, grid) -> np.ndarray:
    """(1/n) sum_i E_{z ~ mu*_i}[grad_theta f(z)], mu*_i normalized on the grid."""
    _check_dim(anchors, grid)
    grad = np.zeros(model.d_theta)
    for i in range(anchors.n):
        z, logw = _tilted_log_weights(theta, anchors.points[i], i, hp, model, grid)
        probs = softmax(logw)
        grad += probs @ np.asarray(model.grad_theta(theta, z, i), dtype=np.float64).reshape(len(probs), -1)
    return grad / anchors.n


def worstcase_density_on_grid(theta, anchor, hp, model, grid, anchor_index=0):
    """Normalized worst-case density on the grid.

    Returns (points, probabilities, cell_volumes): probabilities sum to one;
    for trapezoid grids probabilities / cell_volumes is the density in z, and
    cell_volumes is None for Gauss-Hermite grids.
    """
    anchor = np.atleast_1d(np.asarray(anchor, dtype=np.float64))
    z, logw = _tilted_log_weights(theta, anchor, anchor_index, hp, model, grid)
    probs = softmax(logw)
    cells = None
    if grid.kind == TRAPEZOID:
        phi = np.exp(-0.5 * np.sum(grid.nodes ** 2, axis=1)) / (2.0 * math.pi) ** (grid.d / 2)
        cells = grid.weights / phi * hp.epsilon ** (grid.d / 2)
    return z, probs, cells


def grid_moments(points, probs):
    """Mean vector and isotropic variance scale (mean per-coordinate variance) of a discrete law."""
    mean = probs @ points
    centered = points - mean
    return mean, float(probs @ np.sum(centered ** 2, axis=1)) / points.shape[1]


# ---------------------------------------------------------------------------
# Distances
# ---------------------------------------------------------------------------

def gaussian_w2(a: GaussianDist, b: GaussianDist) -> float:
    """W2 between isotropic Gaussians: sqrt(|mu_a - mu_b|^2 + d (sqrt(v_a) - sqrt(v_b))^2)."""
    if a.d != b.d:
        raise ValueError(f"dimension mismatch: {a.d} vs {b.d}")
    shift = float(np.sum((a.mean - b.mean) ** 2))
    spread = a.d * (math.sqrt(a.variance_scale) - math.sqrt(b.variance_scale)) ** 2
    return math.sqrt(shift + spread)


def empirical_w2_1d(samples_a, samples_b) -> float:
    """W2 between equal-size 1-D empirical laws via the sorted (quantile) coupling."""
    a = np.sort(np.asarray(samples_a, dtype=np.float64).ravel())
    b = np.sort(np.asarray(samples_b, dtype=np.float64).ravel())
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"sample sizes differ: {a.shape[0]} vs {b.shape[0]}")
    if a.shape[0] == 0:
        raise ValueError("empirical_w2_1d needs nonempty samples")
    return float(np.sqrt(np.mean((a - b) ** 2)))


# ---------------------------------------------------------------------------
# Estimator-variance diagnostics
# ---------------------------------------------------------------------------

def gaussian_lsi(dist: GaussianDist) -> LsiEstimate:
    """Exact LSI constant of an isotropic Gaussian: one over its variance."""
    return LsiEstimate(1.0 / dist.variance_scale, LSI_GAUSSIAN)


def default_lsi(model, anchors, hp, theta=None) -> LsiEstimate:
    """LSI constant when none is supplied.

    Closed-form losses get the exact Gaussian constant. Other losses get the
    bounded-z-gradient constant with M = model.grad_z_bound(theta), where
    theta=None asks for a bound over the whole declared theta region.
    """
    closed = closed_form_worstcase(model, np.zeros(model.d_theta), anchors.points[0], hp)
    if closed is not None:
        return gaussian_lsi(closed)
    M = model.grad_z_bound(theta)
    if M is None:
        where = "over the theta region" if theta is None else "at this theta"
        raise ConfigError(f"no z-gradient bound for the {model.kind} loss {where}; set [hyper] lsi_alpha")
    return lsi_constant_lipschitz_loss(M, hp, anchors.d)


def lemma34_variance_bound(sigma2, L_f1, L_f2, alpha, delta) -> float:
    """V = 2 sigma^2 + 2 L_f1^2 sqrt(alpha) delta + 2 L_f2^2 delta^2."""
    if min(sigma2, L_f1, L_f2, alpha, delta) < 0:
        raise ValueError("lemma34_variance_bound needs nonnegative arguments")
    return 2.0 * sigma2 + 2.0 * L_f1 ** 2 * math.sqrt(alpha) * delta + 2.0 * L_f2 ** 2 * delta ** 2


def sample_worstcase(model, theta, anchor, hp, size, gen, anchor_index=0, grid=None):
    """Exact draws from the worst-case law: closed form when available, else categorical on a grid."""
    closed = closed_form_worstcase(model, theta, anchor, hp)
    if closed is not None:
        return closed.sample(gen, size)
    anchor = np.atleast_1d(np.asarray(anchor, dtype=np.float64))
    grid = grid if grid is not None else make_grid(anchor.shape[0], TRAPEZOID)
    z, probs, _ = worstcase_density_on_grid(theta, anchor, hp, model, grid, anchor_index)
    return z[gen.choice(len(probs), size=size, p=probs)]


def estimate_sigma2(theta, anchors, hp, model, samples, gen) -> float:
    """Trace variance of grad_theta f at (i, z) with i uniform and z from the exact worst case."""
    idx = np.sort(gen.integers(0, anchors.n, samples))
    grads = []
    for i in np.unique(idx):
        count = int(np.sum(idx == i))
        z = sample_worstcase(model, theta, anchors.points[i], hp, count, gen, anchor_index=i)
        grads.append(np.asarray(model.grad_theta(theta, z, i)).reshape(count, -1))
    grads = np.vstack(grads)
    centered = grads - grads.mean(axis=0)
    sigma2 = float(np.mean(np.sum(centered ** 2, axis=1)))
    logger.debug("sigma^2 estimate %.6g from %d exact samples", sigma2, samples)
    return sigma2
