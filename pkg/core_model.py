"""Shared mathematical objects: hyperparameters, decisions, anchors, the loss-model interface, random streams."""

import os
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from errors import ConfigError, EvaluationDomainError
from settings import FLOAT_FORMAT


# ---------------------------------------------------------------------------
# Hyperparameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HyperParams:
    """Penalty weight lambda and entropic regularization epsilon of the penalized objective."""
    lam: float
    epsilon: float

    def __post_init__(self):
        if not (np.isfinite(self.lam) and self.lam > 0):
            raise ConfigError(f"lambda must be > 0, got {self.lam}")
        if not (np.isfinite(self.epsilon) and self.epsilon > 0):
            raise ConfigError(f"epsilon must be > 0, got {self.epsilon}")
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "epsilon", float(self.epsilon))

    @property
    def scale(self) -> float:
        """lambda * epsilon, the temperature of the worst-case Gibbs density."""
        return self.lam * self.epsilon


# ---------------------------------------------------------------------------
# Decision vector
# ---------------------------------------------------------------------------

def _frozen(arr):
    arr = np.array(arr, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Decision:
    """Model parameters theta in R^{d_theta}. Entries are always finite."""
    theta: np.ndarray

    def __post_init__(self):
        theta = _frozen(np.atleast_1d(self.theta))
        if theta.ndim != 1:
            raise ValueError(f"theta must be one-dimensional, got shape {theta.shape}")
        if not np.all(np.isfinite(theta)):
            raise EvaluationDomainError("theta has non-finite entries")
        object.__setattr__(self, "theta", theta)

    @classmethod
    def zeros(cls, dim):
        return cls(np.zeros(dim))

    @property
    def dim(self) -> int:
        return self.theta.shape[0]

    def __eq__(self, other):
        return isinstance(other, Decision) and np.array_equal(self.theta, other.theta)

    def __hash__(self):
        return hash(self.theta.tobytes())


def theta_array(theta) -> np.ndarray:
    """Accept a Decision or anything array-like and return the raw parameter vector."""
    if isinstance(theta, Decision):
        return theta.theta
    return np.atleast_1d(np.asarray(theta, dtype=np.float64))


# ---------------------------------------------------------------------------
# Anchors (the empirical reference distribution)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AnchorSet:
    """The n reference points x^(i), with optional labels in {-1, +1}."""
    points: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64)
        if points.ndim == 1:
            points = points.reshape(-1, 1)
        if points.ndim != 2 or points.shape[0] < 1:
            raise ConfigError("anchor set needs at least one point given as an (n, d) array")
        if not np.all(np.isfinite(points)):
            raise ConfigError("anchor points must be finite")
        object.__setattr__(self, "points", _frozen(points))
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.float64).ravel()
            if labels.shape[0] != points.shape[0]:
                raise ConfigError(
                    f"labels length {labels.shape[0]} does not match {points.shape[0]} anchors"
                )
            if not np.all(np.isin(labels, (-1.0, 1.0))):
                raise ConfigError("labels must be -1 or +1")
            object.__setattr__(self, "labels", _frozen(labels))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def labeled(self) -> bool:
        return self.labels is not None

    @property
    def mean(self) -> np.ndarray:
        return self.points.mean(axis=0)

    def __len__(self):
        return self.n

    def __eq__(self, other):
        if not isinstance(other, AnchorSet):
            return NotImplemented
        if not np.array_equal(self.points, other.points):
            return False
        if self.labeled != other.labeled:
            return False
        return not self.labeled or np.array_equal(self.labels, other.labels)

    __hash__ = None


def save_anchors(filepath, anchors):
    """Write *anchors* as CSV with header x_1..x_d[,label]. Creates parent directories."""
    dirpath = os.path.dirname(filepath)
    if dirpath:
        os.makedirs(dirpath, exist_ok=True)
    header = [f"x_{j + 1}" for j in range(anchors.d)]
    table = anchors.points
    fmt = [FLOAT_FORMAT] * anchors.d
    if anchors.labeled:
        header.append("label")
        table = np.column_stack([table, anchors.labels])
        fmt.append("%d")
    np.savetxt(filepath, table, fmt=fmt, delimiter=",", header=",".join(header), comments="")


def load_anchors(filepath):
    """Read an anchor CSV written by save_anchors. The header decides whether labels are present."""
    with open(filepath, "r") as f:
        header = f.readline().strip().split(",")
    if not header or not header[0].startswith("x_"):
        raise ConfigError(f"{filepath}: missing x_1..x_d header row")
    table = np.loadtxt(filepath, delimiter=",", skiprows=1, ndmin=2, dtype=np.float64)
    if table.shape[1] != len(header):
        raise ConfigError(f"{filepath}: {table.shape[1]} columns but header names {len(header)}")
    if header[-1] == "label":
        return AnchorSet(table[:, :-1], table[:, -1])
    return AnchorSet(table)


# ---------------------------------------------------------------------------
# Loss-model interface
# ---------------------------------------------------------------------------

class LossModel(ABC):
    """A loss family f_theta(z) with analytic gradients in theta and z.

    Every method accepts a single point z of shape (d,) or a batch of shape
    (m, d); batches return (m,), (m, d_theta) and (m, d) arrays. Evaluations
    are pure, so instances may be shared between threads.
    """

    kind = "abstract"
    d: int
    d_theta: int
    L_f1: float | None = None
    L_f2: float | None = None

    @abstractmethod
    def value(self, theta, z, anchor_index=0):
        """f_theta(z) for the anchor *anchor_index*."""

    @abstractmethod
    def grad_theta(self, theta, z, anchor_index=0):
        """Gradient of f_theta(z) in theta."""

    @abstractmethod
    def grad_z(self, theta, z, anchor_index=0):
        """Gradient of f_theta(z) in z."""

    def rebind(self, labels):
        """Return a model whose anchor indices refer to *labels*. Unconditional losses return self."""
        return self

    def grad_z_bound(self, theta=None):
        """sup_z |grad_z f_theta(z)| at *theta*, or over the declared theta region when theta is None.

        None means no finite bound is known.
        """
        return None

    def initial_theta(self) -> Decision:
        return Decision.zeros(self.d_theta)


# ---------------------------------------------------------------------------
# Counter-based random streams
# ---------------------------------------------------------------------------

_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class RandomStream:
    """Counter-based random source: draws are a pure function of (seed, tags).

    Each tag tuple (module id, anchor, iteration, ...) keys its own Philox
    generator, so the values a caller sees never depend on draw order or on
    how work is split between threads.
    """
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "seed", int(self.seed) & _SEED_MASK)

    def generator(self, *tags) -> np.random.Generator:
        """Fresh generator for the tag tuple. Calling twice with equal tags restarts the stream."""
        key = tuple(int(t) for t in tags)
        if any(t < 0 for t in key):
            raise ValueError(f"stream tags must be non-negative, got {key}")
        seq = np.random.SeedSequence(self.seed, spawn_key=key)
        return np.random.Generator(np.random.Philox(seq))

    def normal(self, tags, shape) -> np.ndarray:
        return self.generator(*tags).standard_normal(shape)

    def integers(self, tags, high, shape=None):
        return self.generator(*tags).integers(0, high, shape)

    def choice(self, tags, n, size):
        """*size* distinct indices from range(n), uniform without replacement, sorted."""
        return np.sort(self.generator(*tags).choice(n, size=size, replace=False))
