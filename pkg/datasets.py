"""Synthetic binary classification data: Gaussian blobs and two moons, labels in {-1, +1}."""

import logging
from dataclasses import dataclass

import numpy as np

from core_model import AnchorSet, RandomStream
from errors import ConfigError
from settings import STREAM_DATASET

logger = logging.getLogger(__name__)

DATASET_KINDS = ("gauss_blobs", "two_moons", "fixed")

_TRAIN, _TEST = 0, 1


@dataclass(frozen=True)
class DatasetSpec:
    """Shape of a synthetic dataset.

    gauss_blobs puts the class means at +/- (separation / 2) e_1 with isotropic
    noise. two_moons draws the interleaved half circles in the first two
    coordinates, scaled by separation and centred at the origin; extra
    coordinates carry noise only. fixed uses *points* (row-major, d per row)
    as an unlabeled anchor set that serves as both train and test split.
    """
    kind: str = "gauss_blobs"
    n_per_class: int = 100
    d: int = 2
    separation: float = 4.0
    noise: float = 0.5
    seed: int = 0
    test_per_class: int | None = None
    points: tuple = ()

    def __post_init__(self):
        if self.kind not in DATASET_KINDS:
            raise ConfigError(f"unknown dataset kind '{self.kind}' (expected one of {', '.join(DATASET_KINDS)})")
        if self.n_per_class < 1:
            raise ConfigError(f"n_per_class must be >= 1, got {self.n_per_class}")
        if self.d < 1 or (self.kind == "two_moons" and self.d < 2):
            raise ConfigError(f"dimension {self.d} too small for {self.kind}")
        if self.separation < 0 or self.noise < 0:
            raise ConfigError("separation and noise must be >= 0")
        if self.test_per_class is not None and self.test_per_class < 1:
            raise ConfigError(f"test_per_class must be >= 1, got {self.test_per_class}")
        if self.kind == "fixed" and (not self.points or len(self.points) % self.d):
            raise ConfigError(f"fixed dataset needs a nonempty point list divisible by d={self.d}")


def _blobs(spec, per_class, gen):
    centers = np.zeros((2, spec.d))
    centers[0, 0] = spec.separation / 2.0
    centers[1, 0] = -spec.separation / 2.0
    points = np.repeat(centers, per_class, axis=0) + spec.noise * gen.standard_normal((2 * per_class, spec.d))
    return points


def _moons(spec, per_class, gen):
    angles = gen.uniform(0.0, np.pi, (2, per_class))
    upper = np.column_stack([np.cos(angles[0]), np.sin(angles[0])])
    lower = np.column_stack([1.0 - np.cos(angles[1]), 0.5 - np.sin(angles[1])])
    plane = (np.vstack([upper, lower]) - np.array([0.5, 0.25])) * spec.separation
    points = np.zeros((2 * per_class, spec.d))
    points[:, :2] = plane
    return points + spec.noise * gen.standard_normal(points.shape)


def _split(spec, per_class, stream, part):
    gen = stream.generator(STREAM_DATASET, part)
    points = _blobs(spec, per_class, gen) if spec.kind == "gauss_blobs" else _moons(spec, per_class, gen)
    labels = np.concatenate([np.ones(per_class, dtype=np.int64), -np.ones(per_class, dtype=np.int64)])
    order = gen.permutation(2 * per_class)
    return AnchorSet(points[order], labels[order])


def generate_synthetic_dataset(spec, stream=None):
    """Return (train, test) AnchorSets drawn from disjoint streams keyed by the dataset seed."""
    if spec.kind == "fixed":
        anchors = AnchorSet(np.asarray(spec.points, dtype=np.float64).reshape(-1, spec.d))
        return anchors, anchors
    stream = stream if stream is not None else RandomStream(spec.seed)
    test_per_class = spec.test_per_class or spec.n_per_class
    train = _split(spec, spec.n_per_class, stream, _TRAIN)
    test = _split(spec, test_per_class, stream, _TEST)
    logger.info("generated %s: %d train / %d test points in d=%d", spec.kind, train.n, test.n, spec.d)
    return train, test


def average_norm(anchors) -> float:
    """Mean l2 norm of the feature vectors; attack radii are fractions of this."""
    return float(np.linalg.norm(anchors.points, axis=1).mean())
