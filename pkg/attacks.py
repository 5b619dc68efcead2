"""White-box l2 PGD attacks and misclassification-vs-radius robustness reports."""

import csv
import logging
import os
import time
from dataclasses import dataclass, field

import numpy as np

from core_model import theta_array
from datasets import average_norm
from errors import ConfigError
from settings import DEFAULT_ATTACK_STEP_FRACTION, DEFAULT_ATTACK_STEPS, DEFAULT_RADIUS_FRACTIONS
from utils import as_batch, format_float, map_ordered

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ("solver", "radius_fraction", "radius", "misclassification", "clean_accuracy")


@dataclass(frozen=True)
class AttackSpec:
    """Radii as fractions of the mean test feature norm; each PGD step moves step_fraction * radius."""
    radius_fractions: tuple = DEFAULT_RADIUS_FRACTIONS
    steps: int = DEFAULT_ATTACK_STEPS
    step_fraction: float = DEFAULT_ATTACK_STEP_FRACTION

    def __post_init__(self):
        radii = tuple(float(r) for r in self.radius_fractions)
        if not radii:
            raise ConfigError("attack needs at least one radius")
        if any(r < 0 for r in radii):
            raise ConfigError(f"attack radii must be >= 0, got {list(radii)}")
        if any(b < a for a, b in zip(radii, radii[1:])):
            raise ConfigError(f"attack radii must be ascending, got {list(radii)}")
        if self.steps < 0:
            raise ConfigError(f"attack steps must be >= 0, got {self.steps}")
        if not self.step_fraction > 0:
            raise ConfigError(f"attack step_fraction must be > 0, got {self.step_fraction}")
        object.__setattr__(self, "radius_fractions", radii)


@dataclass
class RobustnessReport:
    solver: str
    radius_fractions: tuple
    radii: tuple
    misclassification: tuple
    clean_accuracy: float
    wall_clock_s: float = 0.0
    extra: dict = field(default_factory=dict)

    def rows(self):
        for frac, radius, rate in zip(self.radius_fractions, self.radii, self.misclassification):
            yield (self.solver, frac, radius, rate, self.clean_accuracy)


# ---------------------------------------------------------------------------
# Attack
# ---------------------------------------------------------------------------

def _project(delta, radius):
    norms = np.linalg.norm(delta, axis=1, keepdims=True)
    scale = np.minimum(1.0, radius / np.maximum(norms, np.finfo(float).tiny))
    return delta * scale


def pgd_batch(theta, points, model, radius, steps, step_size, anchor_index):
    """Projected normalized-gradient ascent on the loss for a batch of points, one label per row."""
    clean, _ = as_batch(points)
    if radius == 0.0 or steps == 0:
        return clean.copy()
    adv = clean.copy()
    for _ in range(steps):
        grad = np.asarray(model.grad_z(theta, adv, anchor_index), dtype=np.float64).reshape(adv.shape)
        norms = np.linalg.norm(grad, axis=1, keepdims=True)
        direction = np.divide(grad, norms, out=np.zeros_like(grad), where=norms > 0)
        adv = clean + _project(adv + step_size * direction - clean, radius)
    return adv


def pgd_attack(theta, point, label, model, radius, steps=DEFAULT_ATTACK_STEPS, step_size=None) -> np.ndarray:
    """l2 PGD on one point with the given label; the result lies within *radius* of *point*."""
    if radius < 0:
        raise ConfigError(f"attack radius must be >= 0, got {radius}")
    step_size = DEFAULT_ATTACK_STEP_FRACTION * radius if step_size is None else step_size
    bound = model.rebind(np.array([label], dtype=np.float64)) if label is not None else model
    x = np.atleast_1d(np.asarray(point, dtype=np.float64))
    return pgd_batch(theta, x, bound, radius, steps, step_size, 0)[0]


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def _misclassified(theta, points, model, labels):
    return float(np.mean(model.predict(theta, points) != labels))


def evaluate_robust_accuracy(theta, test, model, attack=None, solver="", workers=1) -> RobustnessReport:
    """Attack every test point at each radius and report the misclassification fraction per radius."""
    if not test.labeled:
        raise ConfigError("robustness evaluation needs a labeled test set")
    if not hasattr(model, "predict"):
        raise ConfigError(f"{model.kind} loss has no classifier to attack")
    attack = attack or AttackSpec()
    started = time.perf_counter()
    theta = theta_array(theta)
    bound = model.rebind(test.labels)
    labels = test.labels.astype(np.float64)
    owners = np.arange(test.n)
    scale = average_norm(test)
    radii = tuple(frac * scale for frac in attack.radius_fractions)

    def rate_at(radius):
        adv = pgd_batch(theta, test.points, bound, radius, attack.steps, attack.step_fraction * radius, owners)
        return _misclassified(theta, adv, bound, labels)

    rates = tuple(map_ordered(rate_at, radii, workers))
    clean = 1.0 - _misclassified(theta, test.points, bound, labels)
    report = RobustnessReport(solver=solver, radius_fractions=attack.radius_fractions, radii=radii,
                              misclassification=rates, clean_accuracy=clean,
                              wall_clock_s=time.perf_counter() - started)
    logger.info("%s: clean accuracy %.4f, misclassification %s", solver or "model", clean,
                ", ".join(f"{r:.3f}" for r in rates))
    return report


def save_report(filepath, reports):
    """Write one CSV row per (solver, radius) in report order."""
    dirpath = os.path.dirname(filepath)
    if dirpath:
        os.makedirs(dirpath, exist_ok=True)
    with open(filepath, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for report in reports:
            for solver, frac, radius, rate, clean in report.rows():
                writer.writerow([solver, format_float(frac), format_float(radius),
                                 format_float(rate), format_float(clean)])


def load_report(filepath):
    """Read report.csv back as a list of dicts with float values (solver kept as text)."""
    with open(filepath, "r", newline="") as f:
        rows = list(csv.DictReader(f))
    return [{k: (v if k == "solver" else float(v)) for k, v in row.items()} for row in rows]
