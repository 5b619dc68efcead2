"""Particle banks: M samples per anchor tracking the evolving worst-case laws of the single-loop solver."""

import os
from dataclasses import dataclass

import numpy as np

from core_model import theta_array
from errors import ConfigError
from langevin import langevin_step
from settings import FLOAT_FORMAT, STREAM_BANK_INIT, STREAM_SINGLE_LOOP
from utils import require_finite


@dataclass(frozen=True)
class ParticleBank:
    """particles[i, m] is particle m of anchor i; stamps[i] counts the updates anchor i has received.

    Banks are values: update_bank returns a new bank and leaves its input untouched.
    """
    particles: np.ndarray
    stamps: np.ndarray

    def __post_init__(self):
        particles = np.array(self.particles, dtype=np.float64)
        if particles.ndim != 3:
            raise ValueError(f"particles must have shape (n, M, d), got {particles.shape}")
        require_finite(particles, "particle bank")
        stamps = np.array(self.stamps, dtype=np.int64).reshape(particles.shape[0])
        particles.setflags(write=False)
        stamps.setflags(write=False)
        object.__setattr__(self, "particles", particles)
        object.__setattr__(self, "stamps", stamps)

    @property
    def n(self) -> int:
        return self.particles.shape[0]

    @property
    def M(self) -> int:
        return self.particles.shape[1]

    @property
    def d(self) -> int:
        return self.particles.shape[2]

    def means(self) -> np.ndarray:
        """Per-anchor particle means, shape (n, d)."""
        return self.particles.mean(axis=1)

    def variances(self) -> np.ndarray:
        """Per-anchor isotropic variance (mean per-coordinate variance), shape (n,)."""
        return self.particles.var(axis=1).mean(axis=1)

    def __eq__(self, other):
        if not isinstance(other, ParticleBank):
            return NotImplemented
        return np.array_equal(self.particles, other.particles) and np.array_equal(self.stamps, other.stamps)

    __hash__ = None


def init_bank(anchors, M, hp, stream) -> ParticleBank:
    """M particles per anchor drawn from N(x_i, eps I), keyed by (bank init, anchor)."""
    if M < 1:
        raise ConfigError(f"particle count M must be >= 1, got {M}")
    particles = np.empty((anchors.n, M, anchors.d))
    scale = np.sqrt(hp.epsilon)
    for i in range(anchors.n):
        particles[i] = anchors.points[i] + scale * stream.normal((STREAM_BANK_INIT, i), (M, anchors.d))
    return ParticleBank(particles, np.zeros(anchors.n, dtype=np.int64))


def _check_batch(batch_indices, n):
    idx = np.unique(np.asarray(list(batch_indices), dtype=np.int64))
    if idx.size and (idx[0] < 0 or idx[-1] >= n):
        raise IndexError(f"batch indices must lie in [0, {n}), got {idx.tolist()}")
    return idx


def update_bank(bank, batch_indices, theta, anchors, hp, model, tau, stream, iteration=None,
                deterministic=False) -> ParticleBank:
    """One Langevin step for every particle of the selected anchors; other rows are left as they are.

    Noise for anchor i is the (M, d) block keyed by (single loop, iteration, i),
    row m going to particle m, so the result does not depend on the order in
    which anchors are processed. *iteration* defaults to the anchor's stamp.
    """
    idx = _check_batch(batch_indices, bank.n)
    if idx.size == 0:
        return bank
    M, d = bank.M, bank.d
    theta = theta_array(theta)
    z = bank.particles[idx].reshape(-1, d)
    centers = np.repeat(anchors.points[idx], M, axis=0)
    owner = np.repeat(idx, M)
    noise = None
    if not deterministic:
        noise = np.concatenate([
            stream.normal((STREAM_SINGLE_LOOP, int(bank.stamps[i] if iteration is None else iteration), int(i)),
                          (M, d))
            for i in idx
        ])
    moved = langevin_step(z, theta, centers, hp, model, tau, noise, anchor_index=owner)
    particles = bank.particles.copy()
    particles[idx] = moved.reshape(idx.size, M, d)
    stamps = bank.stamps.copy()
    stamps[idx] += 1
    return ParticleBank(particles, stamps)


def save_bank(filepath, bank):
    """CSV with columns anchor_index, particle_index, z_1..z_d, one row per particle."""
    dirpath = os.path.dirname(filepath)
    if dirpath:
        os.makedirs(dirpath, exist_ok=True)
    n, M, d = bank.particles.shape
    anchor_col = np.repeat(np.arange(n), M)
    particle_col = np.tile(np.arange(M), n)
    table = np.column_stack([anchor_col, particle_col, bank.particles.reshape(-1, d)])
    header = ",".join(["anchor_index", "particle_index"] + [f"z_{j + 1}" for j in range(d)])
    np.savetxt(filepath, table, fmt=["%d", "%d"] + [FLOAT_FORMAT] * d, delimiter=",",
               header=header, comments="")


def load_bank(filepath, stamps=None) -> ParticleBank:
    table = np.loadtxt(filepath, delimiter=",", skiprows=1, ndmin=2)
    n = int(table[:, 0].max()) + 1
    M = int(table[:, 1].max()) + 1
    d = table.shape[1] - 2
    particles = np.empty((n, M, d))
    particles[table[:, 0].astype(int), table[:, 1].astype(int)] = table[:, 2:]
    return ParticleBank(particles, stamps if stamps is not None else np.zeros(n, dtype=np.int64))
