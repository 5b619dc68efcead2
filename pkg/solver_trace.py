"""Solver traces: record per-iteration statistics during a run and write/read them as CSV."""

import os
from dataclasses import dataclass, field

import numpy as np

from settings import FLOAT_FORMAT

BASE_COLUMNS = ("k", "grad_est_norm", "anchor_index")
MOMENTUM_COLUMNS = ("r_norm", "v_norm", "batch_size")
_INT_COLUMNS = {"k", "anchor_index", "batch_size"}


@dataclass
class SolverTrace:
    """Per-iteration records of one solver run plus its output selection.

    *thetas* holds theta_{k+1} after iteration k, so row k is the iterate the
    uniform output selection picks when selected_index == k.
    """
    columns: tuple
    table: np.ndarray
    thetas: np.ndarray
    selected_index: int
    theta_hat: np.ndarray
    theta_last: np.ndarray
    total_langevin_steps: int = 0
    total_grad_evals: int = 0
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.table.shape[0]

    def column(self, name) -> np.ndarray:
        return self.table[:, self.columns.index(name)]

    def summary(self) -> dict:
        return {
            "iterations": len(self),
            "selected_index": int(self.selected_index),
            "theta_hat": [float(v) for v in self.theta_hat],
            "theta_last": [float(v) for v in self.theta_last],
            "total_langevin_steps": int(self.total_langevin_steps),
            "total_grad_evals": int(self.total_grad_evals),
            **self.meta,
        }


class TraceRecorder:
    """Collects one row per iteration; finish() freezes the rows into a SolverTrace."""

    def __init__(self, theta_dim, momentum=False):
        self.theta_dim = theta_dim
        self.columns = BASE_COLUMNS + (MOMENTUM_COLUMNS if momentum else ())
        self._rows = []
        self._thetas = []
        self.total_langevin_steps = 0
        self.total_grad_evals = 0

    def capture(self, k, grad_est_norm, anchor_index, theta, r_norm=None, v_norm=None, batch_size=None):
        row = [k, grad_est_norm, anchor_index]
        if len(self.columns) > len(BASE_COLUMNS):
            row += [r_norm, v_norm, batch_size]
        self._rows.append(row)
        self._thetas.append(np.array(theta, dtype=np.float64))

    def count(self, langevin_steps=0, grad_evals=0):
        self.total_langevin_steps += int(langevin_steps)
        self.total_grad_evals += int(grad_evals)

    def finish(self, selected_index, theta0, meta=None) -> SolverTrace:
        table = np.array(self._rows, dtype=np.float64).reshape(-1, len(self.columns))
        thetas = np.array(self._thetas, dtype=np.float64).reshape(-1, self.theta_dim)
        theta0 = np.asarray(theta0, dtype=np.float64)
        theta_hat = thetas[selected_index] if len(thetas) else theta0
        theta_last = thetas[-1] if len(thetas) else theta0
        return SolverTrace(
            columns=self.columns, table=table, thetas=thetas,
            selected_index=int(selected_index),
            theta_hat=theta_hat.copy(), theta_last=theta_last.copy(),
            total_langevin_steps=self.total_langevin_steps,
            total_grad_evals=self.total_grad_evals,
            meta=dict(meta or {}),
        )


def save_trace(filepath, trace, log_theta=True):
    """Write the trace as CSV: the base/momentum columns, then theta_0..theta_{d-1} when *log_theta*."""
    dirpath = os.path.dirname(filepath)
    if dirpath:
        os.makedirs(dirpath, exist_ok=True)
    header = list(trace.columns)
    table = trace.table
    fmt = ["%d" if c in _INT_COLUMNS else FLOAT_FORMAT for c in trace.columns]
    if log_theta:
        header += [f"theta_{j}" for j in range(trace.thetas.shape[1])]
        table = np.hstack([table, trace.thetas])
        fmt += [FLOAT_FORMAT] * trace.thetas.shape[1]
    np.savetxt(filepath, table, fmt=fmt, delimiter=",", header=",".join(header), comments="")


def load_trace(filepath):
    """Read a trace CSV back as (header list, table array)."""
    with open(filepath, "r") as f:
        header = f.readline().strip().split(",")
    table = np.loadtxt(filepath, delimiter=",", skiprows=1, ndmin=2, dtype=np.float64)
    return header, table
