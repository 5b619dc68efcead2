"""Shared numeric helpers: batch coercion, finiteness guards, CSV float formatting, worker pools."""

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from errors import EvaluationDomainError
from settings import FLOAT_FORMAT


# ---------------------------------------------------------------------------
# Array coercion
# ---------------------------------------------------------------------------

def as_batch(z, d=None) -> tuple[np.ndarray, bool]:
    """Return (*z* as an (m, d) array, True if the input was a single point)."""
    arr = np.asarray(z, dtype=np.float64)
    single = arr.ndim <= 1
    arr = arr.reshape(1, -1) if single else arr
    if d is not None and arr.shape[-1] != d:
        raise ValueError(f"expected points of dimension {d}, got shape {np.shape(z)}")
    return arr, single


# ---------------------------------------------------------------------------
# Finiteness guards
# ---------------------------------------------------------------------------

def require_finite(values, what):
    """Raise EvaluationDomainError if *values* holds a NaN or infinity."""
    if not np.all(np.isfinite(values)):
        raise EvaluationDomainError(f"non-finite {what}")
    return values


# ---------------------------------------------------------------------------
# CSV formatting
# ---------------------------------------------------------------------------

def format_float(value) -> str:
    """Format *value* with 17 significant digits (exact round-trip for float64)."""
    return FLOAT_FORMAT % float(value)


# ---------------------------------------------------------------------------
# Worker pools
# ---------------------------------------------------------------------------

def map_ordered(func, items, workers=1):
    """Apply *func* to each of *items*, in parallel when *workers* > 1, preserving order."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))
