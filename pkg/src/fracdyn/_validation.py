"""Small input-validation helpers shared by estimators and the harness."""
from __future__ import annotations

import numpy as np

from .exceptions import UsageError


def check_states(x, n: int, name: str = "x") -> np.ndarray:
    """Coerce ``x`` to a float array whose last axis has length ``n``."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0 or (arr.ndim == 1 and n != 1 and arr.shape[0] != n):
        raise UsageError(f"{name} must have a trailing axis of length {n}, got shape {arr.shape}")
    if arr.ndim == 1 and n == 1 and arr.shape[0] != 1:
        arr = arr[:, None]
    if arr.shape[-1] != n:
        raise UsageError(f"{name} must have a trailing axis of length {n}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise UsageError(f"{name} contains non-finite values")
    return arr


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or int(value) != value or value < minimum:
        raise UsageError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_datasets(datasets):
    """Accept one dataset or a sequence of per-channel datasets; return a list."""
    from .learn.dataset import ExperimentDataset

    if isinstance(datasets, ExperimentDataset):
        return [datasets]
    out = list(datasets)
    if not out or not all(isinstance(d, ExperimentDataset) for d in out):
        raise UsageError("expected an ExperimentDataset or a non-empty sequence of them")
    kinds = {d.time_kind for d in out}
    if len(kinds) != 1:
        raise UsageError("datasets mix continuous and discrete experiments")
    return out
