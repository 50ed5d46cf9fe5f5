"""Light input-validation helpers shared by the estimator and the pipeline."""

from __future__ import annotations

import numpy as np

DOMAIN_VALUES = ("source", "target")


def check_feature_matrix(X, *, name: str = "X") -> np.ndarray:
    """Coerce to a finite, non-empty 2-D float64 matrix."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be a non-empty 2-D matrix, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def check_domain_labels(y, n_rows: int) -> np.ndarray:
    """Validate per-row domain tags; both domains must be present."""
    arr = np.asarray(y, dtype=object)
    if arr.ndim != 1 or arr.size != n_rows:
        raise ValueError(f"y must be a 1-D array of {n_rows} domain labels, got shape {arr.shape}")
    bad = sorted({str(v) for v in arr} - set(DOMAIN_VALUES))
    if bad:
        raise ValueError(f"unknown domain labels {bad}; expected one of {DOMAIN_VALUES}")
    for domain in DOMAIN_VALUES:
        if not (arr == domain).any():
            raise ValueError(f"no rows labeled {domain!r}; need training clips from both domains")
    return arr
