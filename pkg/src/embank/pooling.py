"""Mean-pooling of (T, F, C) activation tensors into flat feature vectors.

Temporal pooling (the default) averages over time frames only and keeps the
frequency-by-channel structure, flattened with channels fastest. Spectral
pooling averages over frequency bins, spatial pooling over both time and
frequency. Sums accumulate in float64 before the divide; the result is
rounded back to the input dtype.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .formats import EmbeddingTensor

TEMPORAL = "temporal"
SPECTRAL = "spectral"
SPATIAL = "spatial"
POOLING_MODES = (TEMPORAL, SPECTRAL, SPATIAL)


@dataclass
class FeatureVector:
    """A pooled, flattened clip embedding used for distance computation."""

    clip_id: str
    layer: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values)
        if not np.issubdtype(self.values.dtype, np.floating):
            self.values = self.values.astype(np.float64)
        if self.values.ndim != 1 or self.values.size == 0:
            raise ValueError("feature values must be a non-empty 1-D array")
        if not np.isfinite(self.values).all():
            raise ValueError(f"feature vector for clip {self.clip_id!r} contains NaN or Inf")

    @property
    def dim(self) -> int:
        return int(self.values.size)


def pool(tensor: EmbeddingTensor, mode: str = TEMPORAL) -> FeatureVector:
    """Collapse a (T, F, C) tensor to a flat vector.

    temporal -> length F*C, spectral -> length T*C, spatial -> length C.
    Flattening always keeps C fastest.
    """
    if mode not in POOLING_MODES:
        raise ValueError(f"unknown pooling mode {mode!r}; expected one of {POOLING_MODES}")
    x = tensor.data.astype(np.float64)
    if mode == TEMPORAL:
        pooled = x.mean(axis=0)  # (F, C)
    elif mode == SPECTRAL:
        pooled = x.mean(axis=1)  # (T, C)
    else:
        t, f, c = x.shape
        pooled = x.reshape(t * f, c).mean(axis=0)  # (C,)
    values = pooled.reshape(-1).astype(tensor.data.dtype)
    return FeatureVector(clip_id=tensor.clip_id, layer=tensor.layer, values=values)


def pooled_dim(dims: tuple[int, int, int], mode: str) -> int:
    """Output length of pool() for a tensor of the given dims."""
    t, f, c = dims
    if mode == TEMPORAL:
        return f * c
    if mode == SPECTRAL:
        return t * c
    if mode == SPATIAL:
        return c
    raise ValueError(f"unknown pooling mode {mode!r}")
