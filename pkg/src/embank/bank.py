"""Per-domain memory banks, exact kNN search, and target-bank augmentation.

Banks are immutable after construction and safe to share across threads;
queries are read-only. Distances are always *squared* Euclidean: no square
root is ever taken, which preserves neighbor ranking and keeps the
arithmetic cheap and reproducible.

Reproducibility note: distances are computed in float64 with the difference
formula, reducing over the feature axis in one pass. Work is blocked over
queries and bank rows only, never over features, so results are bit-identical
to a naive per-row computation; neighbor ties break toward the lower row
index via a stable sort.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    BadMagicError,
    PayloadSizeError,
    UnsupportedDtypeError,
    UnsupportedVersionError,
)
from .pooling import FeatureVector

PROV_ORIGINAL = "original"
PROV_MIXUP = "mixup"

# Cap on elements per temporary difference block (~16 MiB of float64).
_BLOCK_ELEMS = 2_097_152


@dataclass(frozen=True)
class RowProvenance:
    """Where a bank row came from; mixup rows record their parents."""

    kind: str
    target_index: int | None = None
    source_index: int | None = None
    weight: float | None = None


_ORIGINAL_ROW = RowProvenance(kind=PROV_ORIGINAL)


class Neighbor(NamedTuple):
    index: int
    distance: float


class MemoryBank:
    """An immutable N x D matrix of features tagged with a domain."""

    def __init__(
        self,
        domain: str,
        features: np.ndarray,
        provenance: Sequence[RowProvenance] | None = None,
    ):
        if domain not in ("source", "target"):
            raise ValueError(f"domain must be 'source' or 'target', got {domain!r}")
        feats = np.array(features, dtype=np.float64, order="C")
        if feats.ndim != 2 or feats.shape[0] < 1 or feats.shape[1] < 1:
            raise ValueError(f"features must be a non-empty 2-D matrix, got shape {feats.shape}")
        if not np.isfinite(feats).all():
            raise ValueError("bank features contain NaN or Inf")
        feats.setflags(write=False)
        if provenance is None:
            provenance = (_ORIGINAL_ROW,) * feats.shape[0]
        elif len(provenance) != feats.shape[0]:
            raise ValueError("provenance length must match the number of rows")
        self._domain = domain
        self._features = feats
        self._provenance = tuple(provenance)

    @property
    def domain(self) -> str:
        return self._domain

    @property
    def features(self) -> np.ndarray:
        """Read-only (N, D) float64 view of the bank rows."""
        return self._features

    @property
    def provenance(self) -> tuple[RowProvenance, ...]:
        return self._provenance

    @property
    def n_rows(self) -> int:
        return self._features.shape[0]

    @property
    def dim(self) -> int:
        return self._features.shape[1]

    def original_indices(self) -> np.ndarray:
        return np.array(
            [i for i, p in enumerate(self._provenance) if p.kind == PROV_ORIGINAL],
            dtype=np.int64,
        )

    def __repr__(self) -> str:
        n_mix = sum(p.kind == PROV_MIXUP for p in self._provenance)
        return f"MemoryBank(domain={self._domain!r}, n_rows={self.n_rows}, dim={self.dim}, mixup_rows={n_mix})"


def _as_matrix(features) -> np.ndarray:
    rows = []
    dim = None
    for vec in features:
        v = vec.values if isinstance(vec, FeatureVector) else np.asarray(vec, dtype=np.float64)
        if v.ndim != 1:
            raise ValueError("each feature must be a 1-D vector")
        if dim is None:
            dim = v.size
        elif v.size != dim:
            raise ValueError(f"ragged feature dimensions: expected {dim}, got {v.size}")
        rows.append(np.asarray(v, dtype=np.float64))
    if not rows:
        raise ValueError("cannot build a bank from an empty feature list")
    return np.vstack(rows)


def build_bank(features, domain: str) -> MemoryBank:
    """Stack feature vectors into a bank, rows in input order, all original."""
    return MemoryBank(domain=domain, features=_as_matrix(features))


def _query_matrix(queries, dim: int) -> np.ndarray:
    if isinstance(queries, FeatureVector):
        q = queries.values.astype(np.float64, copy=False).reshape(1, -1)
    else:
        q = np.asarray(queries, dtype=np.float64)
        if q.ndim == 1:
            q = q.reshape(1, -1)
    if q.ndim != 2 or q.shape[1] != dim:
        raise ValueError(f"query dimension {q.shape[-1]} does not match bank dimension {dim}")
    if not np.isfinite(q).all():
        raise ValueError("query contains NaN or Inf")
    return q


def pairwise_sqdist(queries: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Full (Q, N) squared-distance matrix, blocked to bound temporaries."""
    queries = np.asarray(queries, dtype=np.float64)
    rows = np.asarray(rows, dtype=np.float64)
    q_n, d = queries.shape
    n = rows.shape[0]
    out = np.empty((q_n, n), dtype=np.float64)
    rows_per_block = max(1, _BLOCK_ELEMS // max(1, d))
    n_block = min(n, rows_per_block)
    q_block = max(1, rows_per_block // n_block)
    for qi in range(0, q_n, q_block):
        q_chunk = queries[qi : qi + q_block]
        for ni in range(0, n, n_block):
            diff = q_chunk[:, None, :] - rows[None, ni : ni + n_block, :]
            np.square(diff, out=diff)
            out[qi : qi + q_block, ni : ni + n_block] = diff.sum(axis=2)
    return out


def knn_distances(bank: MemoryBank, queries, k: int) -> tuple[np.ndarray, np.ndarray]:
    """k smallest squared distances per query row.

    Returns (distances, indices), each (Q, k), distances ascending per row
    and ties resolved toward lower bank row indices.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > bank.n_rows:
        raise ValueError(f"k={k} exceeds bank size {bank.n_rows}")
    q = _query_matrix(queries, bank.dim)
    dists = pairwise_sqdist(q, bank.features)
    order = np.argsort(dists, axis=1, kind="stable")[:, :k]
    return np.take_along_axis(dists, order, axis=1), order


def knn_query(bank: MemoryBank, query, k: int) -> list[Neighbor]:
    """The k nearest bank rows to a single query vector."""
    dists, idx = knn_distances(bank, query, k)
    return [Neighbor(int(i), float(d)) for i, d in zip(idx[0], dists[0])]


def mixup_augment(
    source: MemoryBank, target: MemoryBank, n_neighbors: int, weight: float = 0.9
) -> MemoryBank:
    """Enrich a target bank with interpolations toward nearby source rows.

    For every target row f_t and each of its n_neighbors nearest source rows
    f_s (nearest first), appends weight*f_t + (1-weight)*f_s. The result has
    n_target*(1+n_neighbors) rows: originals first, then the interpolations
    grouped by target row; parents are recorded in the provenance. The
    operation is deterministic, and duplicates among the source rows simply
    yield duplicate interpolations.
    """
    if source.dim != target.dim:
        raise ValueError(
            f"source dim {source.dim} does not match target dim {target.dim}"
        )
    if not 1 <= n_neighbors <= source.n_rows:
        raise ValueError(
            f"n_neighbors={n_neighbors} must be in [1, {source.n_rows}] for this source bank"
        )
    if not 0.0 <= weight <= 1.0:
        raise ValueError(f"interpolation weight must be in [0, 1], got {weight}")
    _, nbr_idx = knn_distances(source, target.features, n_neighbors)  # (Nt, Ks)
    mixed = weight * target.features[:, None, :] + (1.0 - weight) * source.features[nbr_idx]
    n_t = target.n_rows
    rows = np.concatenate([target.features, mixed.reshape(n_t * n_neighbors, -1)], axis=0)
    provenance = list(target.provenance)
    for t in range(n_t):
        for s in nbr_idx[t]:
            provenance.append(
                RowProvenance(
                    kind=PROV_MIXUP, target_index=t, source_index=int(s), weight=weight
                )
            )
    return MemoryBank(domain=target.domain, features=rows, provenance=provenance)


# --- optional bank persistence -------------------------------------------
#
# Same payload idea as EMB1 (row-major little-endian floats) with a
# bank-level header and a trailing JSON block for domain + provenance:
#   magic "BNK1" | u16 version=1 | u8 dtype (2 = float64) | u32 N | u32 D
#   | payload N*D floats | u32 json_len | JSON

BANK_MAGIC = b"BNK1"
BANK_VERSION = 1
_BANK_DTYPE_F64 = 2
_BANK_FIXED = struct.Struct("<4sHBII")
_JSON_LEN = struct.Struct("<I")


def save_bank(bank: MemoryBank, path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    trailer = json.dumps(
        {
            "domain": bank.domain,
            "provenance": [
                {
                    "kind": p.kind,
                    "target_index": p.target_index,
                    "source_index": p.source_index,
                    "weight": p.weight,
                }
                for p in bank.provenance
            ],
        },
        sort_keys=True,
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_BANK_FIXED.pack(BANK_MAGIC, BANK_VERSION, _BANK_DTYPE_F64, bank.n_rows, bank.dim))
        fh.write(np.ascontiguousarray(bank.features, dtype="<f8").tobytes())
        fh.write(_JSON_LEN.pack(len(trailer)))
        fh.write(trailer)
    return path


def load_bank(path: Path | str) -> MemoryBank:
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < _BANK_FIXED.size:
        raise PayloadSizeError(f"{path}: file shorter than the bank header")
    magic, version, dtype, n, d = _BANK_FIXED.unpack_from(blob, 0)
    if magic != BANK_MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}, expected {BANK_MAGIC!r}")
    if version != BANK_VERSION:
        raise UnsupportedVersionError(f"{path}: unsupported bank version {version}")
    if dtype != _BANK_DTYPE_F64:
        raise UnsupportedDtypeError(f"{path}: unsupported bank dtype code {dtype}")
    off = _BANK_FIXED.size
    payload_bytes = n * d * 8
    if len(blob) < off + payload_bytes + _JSON_LEN.size:
        raise PayloadSizeError(f"{path}: truncated bank payload")
    feats = np.frombuffer(blob, dtype="<f8", count=n * d, offset=off).reshape(n, d).copy()
    off += payload_bytes
    (json_len,) = _JSON_LEN.unpack_from(blob, off)
    off += _JSON_LEN.size
    if len(blob) != off + json_len:
        raise PayloadSizeError(f"{path}: trailing JSON block length mismatch")
    meta = json.loads(blob[off : off + json_len].decode("utf-8"))
    provenance = [
        RowProvenance(
            kind=p["kind"],
            target_index=p["target_index"],
            source_index=p["source_index"],
            weight=p["weight"],
        )
        for p in meta["provenance"]
    ]
    return MemoryBank(domain=meta["domain"], features=feats, provenance=provenance)
