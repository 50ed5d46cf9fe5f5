"""EMB1 embedding container: one little-endian binary file per clip and layer.

Layout (all integers little-endian):

    magic "EMB1" (4 bytes)
    u16 version          currently 1
    u8  dtype code       1 = float32
    u32 layer
    u32 T                time frames
    u32 F                frequency bins
    u32 C                channels
    u16 clip_id length
    clip_id              UTF-8 bytes
    payload              T*F*C float32 values, row-major with C fastest,
                         then F, then T

The clip_id rides in the header so a file round-trips to an identical
tensor without consulting its path. Readers are pure functions and safe to
call concurrently on distinct files; writers need exclusive access to their
output path.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    BadMagicError,
    PayloadSizeError,
    UnsupportedDtypeError,
    UnsupportedVersionError,
)

EMB_MAGIC = b"EMB1"
EMB_VERSION = 1
DTYPE_FLOAT32 = 1

_FIXED = struct.Struct("<4sHBIIII")
_CLIP_LEN = struct.Struct("<H")


@dataclass
class EmbeddingTensor:
    """One clip's per-layer activations, shaped (T, F, C) in float32.

    Values must be finite; the shape must have three axes of size >= 1.
    """

    clip_id: str
    layer: int
    data: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.data.ndim != 3 or min(self.data.shape) < 1:
            raise ValueError(
                f"embedding data must be (T, F, C) with all dims >= 1, got shape {self.data.shape}"
            )
        if int(self.layer) < 0:
            raise ValueError(f"layer must be >= 0, got {self.layer}")
        self.layer = int(self.layer)
        if not np.isfinite(self.data).all():
            raise ValueError(f"embedding data for clip {self.clip_id!r} contains NaN or Inf")

    @property
    def dims(self) -> tuple[int, int, int]:
        t, f, c = self.data.shape
        return t, f, c

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmbeddingTensor):
            return NotImplemented
        return (
            self.clip_id == other.clip_id
            and self.layer == other.layer
            and self.data.shape == other.data.shape
            and self.data.tobytes() == other.data.tobytes()
        )


def embedding_path(root: Path | str, clip_id: str, layer: int) -> Path:
    """Canonical location of a clip/layer embedding under a dataset root."""
    return Path(root) / clip_id / f"layer{layer:02d}.emb"


def _encode_header(tensor: EmbeddingTensor) -> bytes:
    t, f, c = tensor.dims
    clip = tensor.clip_id.encode("utf-8")
    if len(clip) > 0xFFFF:
        raise ValueError("clip_id too long to serialize")
    return (
        _FIXED.pack(EMB_MAGIC, EMB_VERSION, DTYPE_FLOAT32, tensor.layer, t, f, c)
        + _CLIP_LEN.pack(len(clip))
        + clip
    )


def write_embedding(tensor: EmbeddingTensor, root: Path | str) -> Path:
    """Write one embedding file under root/<clip_id>/layerNN.emb.

    Rejects non-finite values before touching the filesystem. The written
    file reads back bit-exactly through read_embedding.
    """
    if not np.isfinite(tensor.data).all():
        raise ValueError(f"refusing to write non-finite embedding for clip {tensor.clip_id!r}")
    path = embedding_path(root, tensor.clip_id, tensor.layer)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = np.ascontiguousarray(tensor.data, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(_encode_header(tensor))
        fh.write(payload)
    return path


def _parse_header(blob: bytes, path: Path) -> tuple[str, int, tuple[int, int, int], int]:
    """Return (clip_id, layer, dims, payload_offset) or raise a FormatError."""
    if len(blob) < _FIXED.size:
        raise PayloadSizeError(f"{path}: file shorter than the fixed header")
    magic, version, dtype, layer, t, f, c = _FIXED.unpack_from(blob, 0)
    if magic != EMB_MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}, expected {EMB_MAGIC!r}")
    if version != EMB_VERSION:
        raise UnsupportedVersionError(f"{path}: unsupported version {version}")
    if dtype != DTYPE_FLOAT32:
        raise UnsupportedDtypeError(f"{path}: unsupported dtype code {dtype}")
    off = _FIXED.size
    if len(blob) < off + _CLIP_LEN.size:
        raise PayloadSizeError(f"{path}: truncated before clip_id length")
    (clip_len,) = _CLIP_LEN.unpack_from(blob, off)
    off += _CLIP_LEN.size
    if len(blob) < off + clip_len:
        raise PayloadSizeError(f"{path}: truncated inside clip_id")
    clip_id = blob[off : off + clip_len].decode("utf-8")
    return clip_id, layer, (t, f, c), off + clip_len


def read_embedding_header(path: Path | str) -> tuple[str, int, tuple[int, int, int]]:
    """Read only (clip_id, layer, dims); cheap validation for dataset sweeps."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(_FIXED.size + _CLIP_LEN.size + 0xFFFF)
    clip_id, layer, dims, _ = _parse_header(head, path)
    return clip_id, layer, dims


def read_embedding(path: Path | str) -> EmbeddingTensor:
    """Read and validate a full EMB1 file.

    Raises BadMagicError / UnsupportedVersionError / UnsupportedDtypeError /
    PayloadSizeError for the corresponding corruptions.
    """
    path = Path(path)
    blob = path.read_bytes()
    clip_id, layer, (t, f, c), off = _parse_header(blob, path)
    expected = t * f * c * 4
    actual = len(blob) - off
    if actual != expected:
        raise PayloadSizeError(
            f"{path}: payload is {actual} bytes but header dims ({t},{f},{c}) require {expected}"
        )
    data = np.frombuffer(blob, dtype="<f4", count=t * f * c, offset=off)
    return EmbeddingTensor(clip_id=clip_id, layer=layer, data=data.reshape(t, f, c).copy())
