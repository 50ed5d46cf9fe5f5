"""Independent EMB1 reader/writer.

The embedding container consumed by the scoring toolkit; implemented here
from the published byte layout rather than imported, so the extractor stays
decoupled and the round-trip verifier is a genuinely separate code path:

    magic "EMB1" | u16 version=1 | u8 dtype (1 = float32) | u32 layer
    | u32 T | u32 F | u32 C | u16 clip_id length | clip_id UTF-8
    | payload T*F*C little-endian float32, C fastest

manifest.json carries the clip metadata with snake_case keys plus
layers_available and per-layer embedding_dims.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"EMB1"
VERSION = 1
DTYPE_FLOAT32 = 1

_HEADER = struct.Struct("<4sHBIIII")
_CLIP_LEN = struct.Struct("<H")

MANIFEST_NAME = "manifest.json"


class Emb1Error(ValueError):
    pass


def embedding_path(root: Path | str, clip_id: str, layer: int) -> Path:
    return Path(root) / clip_id / f"layer{layer:02d}.emb"


def write_emb1(root: Path | str, clip_id: str, layer: int, data: np.ndarray) -> Path:
    data = np.ascontiguousarray(data, dtype=np.float32)
    if data.ndim != 3:
        raise Emb1Error(f"embedding must be (T, F, C), got shape {data.shape}")
    if not np.isfinite(data).all():
        raise Emb1Error(f"clip {clip_id!r} layer {layer}: non-finite values")
    t, f, c = data.shape
    path = embedding_path(root, clip_id, layer)
    path.parent.mkdir(parents=True, exist_ok=True)
    clip = clip_id.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, DTYPE_FLOAT32, layer, t, f, c))
        fh.write(_CLIP_LEN.pack(len(clip)))
        fh.write(clip)
        fh.write(data.astype("<f4", copy=False).tobytes())
    return path


def read_emb1(path: Path | str) -> tuple[str, int, np.ndarray]:
    """Return (clip_id, layer, (T, F, C) float32 array) or raise Emb1Error."""
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < _HEADER.size + _CLIP_LEN.size:
        raise Emb1Error(f"{path}: shorter than the header")
    magic, version, dtype, layer, t, f, c = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise Emb1Error(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise Emb1Error(f"{path}: unsupported version {version}")
    if dtype != DTYPE_FLOAT32:
        raise Emb1Error(f"{path}: unsupported dtype code {dtype}")
    (clip_len,) = _CLIP_LEN.unpack_from(blob, _HEADER.size)
    off = _HEADER.size + _CLIP_LEN.size
    if len(blob) < off + clip_len:
        raise Emb1Error(f"{path}: truncated clip_id")
    clip_id = blob[off : off + clip_len].decode("utf-8")
    off += clip_len
    expected = t * f * c * 4
    if len(blob) - off != expected:
        raise Emb1Error(
            f"{path}: payload {len(blob) - off} bytes, header dims require {expected}"
        )
    data = np.frombuffer(blob, dtype="<f4", count=t * f * c, offset=off)
    return clip_id, layer, data.reshape(t, f, c).copy()


def write_manifest(
    root: Path | str,
    clips: list[dict],
    layers: list[int],
    dims: tuple[int, int, int],
) -> Path:
    doc = {
        "format_version": 1,
        "clips": clips,
        "layers_available": list(layers),
        "embedding_dims": {str(layer): list(dims) for layer in sorted(layers)},
    }
    path = Path(root) / MANIFEST_NAME
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_manifest(root: Path | str) -> dict:
    path = Path(root) / MANIFEST_NAME
    return json.loads(path.read_text(encoding="utf-8"))
