"""Batch WAV-to-EMB1 extraction and dataset verification.

extract() walks a clip listing, runs every decodable clip through the
frontend and the frozen transformer, and writes one EMB1 file per requested
layer plus a manifest. Unreadable clips are logged and skipped, never
fatal. With deterministic=True (the default) torch runs single-threaded so
re-extraction reproduces identical bytes.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .audio import AudioReadError, load_clip
from .emb1 import embedding_path, read_emb1, read_manifest, write_emb1, write_manifest
from .fbank import log_mel_spectrogram
from .model import AudioPatchTransformer, load_checkpoint

log = logging.getLogger(__name__)

CLIP_FIELDS = ("clip_id", "machine_type", "section", "domain", "split", "label", "source_path")


@dataclass(frozen=True)
class ExtractionSpec:
    audio_root: str
    checkpoint: str
    output_root: str
    layers: tuple[int, ...] = (1,)

    def __post_init__(self) -> None:
        if not self.layers:
            raise ValueError("at least one layer must be requested")
        if min(self.layers) < 1:
            raise ValueError("layers are numbered from 1")


@dataclass(frozen=True)
class ExtractionResult:
    written: int
    skipped: tuple[str, ...]
    dims: tuple[int, int, int]
    layers: tuple[int, ...]


def load_clip_listing(path: Path | str) -> list[dict]:
    """Clip metadata from a manifest-style JSON file ({"clips": [...]})."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    clips = doc["clips"] if isinstance(doc, dict) else doc
    out = []
    for entry in clips:
        missing = [k for k in CLIP_FIELDS if k not in entry]
        if missing:
            raise ValueError(f"clip entry {entry.get('clip_id')!r} missing fields {missing}")
        out.append({k: entry[k] for k in CLIP_FIELDS})
    return out


def _clip_features(model: AudioPatchTransformer, wav_path: Path) -> torch.Tensor:
    cfg = model.config
    samples = load_clip(wav_path, cfg.sample_rate, cfg.clip_seconds)
    fbank = log_mel_spectrogram(
        samples,
        sample_rate=cfg.sample_rate,
        num_mel_bins=cfg.mel_bins,
        frame_length_ms=cfg.frame_length_ms,
        frame_shift_ms=cfg.frame_shift_ms,
    )
    return (fbank - cfg.fbank_mean) / cfg.fbank_std


def extract(
    spec: ExtractionSpec, clips: list[dict], *, deterministic: bool = True
) -> ExtractionResult:
    model = load_checkpoint(spec.checkpoint)
    bad = [l for l in spec.layers if l > model.config.num_layers]
    if bad:
        raise ValueError(
            f"layers {bad} out of range; checkpoint has {model.config.num_layers} layers"
        )
    grid_t, grid_f = model.config.patch_grid()
    dims = (grid_t, grid_f, model.config.embed_dim)

    old_threads = torch.get_num_threads()
    if deterministic:
        torch.set_num_threads(1)
    written_clips, skipped = [], []
    try:
        for clip in clips:
            wav_path = Path(spec.audio_root) / clip["source_path"]
            try:
                fbank = _clip_features(model, wav_path)
            except (AudioReadError, FileNotFoundError) as exc:
                log.warning("skipping %s: %s", clip["clip_id"], exc)
                skipped.append(clip["clip_id"])
                continue
            activations = model.layer_activations(fbank)
            for layer in spec.layers:
                write_emb1(
                    spec.output_root,
                    clip["clip_id"],
                    layer,
                    activations[layer - 1].numpy(),
                )
            written_clips.append(clip)
    finally:
        torch.set_num_threads(old_threads)

    write_manifest(spec.output_root, written_clips, list(spec.layers), dims)
    return ExtractionResult(
        written=len(written_clips),
        skipped=tuple(skipped),
        dims=dims,
        layers=tuple(spec.layers),
    )


@dataclass(frozen=True)
class VerifyReport:
    checked: int
    problems: tuple[str, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.problems


def verify_roundtrip(dataset_root: Path | str) -> VerifyReport:
    """Re-read every EMB1 file and cross-check it against the manifest."""
    root = Path(dataset_root)
    doc = read_manifest(root)
    problems = []
    checked = 0
    for clip in doc["clips"]:
        for layer in doc["layers_available"]:
            path = embedding_path(root, clip["clip_id"], layer)
            checked += 1
            try:
                clip_id, file_layer, data = read_emb1(path)
            except (OSError, ValueError) as exc:
                problems.append(f"{path}: {exc}")
                continue
            if clip_id != clip["clip_id"]:
                problems.append(f"{path}: header clip_id {clip_id!r} != manifest")
            if file_layer != layer:
                problems.append(f"{path}: header layer {file_layer} != {layer}")
            expected = tuple(doc["embedding_dims"][str(layer)])
            if data.shape != expected:
                problems.append(f"{path}: dims {data.shape} != manifest {expected}")
            if not np.isfinite(data).all():
                problems.append(f"{path}: non-finite values")
    return VerifyReport(checked=checked, problems=tuple(problems))
