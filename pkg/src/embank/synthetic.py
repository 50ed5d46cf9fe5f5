"""Seeded synthetic embedding datasets for self-contained experiments.

Stands in for real machine-sound data: per machine type, source-domain
normals are drawn from N(0, I), target-domain normals from N(shift, I)
with far fewer clips, and anomalies are normals pushed a fixed offset along
a per-domain unit direction. The domain shift runs along axis 0; source
anomalies move along axis 1. Target anomalies move along the fixed unit
direction (-1, 0, 1, 0, ...)/sqrt(2): partly back toward the dense source
cluster, so the raw min-fusion baseline suffers the source-proximity bias
that score normalization and bank augmentation exist to fix. Embeddings are
written as (1, 1, dim) tensors so the feature vector is the draw itself.

Everything is driven by one numpy PCG64 generator seeded from the
SyntheticSpec, so a fixed seed reproduces the dataset byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .formats import EmbeddingTensor, write_embedding
from .manifest import ClipMeta, FORMAT_VERSION, Manifest, save_manifest


@dataclass(frozen=True)
class SyntheticSpec:
    machines: int = 2
    source_n: int = 990
    target_n: int = 10
    anomaly_offset: float = 3.0
    dim: int = 8
    seed: int = 0
    # fixture knobs beyond the required surface
    target_shift: float = 6.0
    test_normal_n: int = 20  # per domain per machine
    test_anomaly_n: int = 20  # per domain per machine
    layers: tuple[int, ...] = (1,)

    def __post_init__(self) -> None:
        if self.machines < 1:
            raise ValueError("need at least one machine type")
        if self.source_n < 1:
            raise ValueError("need at least one source training clip")
        if self.target_n < 0:
            raise ValueError("target_n must be >= 0")
        if self.dim < 3:
            raise ValueError("dim must be >= 3 to host the canonical offset axes")
        if not self.layers:
            raise ValueError("at least one layer required")


@dataclass(frozen=True)
class _ClipPlan:
    clip_id: str
    machine: str
    domain: str
    split: str
    label: str
    mean: np.ndarray = field(repr=False)


def _dataset_plan(spec: SyntheticSpec) -> list[_ClipPlan]:
    plan: list[_ClipPlan] = []
    shift = np.zeros(spec.dim)
    shift[0] = spec.target_shift
    target_dir = np.zeros(spec.dim)
    target_dir[0], target_dir[2] = -1.0, 1.0
    target_dir /= np.sqrt(2.0)
    offsets = {"source": np.zeros(spec.dim), "target": spec.anomaly_offset * target_dir}
    offsets["source"][1] = spec.anomaly_offset

    for m in range(spec.machines):
        machine = f"machine{m:02d}"
        domains = ["source"] + (["target"] if spec.target_n > 0 else [])

        def add(domain: str, split: str, label: str, count: int) -> None:
            center = shift if domain == "target" else np.zeros(spec.dim)
            mean = center + (offsets[domain] if label == "anomalous" else 0.0)
            for i in range(count):
                clip_id = f"{machine}_{domain}_{split}_{label}_{i:04d}"
                plan.append(
                    _ClipPlan(
                        clip_id=clip_id,
                        machine=machine,
                        domain=domain,
                        split=split,
                        label=label,
                        mean=mean,
                    )
                )

        add("source", "train", "normal", spec.source_n)
        if spec.target_n > 0:
            add("target", "train", "normal", spec.target_n)
        for domain in domains:
            add(domain, "test", "normal", spec.test_normal_n)
            add(domain, "test", "anomalous", spec.test_anomaly_n)
    return plan


def generate_dataset(spec: SyntheticSpec, root: Path | str) -> Manifest:
    """Write EMB1 embeddings plus manifest.json under root; returns the manifest."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    plan = _dataset_plan(spec)

    clips = []
    for item in plan:
        for layer in spec.layers:
            values = item.mean + rng.standard_normal(spec.dim)
            tensor = EmbeddingTensor(
                clip_id=item.clip_id,
                layer=layer,
                data=values.reshape(1, 1, spec.dim).astype(np.float32),
            )
            write_embedding(tensor, root)
        clips.append(
            ClipMeta(
                clip_id=item.clip_id,
                machine_type=item.machine,
                section="00",
                domain=item.domain,
                split=item.split,
                label=item.label,
                source_path=f"synthetic/{item.clip_id}.wav",
            )
        )

    manifest = Manifest(
        format_version=FORMAT_VERSION,
        clips=tuple(clips),
        layers_available=tuple(spec.layers),
        embedding_dims={layer: (1, 1, spec.dim) for layer in spec.layers},
    )
    save_manifest(manifest, root)
    return manifest
