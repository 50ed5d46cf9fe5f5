"""Dataset manifest: clip metadata plus the layer/dimension table.

The manifest is a UTF-8 JSON file named manifest.json at the dataset root,
with snake_case keys mirroring the ClipMeta fields. A loaded Manifest is
immutable and safe to share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DuplicateClipIdError, ManifestError, TrainLabelError
from .formats import embedding_path, read_embedding_header

FORMAT_VERSION = 1

DOMAINS = ("source", "target")
SPLITS = ("train", "test")
LABELS = ("normal", "anomalous", "unknown")

MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class ClipMeta:
    clip_id: str
    machine_type: str
    section: str
    domain: str
    split: str
    label: str
    source_path: str

    def __post_init__(self) -> None:
        if self.domain not in DOMAINS:
            raise ManifestError(f"clip {self.clip_id!r}: unknown domain {self.domain!r}")
        if self.split not in SPLITS:
            raise ManifestError(f"clip {self.clip_id!r}: unknown split {self.split!r}")
        if self.label not in LABELS:
            raise ManifestError(f"clip {self.clip_id!r}: unknown label {self.label!r}")


@dataclass(frozen=True)
class Manifest:
    format_version: int
    clips: tuple[ClipMeta, ...]
    layers_available: tuple[int, ...]
    embedding_dims: dict[int, tuple[int, int, int]]
    _by_id: dict[str, ClipMeta] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        by_id: dict[str, ClipMeta] = {}
        for clip in self.clips:
            if clip.clip_id in by_id:
                raise DuplicateClipIdError(f"duplicate clip_id {clip.clip_id!r}")
            if clip.split == "train" and clip.label != "normal":
                raise TrainLabelError(
                    f"train clip {clip.clip_id!r} labeled {clip.label!r}; "
                    "training data must be normal"
                )
            by_id[clip.clip_id] = clip
        object.__setattr__(self, "_by_id", by_id)

    def clip(self, clip_id: str) -> ClipMeta:
        return self._by_id[clip_id]

    def select(
        self,
        *,
        machine_type: str | None = None,
        domain: str | None = None,
        split: str | None = None,
        label: str | None = None,
    ) -> list[ClipMeta]:
        """Clips matching every given filter, in manifest order."""
        out = []
        for c in self.clips:
            if machine_type is not None and c.machine_type != machine_type:
                continue
            if domain is not None and c.domain != domain:
                continue
            if split is not None and c.split != split:
                continue
            if label is not None and c.label != label:
                continue
            out.append(c)
        return out

    def machine_types(self) -> list[str]:
        """Distinct machine types in first-appearance order."""
        seen: dict[str, None] = {}
        for c in self.clips:
            seen.setdefault(c.machine_type, None)
        return list(seen)


def load_manifest(path: Path | str) -> Manifest:
    """Load and validate manifest.json; order of clips is preserved."""
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"cannot parse manifest {path}: {exc}") from exc
    try:
        clips = tuple(
            ClipMeta(
                clip_id=entry["clip_id"],
                machine_type=entry["machine_type"],
                section=entry["section"],
                domain=entry["domain"],
                split=entry["split"],
                label=entry["label"],
                source_path=entry["source_path"],
            )
            for entry in raw["clips"]
        )
        manifest = Manifest(
            format_version=int(raw["format_version"]),
            clips=clips,
            layers_available=tuple(int(x) for x in raw["layers_available"]),
            embedding_dims={
                int(layer): tuple(int(d) for d in dims)
                for layer, dims in raw["embedding_dims"].items()
            },
        )
    except (KeyError, TypeError) as exc:
        raise ManifestError(f"manifest {path} missing or malformed field: {exc}") from exc
    return manifest


def save_manifest(manifest: Manifest, root: Path | str) -> Path:
    """Write manifest.json under a dataset root, deterministically ordered."""
    path = Path(root) / MANIFEST_NAME
    doc = {
        "format_version": manifest.format_version,
        "clips": [
            {
                "clip_id": c.clip_id,
                "machine_type": c.machine_type,
                "section": c.section,
                "domain": c.domain,
                "split": c.split,
                "label": c.label,
                "source_path": c.source_path,
            }
            for c in manifest.clips
        ],
        "layers_available": list(manifest.layers_available),
        "embedding_dims": {
            str(layer): list(dims) for layer, dims in sorted(manifest.embedding_dims.items())
        },
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


@dataclass(frozen=True)
class DatasetProblem:
    kind: str  # "missing_file" | "dim_mismatch" | "bad_file"
    clip_id: str
    layer: int
    message: str


@dataclass(frozen=True)
class ValidationReport:
    problems: tuple[DatasetProblem, ...]
    counts: dict[tuple[str, str, str], int]  # (machine_type, domain, split) -> n clips

    @property
    def ok(self) -> bool:
        return not self.problems


def validate_dataset(manifest: Manifest, root: Path | str) -> ValidationReport:
    """Check every referenced embedding file exists with matching dims.

    Problems are collected, never raised; the counts table tallies clips per
    (machine_type, domain, split).
    """
    root = Path(root)
    problems: list[DatasetProblem] = []
    counts: dict[tuple[str, str, str], int] = {}
    for clip in manifest.clips:
        key = (clip.machine_type, clip.domain, clip.split)
        counts[key] = counts.get(key, 0) + 1
        for layer in manifest.layers_available:
            path = embedding_path(root, clip.clip_id, layer)
            if not path.is_file():
                problems.append(
                    DatasetProblem(
                        kind="missing_file",
                        clip_id=clip.clip_id,
                        layer=layer,
                        message=f"missing embedding file {path}",
                    )
                )
                continue
            try:
                _, _, dims = read_embedding_header(path)
            except Exception as exc:
                problems.append(
                    DatasetProblem(
                        kind="bad_file", clip_id=clip.clip_id, layer=layer, message=str(exc)
                    )
                )
                continue
            expected = manifest.embedding_dims.get(layer)
            if expected is not None and tuple(dims) != tuple(expected):
                problems.append(
                    DatasetProblem(
                        kind="dim_mismatch",
                        clip_id=clip.clip_id,
                        layer=layer,
                        message=f"{path}: dims {dims} != manifest {tuple(expected)}",
                    )
                )
    return ValidationReport(problems=tuple(problems), counts=counts)
