import json

import numpy as np
import pytest

from embank import (
    ClipMeta,
    DuplicateClipIdError,
    EmbeddingTensor,
    Manifest,
    ManifestError,
    TrainLabelError,
    load_manifest,
    save_manifest,
    validate_dataset,
    write_embedding,
)
from embank.manifest import FORMAT_VERSION
from embank.synthetic import SyntheticSpec, generate_dataset


def _clip(clip_id, **kw):
    base = dict(
        clip_id=clip_id,
        machine_type="fan",
        section="00",
        domain="source",
        split="train",
        label="normal",
        source_path=f"{clip_id}.wav",
    )
    base.update(kw)
    return ClipMeta(**base)


def _manifest(clips, layers=(1,), dims=(1, 1, 3)):
    return Manifest(
        format_version=FORMAT_VERSION,
        clips=tuple(clips),
        layers_available=tuple(layers),
        embedding_dims={layer: dims for layer in layers},
    )


def test_roundtrip_preserves_order(tmp_path):
    clips = [_clip("b"), _clip("a"), _clip("c", split="test", label="anomalous")]
    save_manifest(_manifest(clips), tmp_path)
    loaded = load_manifest(tmp_path)
    assert [c.clip_id for c in loaded.clips] == ["b", "a", "c"]
    assert loaded.embedding_dims == {1: (1, 1, 3)}


def test_load_is_deterministic(tmp_path):
    clips = [_clip("a"), _clip("b")]
    save_manifest(_manifest(clips), tmp_path)
    text_1 = (tmp_path / "manifest.json").read_text()
    save_manifest(load_manifest(tmp_path), tmp_path)
    assert (tmp_path / "manifest.json").read_text() == text_1


def test_duplicate_clip_id():
    with pytest.raises(DuplicateClipIdError):
        _manifest([_clip("dup"), _clip("dup")])


def test_train_clip_must_be_normal():
    with pytest.raises(TrainLabelError):
        _manifest([_clip("bad", label="anomalous")])
    with pytest.raises(TrainLabelError):
        _manifest([_clip("bad2", label="unknown")])


def test_unknown_enum_values_rejected():
    with pytest.raises(ManifestError):
        _clip("x", domain="middle")
    with pytest.raises(ManifestError):
        _clip("x", split="dev")
    with pytest.raises(ManifestError):
        _clip("x", label="broken")


def test_parse_error(tmp_path):
    (tmp_path / "manifest.json").write_text("{not json")
    with pytest.raises(ManifestError, match="cannot parse"):
        load_manifest(tmp_path)


def test_missing_field(tmp_path):
    (tmp_path / "manifest.json").write_text(json.dumps({"format_version": 1, "clips": [{}]}))
    with pytest.raises(ManifestError, match="missing or malformed"):
        load_manifest(tmp_path)


def test_select_filters():
    clips = [
        _clip("t1"),
        _clip("t2", domain="target"),
        _clip("e1", split="test", label="anomalous", domain="target"),
    ]
    m = _manifest(clips)
    assert [c.clip_id for c in m.select(domain="target")] == ["t2", "e1"]
    assert [c.clip_id for c in m.select(split="test", label="anomalous")] == ["e1"]
    assert m.machine_types() == ["fan"]


def test_validate_complete_dataset(tmp_path):
    clips = []
    for i in range(3):
        cid = f"clip{i}"
        clips.append(_clip(cid))
        write_embedding(
            EmbeddingTensor(cid, 1, np.full((1, 1, 3), float(i), dtype=np.float32)), tmp_path
        )
    m = _manifest(clips)
    save_manifest(m, tmp_path)
    report = validate_dataset(m, tmp_path)
    assert report.ok
    assert report.counts == {("fan", "source", "train"): 3}


def test_validate_names_missing_clip_and_layer(tmp_path):
    clips = [_clip("present"), _clip("absent")]
    write_embedding(
        EmbeddingTensor("present", 1, np.zeros((1, 1, 3), dtype=np.float32)), tmp_path
    )
    report = validate_dataset(_manifest(clips), tmp_path)
    assert not report.ok
    assert len(report.problems) == 1
    problem = report.problems[0]
    assert problem.kind == "missing_file"
    assert problem.clip_id == "absent"
    assert problem.layer == 1


def test_validate_flags_dim_mismatch(tmp_path):
    clips = [_clip("odd")]
    write_embedding(EmbeddingTensor("odd", 1, np.zeros((1, 1, 4), dtype=np.float32)), tmp_path)
    report = validate_dataset(_manifest(clips), tmp_path)
    assert [p.kind for p in report.problems] == ["dim_mismatch"]


def test_imbalanced_domain_counts(tmp_path):
    # 990 source / 10 target training clips per machine type
    spec = SyntheticSpec(
        machines=1, source_n=990, target_n=10, dim=4, seed=0, test_normal_n=5, test_anomaly_n=5
    )
    manifest = generate_dataset(spec, tmp_path)
    report = validate_dataset(manifest, tmp_path)
    assert report.ok
    assert report.counts[("machine00", "source", "train")] == 990
    assert report.counts[("machine00", "target", "train")] == 10
