import numpy as np
import pytest

from embank_extractor import Emb1Error, read_emb1, write_emb1
from embank_extractor.emb1 import read_manifest, write_manifest


def test_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    data = rng.standard_normal((3, 2, 5)).astype(np.float32)
    path = write_emb1(tmp_path, "clip_x", 2, data)
    clip_id, layer, back = read_emb1(path)
    assert (clip_id, layer) == ("clip_x", 2)
    assert back.tobytes() == data.tobytes()


def test_header_byte_layout(tmp_path):
    # fixed fields 23 bytes, then u16 length + clip id, then payload
    path = write_emb1(tmp_path, "abcd", 1, np.zeros((1, 1, 1), dtype=np.float32))
    blob = path.read_bytes()
    assert blob[:4] == b"EMB1"
    assert len(blob) == 23 + 2 + 4 + 4


def test_nonfinite_rejected(tmp_path):
    bad = np.full((1, 1, 2), np.inf, dtype=np.float32)
    with pytest.raises(Emb1Error, match="non-finite"):
        write_emb1(tmp_path, "bad", 1, bad)


def test_corruption_detected(tmp_path):
    path = write_emb1(tmp_path, "c", 1, np.ones((2, 1, 2), dtype=np.float32))
    blob = bytearray(path.read_bytes())
    blob[:4] = b"NOPE"
    path.write_bytes(bytes(blob))
    with pytest.raises(Emb1Error, match="magic"):
        read_emb1(path)

    path2 = write_emb1(tmp_path, "d", 1, np.ones((2, 1, 2), dtype=np.float32))
    path2.write_bytes(path2.read_bytes()[:-4])
    with pytest.raises(Emb1Error, match="payload"):
        read_emb1(path2)


def test_manifest_roundtrip(tmp_path):
    clips = [
        {
            "clip_id": "a",
            "machine_type": "fan",
            "section": "00",
            "domain": "source",
            "split": "train",
            "label": "normal",
            "source_path": "a.wav",
        }
    ]
    write_manifest(tmp_path, clips, [1, 2], (6, 8, 16))
    doc = read_manifest(tmp_path)
    assert doc["clips"] == clips
    assert doc["layers_available"] == [1, 2]
    assert doc["embedding_dims"] == {"1": [6, 8, 16], "2": [6, 8, 16]}
