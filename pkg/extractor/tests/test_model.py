import numpy as np
import pytest
import torch

from embank_extractor import CheckpointConfig, init_checkpoint, load_checkpoint
from embank_extractor.model import AudioPatchTransformer

TINY = CheckpointConfig(embed_dim=16, num_layers=3, num_heads=2, clip_seconds=1.0)


def test_patch_grid_matches_frontend():
    assert CheckpointConfig().patch_grid() == (62, 8)  # 998 frames, 128 bins, 16x16
    assert TINY.patch_grid() == (6, 8)  # 98 frames -> 6 full patch rows


def test_checkpoint_roundtrip(tmp_path):
    path = init_checkpoint(tmp_path / "ckpt", TINY, seed=1)
    model = load_checkpoint(path)
    assert model.config == TINY
    assert not any(p.requires_grad for p in model.parameters())


def test_init_is_seeded(tmp_path):
    a = load_checkpoint(init_checkpoint(tmp_path / "a", TINY, seed=5))
    b = load_checkpoint(init_checkpoint(tmp_path / "b", TINY, seed=5))
    c = load_checkpoint(init_checkpoint(tmp_path / "c", TINY, seed=6))
    for pa, pb in zip(a.parameters(), b.parameters()):
        assert torch.equal(pa, pb)
    assert any(
        not torch.equal(pa, pc) for pa, pc in zip(a.parameters(), c.parameters())
    )


def test_layer_activations_shapes(tmp_path):
    model = load_checkpoint(init_checkpoint(tmp_path / "ckpt", TINY, seed=0))
    fbank = torch.randn(98, 128)
    outs = model.layer_activations(fbank)
    assert len(outs) == 3
    for out in outs:
        assert tuple(out.shape) == (6, 8, 16)
        assert torch.isfinite(out).all()


def test_layers_actually_differ(tmp_path):
    model = load_checkpoint(init_checkpoint(tmp_path / "ckpt", TINY, seed=0))
    outs = model.layer_activations(torch.randn(98, 128))
    assert not torch.equal(outs[0], outs[1])


def test_incompatible_fbank_rejected(tmp_path):
    model = load_checkpoint(init_checkpoint(tmp_path / "ckpt", TINY, seed=0))
    with pytest.raises(ValueError, match="incompatible"):
        model.layer_activations(torch.randn(10, 128))
    with pytest.raises(ValueError, match="incompatible"):
        model.layer_activations(torch.randn(98, 64))


def test_missing_checkpoint(tmp_path):
    with pytest.raises(FileNotFoundError, match="checkpoint"):
        load_checkpoint(tmp_path / "nothing")


def test_too_small_grid_rejected():
    with pytest.raises(ValueError, match="patch"):
        AudioPatchTransformer(CheckpointConfig(clip_seconds=0.1))
