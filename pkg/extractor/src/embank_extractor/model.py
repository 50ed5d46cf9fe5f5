"""Frozen audio patch transformer and its on-disk checkpoint format.

The model is a plain ViT-style encoder over non-overlapping 16x16 patches of
the log-mel spectrogram: a conv patch embedding, learned positional
embeddings, and a stack of pre-norm transformer encoder layers. A checkpoint
is a directory holding config.json (architecture plus the acoustic frontend
settings and the normalization constants baked into the recipe) and
weights.pt (the state dict). Inference only; nothing here trains.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import torch
from torch import nn

from .fbank import num_frames

CONFIG_NAME = "config.json"
WEIGHTS_NAME = "weights.pt"


@dataclass(frozen=True)
class CheckpointConfig:
    embed_dim: int = 32
    num_layers: int = 2
    num_heads: int = 4
    mlp_ratio: float = 2.0
    patch_size: int = 16
    mel_bins: int = 128
    sample_rate: int = 16000
    clip_seconds: float = 10.0
    frame_length_ms: float = 25.0
    frame_shift_ms: float = 10.0
    fbank_mean: float = 0.0
    fbank_std: float = 1.0

    def frame_count(self) -> int:
        frame_length = int(round(self.sample_rate * self.frame_length_ms / 1000.0))
        frame_shift = int(round(self.sample_rate * self.frame_shift_ms / 1000.0))
        return num_frames(
            int(round(self.sample_rate * self.clip_seconds)), frame_length, frame_shift
        )

    def patch_grid(self) -> tuple[int, int]:
        """(time patches, frequency patches) for a full-length clip."""
        return self.frame_count() // self.patch_size, self.mel_bins // self.patch_size


class AudioPatchTransformer(nn.Module):
    def __init__(self, config: CheckpointConfig):
        super().__init__()
        self.config = config
        grid_t, grid_f = config.patch_grid()
        if grid_t < 1 or grid_f < 1:
            raise ValueError("clip too short or too few mel bins for one patch")
        self.patch_embed = nn.Conv2d(
            1, config.embed_dim, kernel_size=config.patch_size, stride=config.patch_size
        )
        self.pos_embed = nn.Parameter(torch.zeros(grid_t * grid_f, config.embed_dim))
        self.layers = nn.ModuleList(
            nn.TransformerEncoderLayer(
                d_model=config.embed_dim,
                nhead=config.num_heads,
                dim_feedforward=int(config.embed_dim * config.mlp_ratio),
                dropout=0.0,
                batch_first=True,
                norm_first=True,
            )
            for _ in range(config.num_layers)
        )

    @torch.inference_mode()
    def layer_activations(self, fbank: torch.Tensor) -> list[torch.Tensor]:
        """Per-layer token activations for one clip, each (grid_t, grid_f, C).

        fbank is (frames, mel_bins), already normalized; frames beyond the
        last full patch row are dropped, undoing the time-frequency
        flattening the encoder works on.
        """
        grid_t, grid_f = self.config.patch_grid()
        frames_used = grid_t * self.config.patch_size
        if fbank.shape[0] < frames_used or fbank.shape[1] != self.config.mel_bins:
            raise ValueError(
                f"fbank shape {tuple(fbank.shape)} incompatible with patch grid "
                f"({frames_used} frames x {self.config.mel_bins} bins required)"
            )
        x = fbank[:frames_used].unsqueeze(0).unsqueeze(0)  # (1, 1, frames, mels)
        tokens = self.patch_embed(x)  # (1, C, grid_t, grid_f)
        tokens = tokens.flatten(2).transpose(1, 2)  # (1, grid_t*grid_f, C)
        tokens = tokens + self.pos_embed
        outputs = []
        for layer in self.layers:
            tokens = layer(tokens)
            outputs.append(
                tokens.squeeze(0).reshape(grid_t, grid_f, self.config.embed_dim).clone()
            )
        return outputs


def save_checkpoint(model: AudioPatchTransformer, path: Path | str) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    (path / CONFIG_NAME).write_text(
        json.dumps(asdict(model.config), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    torch.save(model.state_dict(), path / WEIGHTS_NAME)
    return path


def load_checkpoint(path: Path | str) -> AudioPatchTransformer:
    path = Path(path)
    config_path = path / CONFIG_NAME
    weights_path = path / WEIGHTS_NAME
    if not config_path.is_file() or not weights_path.is_file():
        raise FileNotFoundError(f"{path}: not a checkpoint directory (need config.json + weights.pt)")
    config = CheckpointConfig(**json.loads(config_path.read_text(encoding="utf-8")))
    model = AudioPatchTransformer(config)
    state = torch.load(weights_path, map_location="cpu", weights_only=True)
    model.load_state_dict(state)
    model.eval()
    for param in model.parameters():
        param.requires_grad_(False)
    return model


def init_checkpoint(path: Path | str, config: CheckpointConfig | None = None, seed: int = 0) -> Path:
    """Write a freshly initialized frozen checkpoint (fixtures, smoke tests)."""
    config = config or CheckpointConfig()
    torch.manual_seed(seed)
    model = AudioPatchTransformer(config)
    with torch.no_grad():
        model.pos_embed.normal_(std=0.02)
    return save_checkpoint(model, path)
