"""WAV loading and length normalization.

Reads PCM 16-bit mono WAV through the stdlib wave module and returns float32
samples in [-1, 1]. Files at other sample rates are linearly resampled; that
is adequate for fixture audio, but feed native 16 kHz material for real use.
Every clip is forced to exactly clip_seconds: short clips are zero-padded at
the end, long ones center-truncated.
"""

from __future__ import annotations

import wave
from pathlib import Path

import numpy as np


class AudioReadError(ValueError):
    """WAV file is missing, malformed, or not PCM-16 mono."""


def read_wav(path: Path | str) -> tuple[np.ndarray, int]:
    """Return (samples float32 in [-1, 1], sample_rate)."""
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as fh:
            n_channels = fh.getnchannels()
            sampwidth = fh.getsampwidth()
            rate = fh.getframerate()
            frames = fh.readframes(fh.getnframes())
    except (OSError, wave.Error) as exc:
        raise AudioReadError(f"{path}: cannot read WAV ({exc})") from exc
    if sampwidth != 2:
        raise AudioReadError(f"{path}: expected 16-bit PCM, got {8 * sampwidth}-bit")
    if n_channels != 1:
        raise AudioReadError(f"{path}: expected mono, got {n_channels} channels")
    samples = np.frombuffer(frames, dtype="<i2").astype(np.float32) / 32768.0
    if samples.size == 0:
        raise AudioReadError(f"{path}: empty audio stream")
    return samples, rate


def write_wav(path: Path | str, samples: np.ndarray, rate: int) -> Path:
    """PCM-16 mono writer, mostly for tests and fixtures."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    scaled = np.round(np.asarray(samples, dtype=np.float64) * 32768.0)
    pcm = np.clip(scaled, -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(rate)
        fh.writeframes(pcm.tobytes())
    return path


def resample_linear(samples: np.ndarray, rate: int, target_rate: int) -> np.ndarray:
    if rate == target_rate:
        return samples
    n_out = int(round(samples.size * target_rate / rate))
    x_out = np.arange(n_out, dtype=np.float64) * (rate / target_rate)
    return np.interp(x_out, np.arange(samples.size, dtype=np.float64), samples).astype(
        np.float32
    )


def fit_length(samples: np.ndarray, n_samples: int) -> np.ndarray:
    """Zero-pad at the end or center-truncate to exactly n_samples."""
    if samples.size == n_samples:
        return samples
    if samples.size < n_samples:
        out = np.zeros(n_samples, dtype=np.float32)
        out[: samples.size] = samples
        return out
    start = (samples.size - n_samples) // 2
    return samples[start : start + n_samples]


def load_clip(path: Path | str, sample_rate: int, clip_seconds: float) -> np.ndarray:
    """Read, resample, and length-normalize one clip."""
    samples, rate = read_wav(path)
    samples = resample_linear(samples, rate, sample_rate)
    return fit_length(samples, int(round(sample_rate * clip_seconds)))
