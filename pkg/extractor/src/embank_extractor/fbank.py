"""Kaldi-style log-mel filterbank frontend.

Frames the waveform with a Povey window (the default Kaldi choice: a Hann
window raised to 0.85) of 25 ms with a 10 ms shift, snip-edges framing, DC
removal, 0.97 pre-emphasis, a 512-point FFT, and triangular mel filters on
the 1127*ln(1 + f/700) scale between 20 Hz and Nyquist. A 10 s clip at
16 kHz yields (160000 - 400) // 160 + 1 = 998 frames.
"""

from __future__ import annotations

import math

import numpy as np
import torch

PREEMPHASIS = 0.97
LOG_FLOOR = 1e-10


def povey_window(length: int) -> torch.Tensor:
    n = torch.arange(length, dtype=torch.float64)
    hann = 0.5 - 0.5 * torch.cos(2.0 * math.pi * n / (length - 1))
    return hann.pow(0.85)


def mel_scale(freq_hz):
    return 1127.0 * np.log1p(np.asarray(freq_hz, dtype=np.float64) / 700.0)


def mel_filter_weights(
    num_bins: int, n_fft: int, sample_rate: int, low_hz: float = 20.0
) -> torch.Tensor:
    """(num_bins, n_fft // 2 + 1) triangular filter matrix."""
    high_hz = sample_rate / 2.0
    mel_points = np.linspace(mel_scale(low_hz), mel_scale(high_hz), num_bins + 2)
    bin_freqs = np.arange(n_fft // 2 + 1, dtype=np.float64) * sample_rate / n_fft
    bin_mels = mel_scale(bin_freqs)
    weights = np.zeros((num_bins, bin_freqs.size), dtype=np.float64)
    for m in range(num_bins):
        left, center, right = mel_points[m], mel_points[m + 1], mel_points[m + 2]
        rising = (bin_mels - left) / (center - left)
        falling = (right - bin_mels) / (right - center)
        weights[m] = np.clip(np.minimum(rising, falling), 0.0, None)
    return torch.from_numpy(weights)


def num_frames(n_samples: int, frame_length: int, frame_shift: int) -> int:
    if n_samples < frame_length:
        return 0
    return (n_samples - frame_length) // frame_shift + 1


def log_mel_spectrogram(
    samples: np.ndarray,
    sample_rate: int = 16000,
    num_mel_bins: int = 128,
    frame_length_ms: float = 25.0,
    frame_shift_ms: float = 10.0,
) -> torch.Tensor:
    """(frames, num_mel_bins) float32 log-mel features."""
    frame_length = int(round(sample_rate * frame_length_ms / 1000.0))
    frame_shift = int(round(sample_rate * frame_shift_ms / 1000.0))
    wave = torch.from_numpy(np.ascontiguousarray(samples, dtype=np.float32)).to(torch.float64)
    n = num_frames(wave.numel(), frame_length, frame_shift)
    if n == 0:
        raise ValueError(
            f"clip of {wave.numel()} samples is shorter than one {frame_length}-sample frame"
        )
    frames = wave.unfold(0, frame_length, frame_shift)[:n].clone()
    frames -= frames.mean(dim=1, keepdim=True)
    frames[:, 1:] -= PREEMPHASIS * frames[:, :-1].clone()
    frames[:, 0] -= PREEMPHASIS * frames[:, 0]
    frames *= povey_window(frame_length)

    n_fft = 1
    while n_fft < frame_length:
        n_fft *= 2
    spectrum = torch.fft.rfft(frames, n=n_fft)
    power = spectrum.real.pow(2) + spectrum.imag.pow(2)
    mel = power @ mel_filter_weights(num_mel_bins, n_fft, sample_rate).T
    return torch.log(torch.clamp(mel, min=LOG_FLOOR)).to(torch.float32)
