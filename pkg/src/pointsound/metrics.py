"""Evaluation metrics for binaural predictions.

Two distances over (2, T) clips: an STFT distance (flat L2 over the
complex spectrogram difference, summed over channels) and an envelope
distance (L2 between Hilbert envelopes, summed over channels).  Framing
uses a periodic Hann window of 23 ms with a 10 ms hop, no centering, and
drops any partial final frame.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import hilbert
from scipy.signal.windows import hann

WINDOW_SECONDS = 0.023
HOP_SECONDS = 0.010


def default_stft_params(sample_rate):
    """(window_len, hop) in samples, rounded from the millisecond defaults."""
    return (
        int(round(WINDOW_SECONDS * sample_rate)),
        int(round(HOP_SECONDS * sample_rate)),
    )


@dataclass
class Spectrogram:
    frames: np.ndarray  # complex, (bins, n_frames)
    window_len: int
    hop: int
    sample_rate: int


def stft(x, window_len, hop, sample_rate=0):
    """One-sided short-time Fourier transform of a 1-D signal."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"stft expects a 1-D signal, got shape {x.shape}")
    if window_len < 1 or hop < 1:
        raise ValueError("window_len and hop must be positive")
    if x.shape[0] < window_len:
        raise ValueError(
            f"signal of {x.shape[0]} samples is shorter than the {window_len}-sample window"
        )
    n_frames = 1 + (x.shape[0] - window_len) // hop
    idx = hop * np.arange(n_frames)[:, None] + np.arange(window_len)[None, :]
    windowed = x[idx] * hann(window_len, sym=False)
    return Spectrogram(np.fft.rfft(windowed, axis=1).T, window_len, hop, sample_rate)


def _pair_check(ref, est):
    ref = np.asarray(ref, dtype=np.float64)
    est = np.asarray(est, dtype=np.float64)
    if ref.shape != est.shape:
        raise ValueError(f"shape mismatch: {ref.shape} vs {est.shape}")
    if ref.ndim != 2:
        raise ValueError(f"expected (channels, T) clips, got shape {ref.shape}")
    return ref, est


def stft_distance(ref, est, sample_rate):
    """Sum over channels of the L2 norm of the complex spectrogram difference."""
    ref, est = _pair_check(ref, est)
    window_len, hop = default_stft_params(sample_rate)
    total = 0.0
    for c in range(ref.shape[0]):
        diff = (
            stft(ref[c], window_len, hop, sample_rate).frames
            - stft(est[c], window_len, hop, sample_rate).frames
        )
        total += float(np.linalg.norm(diff.ravel()))
    return total


def envelope(x):
    """Magnitude of the analytic signal (frequency-domain Hilbert transform)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] == 0:
        raise ValueError("envelope expects a non-empty 1-D signal")
    return np.abs(hilbert(x))


def envelope_distance(ref, est):
    """Sum over channels of the L2 norm between Hilbert envelopes."""
    ref, est = _pair_check(ref, est)
    total = 0.0
    for c in range(ref.shape[0]):
        total += float(np.linalg.norm(envelope(ref[c]) - envelope(est[c])))
    return total
