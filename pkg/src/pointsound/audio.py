"""Audio clips and WAV file I/O (PCM-16 and 32-bit float, no resampling)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile


@dataclass
class AudioClip:
    """(channels, T) sample buffer; channels is 1 (mono) or 2 (binaural)."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        arr = np.asarray(self.samples)
        if arr.ndim == 1:
            arr = arr[None, :]
        if arr.ndim != 2 or arr.shape[0] not in (1, 2):
            raise ValueError(f"samples must be (1|2, T), got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("non-finite samples")
        self.samples = arr
        self.sample_rate = int(self.sample_rate)

    @property
    def channels(self):
        return self.samples.shape[0]

    @property
    def length(self):
        return self.samples.shape[1]

    @property
    def duration(self):
        return self.length / self.sample_rate


def read_wav(path):
    rate, data = wavfile.read(path)
    if data.dtype == np.int16:
        data = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        data = data.astype(np.float64)
    elif data.dtype == np.float64:
        pass
    else:
        raise ValueError(f"{path}: unsupported WAV sample format {data.dtype}")
    if data.ndim == 1:
        data = data[None, :]
    else:
        data = data.T
    if data.shape[0] > 2:
        raise ValueError(f"{path}: expected mono or stereo, got {data.shape[0]} channels")
    return AudioClip(data, rate)


def write_wav(path, clip, fmt="float32"):
    data = clip.samples.T
    if fmt == "float32":
        wavfile.write(path, clip.sample_rate, data.astype(np.float32))
    elif fmt == "pcm16":
        scaled = np.clip(np.round(data * 32767.0), -32768, 32767).astype(np.int16)
        wavfile.write(path, clip.sample_rate, scaled)
    else:
        raise ValueError(f"unknown WAV format {fmt!r}")
