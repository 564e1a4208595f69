"""STFT and Hilbert-envelope distances against independent DSP oracles."""

import numpy as np
import pytest

from pointsound.audio import AudioClip
from pointsound.binaural import make_spherical_hrir_set, render_binaural
from pointsound.metrics import (
    Spectrogram,
    default_stft_params,
    envelope,
    envelope_distance,
    stft,
    stft_distance,
)


def naive_spectrogram(x, window_len, hop):
    """O(n^2) reference: explicit frames, explicit window, explicit DFT sums."""
    n_frames = 1 + (len(x) - window_len) // hop
    n = np.arange(window_len)
    window = 0.5 - 0.5 * np.cos(2.0 * np.pi * n / window_len)
    bins = window_len // 2 + 1
    frames = np.zeros((bins, n_frames), dtype=np.complex128)
    for f in range(n_frames):
        chunk = x[f * hop : f * hop + window_len] * window
        for k in range(bins):
            frames[k, f] = np.sum(chunk * np.exp(-2j * np.pi * k * n / window_len))
    return frames


def lateral_clip(fs=8000, seconds=0.5, slot=2, seed=0):
    rng = np.random.default_rng(seed)
    src = AudioClip(rng.standard_normal(int(fs * seconds))[None, :], fs)
    return render_binaural(src, slot, make_spherical_hrir_set(fs)).samples


class TestStft:
    def test_default_params(self):
        assert default_stft_params(8000) == (184, 80)
        assert default_stft_params(44100) == (1014, 441)

    def test_shapes(self):
        spec = stft(np.zeros(400), 64, 32, sample_rate=8000)
        assert isinstance(spec, Spectrogram)
        assert spec.frames.shape == (33, 11)
        assert spec.window_len == 64
        assert spec.hop == 32
        assert spec.sample_rate == 8000

    def test_dc_signal(self):
        # a periodic Hann window has exactly three nonzero DFT coefficients,
        # so a constant input puts M/2 in bin 0, -M/4 in bin 1, nothing else
        spec = stft(np.ones(400), 64, 32)
        assert np.abs(spec.frames[0] - 32.0).max() < 1e-9
        assert np.abs(spec.frames[1] - (-16.0)).max() < 1e-9
        assert np.abs(spec.frames[2:]).max() < 1e-10 * 32.0

    def test_exact_bin_sinusoid(self):
        m, hop, k0 = 64, 32, 8
        t = np.arange(12 * m)
        x = np.sin(2.0 * np.pi * k0 * t / m)
        spec = stft(x, m, hop)
        mags = np.abs(spec.frames)
        assert np.all(np.argmax(mags, axis=0) == k0)
        assert mags[k0] == pytest.approx(m / 4.0, rel=1e-9)
        assert mags[k0 - 1] == pytest.approx(m / 8.0, rel=1e-9)
        assert mags[k0 + 1] == pytest.approx(m / 8.0, rel=1e-9)
        outside = np.delete(mags, [k0 - 1, k0, k0 + 1], axis=0)
        assert outside.max() < 1e-10 * mags[k0].max()

    def test_matches_naive_dft(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal(512)
        spec = stft(x, 64, 32)
        oracle = naive_spectrogram(x, 64, 32)
        assert spec.frames.shape == oracle.shape
        scale = np.abs(oracle).max()
        assert np.abs(spec.frames - oracle).max() < 1e-9 * scale

    def test_short_signal_rejected(self):
        with pytest.raises(ValueError):
            stft(np.zeros(50), 64, 32)

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            stft(np.zeros((2, 100)), 64, 32)
        with pytest.raises(ValueError):
            stft(np.zeros(100), 0, 32)
        with pytest.raises(ValueError):
            stft(np.zeros(100), 64, 0)


class TestStftDistance:
    def test_identical_is_zero(self):
        s = lateral_clip()
        assert stft_distance(s, s, 8000) == 0.0

    def test_zero_estimate_equals_reference_norm(self):
        s = lateral_clip()
        window_len, hop = default_stft_params(8000)
        expected = sum(
            np.linalg.norm(stft(s[c], window_len, hop).frames.ravel())
            for c in range(2)
        )
        assert stft_distance(s, np.zeros_like(s), 8000) == pytest.approx(
            expected, rel=1e-12
        )

    def test_channel_swap_is_worse(self):
        s = lateral_clip()
        assert stft_distance(s, s[::-1], 8000) > 0.0

    def test_symmetry_and_nonnegativity(self):
        rng = np.random.default_rng(2)
        a = rng.standard_normal((2, 2000))
        b = rng.standard_normal((2, 2000))
        assert stft_distance(a, b, 8000) == stft_distance(b, a, 8000)
        assert stft_distance(a, b, 8000) > 0.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            stft_distance(np.zeros((2, 2000)), np.zeros((2, 1999)), 8000)
        with pytest.raises(ValueError):
            stft_distance(np.zeros(2000), np.zeros(2000), 8000)


class TestEnvelope:
    def test_sinusoid_amplitude(self):
        fs, amp = 8000, 0.7
        t = np.arange(fs) / fs
        env = envelope(amp * np.sin(2.0 * np.pi * 220.0 * t))
        edge = int(0.05 * len(env))
        interior = env[edge:-edge]
        assert np.abs(interior - amp).max() < 1e-3

    def test_constant_signal(self):
        assert np.abs(envelope(np.full(256, 0.4)) - 0.4).max() < 1e-12
        assert np.abs(envelope(np.full(256, -0.4)) - 0.4).max() < 1e-12

    def test_am_tone_recovers_modulator(self):
        fs = 8000
        t = np.arange(fs) / fs
        modulator = 1.0 + 0.5 * np.cos(2.0 * np.pi * 20.0 * t)
        x = modulator * np.sin(2.0 * np.pi * 1000.0 * t)
        env = envelope(x)
        edge = int(0.05 * len(env))
        assert np.abs(env - modulator)[edge:-edge].max() < 1e-2

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            envelope(np.zeros(0))


class TestEnvelopeDistance:
    def test_identical_is_zero(self):
        s = lateral_clip()
        assert envelope_distance(s, s) == 0.0

    def test_polarity_flip_is_zero(self):
        s = lateral_clip()
        assert envelope_distance(s, -s) == 0.0

    def test_doubling_equals_reference_envelope_norm(self):
        s = lateral_clip()
        expected = sum(np.linalg.norm(envelope(s[c])) for c in range(2))
        assert envelope_distance(s, 2.0 * s) == pytest.approx(expected, rel=1e-12)

    def test_channel_swap_is_worse(self):
        s = lateral_clip()
        assert envelope_distance(s, s[::-1]) > 0.0

    def test_symmetry_and_nonnegativity(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal((2, 2000))
        b = rng.standard_normal((2, 2000))
        assert envelope_distance(a, b) == envelope_distance(b, a)
        assert envelope_distance(a, b) > 0.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            envelope_distance(np.zeros((2, 100)), np.zeros((2, 99)))
