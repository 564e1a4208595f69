"""Binaural rendering from head impulse responses, plus scene mixing.

A mono source is spatialized by convolving it with a per-azimuth pair of
impulse responses and truncating back to the source length, so clip
lengths stay aligned across the pipeline.  Measured responses can be
loaded from disk; a parametric spherical-head model is the built-in
substitute.  In that model the contralateral ear receives the Woodworth
time delay realized by a 32-tap windowed-sinc fractional delay, plus a
first-order head-shadow low-pass whose strength grows with the lateral
angle.  Azimuths are counterclockwise-positive, so +x is the listener's
left.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import AudioClip, read_wav, write_wav

AZIMUTH_COUNT = 8
HEAD_RADIUS = 0.0875
SPEED_OF_SOUND = 343.0

# Fractional delays use a sinc truncated to +-16 taps under a Hann taper.
SINC_HALF_TAPS = 16

# Two-tap shadow filter coefficient at a fully lateral source.  Kept below
# 0.5 so the filter stays minimum-phase.
SHADOW_MAX = 0.35


def azimuth_of_index(k):
    """Angle in radians of slot k on the 8-position horizontal grid."""
    if not 0 <= k < AZIMUTH_COUNT:
        raise ValueError(f"azimuth index must be in 0..{AZIMUTH_COUNT - 1}, got {k}")
    return k * (2.0 * np.pi / AZIMUTH_COUNT)


@dataclass(frozen=True)
class Placement:
    """One source in a scene: which instrument, from where."""

    instrument: str
    azimuth_k: int
    distance: float

    def __post_init__(self):
        if not 0 <= self.azimuth_k < AZIMUTH_COUNT:
            raise ValueError(f"azimuth index out of range: {self.azimuth_k}")
        if not 1.0 <= self.distance <= 3.0:
            raise ValueError(f"distance must lie in [1, 3] m, got {self.distance}")


@dataclass(frozen=True)
class SceneSpec:
    """Placements for 1 to 3 sources plus the audio clip length.

    Azimuth slots must be distinct within a scene.  Distance is recorded
    for scene geometry but has no acoustic effect: the renderer uses one
    response set regardless of range, and no attenuation is applied.
    """

    sources: tuple
    clip_seconds: float

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))
        n = len(self.sources)
        if not 1 <= n <= 3:
            raise ValueError(f"scene must hold 1..3 sources, got {n}")
        slots = [p.azimuth_k for p in self.sources]
        if len(set(slots)) != n:
            raise ValueError(f"azimuth slots must be distinct, got {slots}")
        if not self.clip_seconds > 0:
            raise ValueError("clip_seconds must be positive")

    @property
    def n_sources(self):
        return len(self.sources)

    def to_json(self):
        return {
            "sources": [
                {"instrument": p.instrument, "azimuth_k": p.azimuth_k, "distance": p.distance}
                for p in self.sources
            ],
            "clip_seconds": self.clip_seconds,
        }

    @staticmethod
    def from_json(obj):
        sources = tuple(
            Placement(s["instrument"], int(s["azimuth_k"]), float(s["distance"]))
            for s in obj["sources"]
        )
        return SceneSpec(sources, float(obj["clip_seconds"]))


@dataclass
class HRIRSet:
    """Left/right impulse-response pairs for the 8 azimuth slots.

    entries maps slot index k (angle k*pi/4) to a (left, right) pair of
    1-D float64 arrays.  All responses share one length and the set's
    sample rate.
    """

    sample_rate: int
    entries: dict

    def __post_init__(self):
        missing = [k for k in range(AZIMUTH_COUNT) if k not in self.entries]
        if missing:
            raise ValueError(f"HRIR set missing azimuth slots {missing}")
        lengths = set()
        for k, (left, right) in self.entries.items():
            left = np.asarray(left, dtype=np.float64)
            right = np.asarray(right, dtype=np.float64)
            if left.ndim != 1 or right.ndim != 1:
                raise ValueError(f"impulse responses must be 1-D (slot {k})")
            self.entries[k] = (left, right)
            lengths.add(left.shape[0])
            lengths.add(right.shape[0])
        if len(lengths) != 1:
            raise ValueError(f"impulse responses must share one length, got {sorted(lengths)}")

    @property
    def ir_length(self):
        left, _ = self.entries[0]
        return left.shape[0]


def woodworth_itd(azimuth, head_radius=HEAD_RADIUS, c=SPEED_OF_SOUND):
    """Interaural time delay in seconds for a rigid-sphere head.

    Evaluates (r/c)(ang + sin ang) with the azimuth folded to [0, pi/2],
    so sources behind the head mirror those in front.
    """
    wrapped = float(np.arctan2(np.sin(azimuth), np.cos(azimuth)))
    folded = abs(wrapped)
    if folded > np.pi / 2.0:
        folded = np.pi - folded
    return (head_radius / c) * (folded + np.sin(folded))


def _fractional_delay(delay, length):
    """Windowed-sinc impulse realizing a possibly fractional sample delay.

    Integer delays reduce to an exact unit impulse because the sinc hits
    its zero crossings on the grid and the taper is 1 at its center.
    """
    t = np.arange(length, dtype=np.float64) - delay
    taper = np.where(
        np.abs(t) < SINC_HALF_TAPS,
        0.5 * (1.0 + np.cos(np.pi * t / SINC_HALF_TAPS)),
        0.0,
    )
    return np.sinc(t) * taper


def spherical_head_hrir(azimuth, fs, head_radius=HEAD_RADIUS, c=SPEED_OF_SOUND):
    """Impulse-response pair (left, right) for a rigid-sphere head model.

    The interaural delay follows Woodworth's formula (r/c)(ang + sin ang)
    with the azimuth folded to [0, pi/2]; the far ear also passes through
    a two-tap shadow low-pass.  The shadow filter contributes its own
    group delay (its coefficient, in samples, at DC), which is subtracted
    from the sinc delay so the interaural lag stays on the Woodworth
    value.  Sources behind the head mirror those in front, and azimuths 0
    and pi yield identical ears.
    """
    if fs <= 0:
        raise ValueError(f"sample rate must be positive, got {fs}")
    wrapped = float(np.arctan2(np.sin(azimuth), np.cos(azimuth)))
    folded = abs(wrapped)
    if folded > np.pi / 2.0:
        folded = np.pi - folded
    itd = woodworth_itd(azimuth, head_radius, c)
    shadow = SHADOW_MAX * np.sin(folded)

    near_delay = float(SINC_HALF_TAPS)
    far_delay = near_delay + itd * fs - shadow
    max_itd = (head_radius / c) * (np.pi / 2.0 + 1.0)
    length = int(np.ceil(near_delay + max_itd * fs)) + SINC_HALF_TAPS + 4

    near = _fractional_delay(near_delay, length)
    far = _fractional_delay(far_delay, length)
    shadowed = (1.0 - shadow) * far
    shadowed[1:] += shadow * far[:-1]

    if wrapped >= 0.0:
        return near, shadowed
    return shadowed, near


def make_spherical_hrir_set(fs, head_radius=HEAD_RADIUS, c=SPEED_OF_SOUND):
    """Spherical-head HRIRSet covering all 8 azimuth slots."""
    entries = {}
    for k in range(AZIMUTH_COUNT):
        entries[k] = spherical_head_hrir(azimuth_of_index(k), fs, head_radius, c)
    return HRIRSet(int(fs), entries)


def render_binaural(source, azimuth_k, hrirs):
    """Spatialize a mono clip to the given azimuth slot.

    Each channel is the full convolution of the source with the matching
    impulse response, truncated to the source length.
    """
    if source.channels != 1:
        raise ValueError("render_binaural expects a mono source")
    if source.sample_rate != hrirs.sample_rate:
        raise ValueError(
            f"sample-rate mismatch: source {source.sample_rate} Hz, "
            f"HRIR set {hrirs.sample_rate} Hz"
        )
    if azimuth_k not in hrirs.entries:
        raise ValueError(f"azimuth slot {azimuth_k} not present in the HRIR set")
    s = source.samples[0].astype(np.float64)
    left_ir, right_ir = hrirs.entries[azimuth_k]
    n = source.length
    left = np.convolve(s, left_ir)[:n]
    right = np.convolve(s, right_ir)[:n]
    return AudioClip(np.stack([left, right]), source.sample_rate)


def mix_scene(sources, spec, hrirs):
    """Render and sum the scene's sources.

    Returns (s_m, s_b): the binaural mixture s_b is the sum of the
    per-source renders, and the mono mixture s_m is the sum of the two
    binaural channels.
    """
    if len(sources) != spec.n_sources:
        raise ValueError(
            f"scene spec lists {spec.n_sources} sources, got {len(sources)} clips"
        )
    rates = {clip.sample_rate for clip in sources}
    if len(rates) != 1:
        raise ValueError(f"sources must share one sample rate, got {sorted(rates)}")
    lengths = {clip.length for clip in sources}
    if len(lengths) != 1:
        raise ValueError(f"sources must share one length, got {sorted(lengths)}")

    total = np.zeros((2, lengths.pop()), dtype=np.float64)
    for clip, placement in zip(sources, spec.sources):
        total += render_binaural(clip, placement.azimuth_k, hrirs).samples
    rate = rates.pop()
    s_b = AudioClip(total, rate)
    s_m = AudioClip((total[0] + total[1])[None, :], rate)
    return s_m, s_b


def write_hrir_dir(path, hrirs):
    """Store an HRIR set as stereo WAVs plus an index.json slot map."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    index = {}
    for k in range(AZIMUTH_COUNT):
        degrees = str(k * 45)
        name = f"az{degrees}.wav"
        left, right = hrirs.entries[k]
        write_wav(path / name, AudioClip(np.stack([left, right]), hrirs.sample_rate))
        index[degrees] = name
    with open(path / "index.json", "w") as fh:
        json.dump(index, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_hrir_dir(path):
    """Load an HRIR set from a directory with an index.json slot map."""
    path = Path(path)
    index_path = path / "index.json"
    if not index_path.is_file():
        raise FileNotFoundError(f"no index.json under {path}")
    with open(index_path) as fh:
        index = json.load(fh)

    entries = {}
    rate = None
    for k in range(AZIMUTH_COUNT):
        degrees = str(k * 45)
        if degrees not in index:
            raise ValueError(f"index.json missing azimuth '{degrees}'")
        clip = read_wav(path / index[degrees])
        if clip.channels != 2:
            raise ValueError(f"HRIR file for azimuth {degrees} is not stereo")
        if rate is None:
            rate = clip.sample_rate
        elif clip.sample_rate != rate:
            raise ValueError(
                f"sample-rate mismatch in HRIR set: {clip.sample_rate} vs {rate}"
            )
        entries[k] = (
            clip.samples[0].astype(np.float64),
            clip.samples[1].astype(np.float64),
        )
    return HRIRSet(rate, entries)
