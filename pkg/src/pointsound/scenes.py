"""Procedural audio-visual example factory.

Builds synthetic musician point clouds (a person-shaped cluster plus a
class-distinctive instrument primitive), applies the training-time cloud
augmentations, places musicians on the 8-slot azimuth grid facing the
listener, and pairs each scene with synthesized instrument audio rendered
to binaural ground truth.  Everything is deterministic given seeds, and
examples derive independent seeds from a master seed so splits stay
disjoint and generation can be parallelized.

Body frame convention: the face direction is +z, stature is +y, side is
+x.  Scene frame: the listener sits at the origin, +x is the listener's
left, and azimuths grow counterclockwise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import AudioClip, read_wav, write_wav
from .binaural import (
    AZIMUTH_COUNT,
    HRIRSet,
    Placement,
    SceneSpec,
    azimuth_of_index,
    make_spherical_hrir_set,
    mix_scene,
)
from .cloud import PointCloud, read_cloud, write_cloud

INSTRUMENT_CLASSES = ("cello", "doublebass", "guitar", "saxophone", "violin")

SPLITS = ("train", "val", "test")


# ---------------------------------------------------------------------------
# Color space helpers (vectorized over (n, 3) arrays, values in [0, 1]).


def rgb_to_hsv(rgb):
    rgb = np.asarray(rgb, dtype=np.float64)
    r, g, b = rgb[:, 0], rgb[:, 1], rgb[:, 2]
    maxc = rgb.max(axis=1)
    minc = rgb.min(axis=1)
    spread = maxc - minc
    v = maxc
    s = np.where(maxc > 0.0, spread / np.where(maxc > 0.0, maxc, 1.0), 0.0)
    safe = np.where(spread > 0.0, spread, 1.0)
    rc = (maxc - r) / safe
    gc = (maxc - g) / safe
    bc = (maxc - b) / safe
    h = np.where(
        maxc == r, bc - gc, np.where(maxc == g, 2.0 + rc - bc, 4.0 + gc - rc)
    )
    h = np.where(spread > 0.0, (h / 6.0) % 1.0, 0.0)
    return np.stack([h, s, v], axis=1)


def hsv_to_rgb(hsv):
    hsv = np.asarray(hsv, dtype=np.float64)
    h, s, v = hsv[:, 0], hsv[:, 1], hsv[:, 2]
    sector = np.floor(h * 6.0)
    f = h * 6.0 - sector
    sector = sector.astype(np.int64) % 6
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    r = np.choose(sector, [v, q, p, p, t, v])
    g = np.choose(sector, [t, v, v, q, p, p])
    b = np.choose(sector, [p, p, t, v, v, q])
    return np.stack([r, g, b], axis=1)


# ---------------------------------------------------------------------------
# Musician clouds.


def _shell(rng, n, center, radii):
    """Points on an ellipsoid surface."""
    d = rng.standard_normal((n, 3))
    d /= np.maximum(np.linalg.norm(d, axis=1, keepdims=True), 1e-12)
    return np.asarray(center, dtype=np.float64) + d * np.asarray(radii)


def _rod(rng, n, p0, p1, radius):
    """Points along a thick segment from p0 to p1."""
    p0 = np.asarray(p0, dtype=np.float64)
    p1 = np.asarray(p1, dtype=np.float64)
    t = rng.uniform(0.0, 1.0, n)[:, None]
    return p0 + t * (p1 - p0) + rng.standard_normal((n, 3)) * radius


def _paint(rng, n, color, shade=0.08):
    """n copies of a base color with a mild per-point brightness jitter."""
    base = np.asarray(color, dtype=np.float64)
    gain = rng.uniform(1.0 - shade, 1.0, n)[:, None]
    return np.clip(base * gain, 0.0, 1.0)


def _body_points(rng):
    """Person-shaped cluster: torso, head with a skin-toned front, limbs."""
    pts = []
    cols = []

    shirt = np.array([0.2, 0.3, 0.65]) + rng.uniform(-0.08, 0.08, 3)
    pants = np.array([0.15, 0.15, 0.18])
    skin = np.array([0.87, 0.72, 0.6])
    hair = np.array([0.22, 0.14, 0.08])

    torso = _shell(rng, 760, (0.0, 1.2, 0.0), (0.21, 0.33, 0.13))
    pts.append(torso)
    cols.append(_paint(rng, len(torso), np.clip(shirt, 0.0, 1.0)))

    head = _shell(rng, 300, (0.0, 1.68, 0.0), (0.1, 0.12, 0.11))
    front = head[:, 2] > 0.0
    head_cols = np.empty((len(head), 3))
    head_cols[front] = _paint(rng, int(front.sum()), skin)
    head_cols[~front] = _paint(rng, int((~front).sum()), hair)
    pts.append(head)
    cols.append(head_cols)

    for side in (-1.0, 1.0):
        leg = _rod(rng, 190, (0.09 * side, 0.85, 0.0), (0.1 * side, 0.0, 0.02), 0.045)
        pts.append(leg)
        cols.append(_paint(rng, len(leg), pants))
        arm = _rod(
            rng, 120, (0.23 * side, 1.45, 0.0), (0.2 * side, 1.05, 0.14), 0.035
        )
        pts.append(arm)
        cols.append(_paint(rng, len(arm), np.clip(shirt, 0.0, 1.0)))

    return np.concatenate(pts), np.concatenate(cols)


def _instrument_points(name, rng):
    """Class-distinctive primitive, held in front of the body (+z side)."""
    if name == "cello":
        color = (0.48, 0.18, 0.12)
        body = _shell(rng, 430, (0.0, 0.95, 0.32), (0.17, 0.32, 0.08))
        neck = _rod(rng, 200, (0.0, 1.2, 0.3), (-0.04, 1.62, 0.2), 0.02)
    elif name == "doublebass":
        color = (0.3, 0.16, 0.08)
        body = _shell(rng, 450, (0.12, 1.05, 0.38), (0.2, 0.42, 0.1))
        neck = _rod(rng, 200, (0.1, 1.4, 0.36), (0.02, 1.92, 0.28), 0.022)
    elif name == "guitar":
        color = (0.8, 0.62, 0.34)
        body = _shell(rng, 400, (-0.06, 1.02, 0.28), (0.15, 0.19, 0.06))
        neck = _rod(rng, 230, (0.05, 1.1, 0.27), (0.4, 1.38, 0.2), 0.018)
    elif name == "saxophone":
        color = (0.86, 0.69, 0.2)
        body = _rod(rng, 380, (0.04, 1.42, 0.22), (0.1, 0.88, 0.36), 0.032)
        neck = _shell(rng, 240, (0.13, 0.84, 0.42), (0.07, 0.08, 0.07))
    elif name == "violin":
        color = (0.74, 0.42, 0.12)
        body = _shell(rng, 350, (0.16, 1.5, 0.14), (0.11, 0.06, 0.05))
        neck = _rod(rng, 270, (0.2, 1.5, 0.16), (0.48, 1.42, 0.3), 0.016)
    else:
        raise ValueError(f"unknown instrument {name!r}")
    pts = np.concatenate([body, neck])
    return pts, _paint(rng, len(pts), color)


def make_musician_cloud(instrument, seed):
    """Deterministic procedural musician, centered on x/z, facing +z."""
    if instrument not in INSTRUMENT_CLASSES:
        raise ValueError(f"unknown instrument {instrument!r}")
    rng = np.random.default_rng([INSTRUMENT_CLASSES.index(instrument), int(seed)])
    body_pts, body_cols = _body_points(rng)
    inst_pts, inst_cols = _instrument_points(instrument, rng)
    pts = np.concatenate([body_pts, inst_pts])
    cols = np.concatenate([body_cols, inst_cols])
    scale = rng.uniform(0.95, 1.05)
    pts = pts * scale
    return PointCloud(pts, np.clip(cols, 0.0, 1.0))


# ---------------------------------------------------------------------------
# Augmentation and composition.


def augment_cloud(cloud, rng):
    """Shear, y-translation, and color jitter for one musician cloud.

    Draw order is fixed: 6 shear off-diagonals N(0, 0.1^2) (row-major),
    one y offset N(0, 0.2^2), per-point RGB noise N(0, 0.05^2), then HSV
    value and saturation shifts U(-0.2, 0.2) and U(-0.15, 0.15).  A draw
    sequence of all zeros reproduces the input exactly.
    """
    off = rng.normal(0.0, 0.1, size=6)
    shear = np.eye(3)
    shear[0, 1], shear[0, 2] = off[0], off[1]
    shear[1, 0], shear[1, 2] = off[2], off[3]
    shear[2, 0], shear[2, 1] = off[4], off[5]
    pts = cloud.points @ shear.T
    pts[:, 1] += rng.normal(0.0, 0.2)

    colors = cloud.colors
    if colors is not None:
        colors = np.clip(colors + rng.normal(0.0, 0.05, size=colors.shape), 0.0, 1.0)
        value_shift = rng.uniform(-0.2, 0.2)
        sat_shift = rng.uniform(-0.15, 0.15)
        if value_shift != 0.0 or sat_shift != 0.0:
            hsv = rgb_to_hsv(colors)
            hsv[:, 2] = np.clip(hsv[:, 2] + value_shift, 0.0, 1.0)
            hsv[:, 1] = np.clip(hsv[:, 1] + sat_shift, 0.0, 1.0)
            colors = hsv_to_rgb(hsv)
        colors = np.clip(colors, 0.0, 1.0)
    return PointCloud(pts, colors)


def rotate_y(points, angle):
    """Counterclockwise rotation about the y axis; maps +z to (sin, 0, cos)."""
    c = np.cos(angle)
    s = np.sin(angle)
    rot = np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    return points @ rot.T


def compose_scene(musicians, spec):
    """Rotate each musician to face the origin, place it, and merge.

    Slot k puts the musician at distance * (sin phi_k, 0, cos phi_k); the
    body (built facing +z) is turned by phi_k + pi so it looks back at
    the listener.
    """
    if len(musicians) != spec.n_sources:
        raise ValueError(
            f"scene spec lists {spec.n_sources} sources, got {len(musicians)} clouds"
        )
    all_pts = []
    all_cols = []
    keep_rgb = all(m.has_rgb for m in musicians)
    for cloud, placement in zip(musicians, spec.sources):
        phi = azimuth_of_index(placement.azimuth_k)
        pts = rotate_y(cloud.points, phi + np.pi)
        pts = pts + placement.distance * np.array([np.sin(phi), 0.0, np.cos(phi)])
        all_pts.append(pts)
        if keep_rgb:
            all_cols.append(cloud.colors)
    return PointCloud(
        np.concatenate(all_pts), np.concatenate(all_cols) if keep_rgb else None
    )


# ---------------------------------------------------------------------------
# Instrument audio bank.

_AUDIO_RECIPES = {
    "cello": dict(
        scale=(131.0, 147.0, 165.0, 175.0, 196.0),
        rolloff=1.1, max_harm=16, even=1.0, attack=0.04, decay=None, vibrato=0.003,
    ),
    "doublebass": dict(
        scale=(65.0, 73.0, 82.0, 98.0),
        rolloff=1.3, max_harm=18, even=1.0, attack=0.03, decay=0.5, vibrato=0.0,
    ),
    "guitar": dict(
        scale=(196.0, 220.0, 247.0, 294.0, 330.0),
        rolloff=0.9, max_harm=12, even=1.0, attack=0.005, decay=0.4, vibrato=0.0,
    ),
    "saxophone": dict(
        scale=(208.0, 233.0, 262.0, 294.0, 311.0),
        rolloff=1.0, max_harm=14, even=0.25, attack=0.06, decay=None, vibrato=0.004,
    ),
    "violin": dict(
        scale=(392.0, 440.0, 494.0, 554.0, 659.0),
        rolloff=0.7, max_harm=12, even=1.0, attack=0.05, decay=None, vibrato=0.005,
    ),
}

_VIBRATO_HZ = 5.5


def _render_tone(recipe, fs, n, rng):
    """Additive note sequence with the recipe's harmonic stack and envelope."""
    out = np.zeros(n, dtype=np.float64)
    cap = 0.45 * fs
    pos = 0
    while pos < n:
        dur = rng.uniform(0.25, 0.6)
        m = min(max(int(dur * fs), 1), n - pos)
        f0 = float(rng.choice(recipe["scale"])) * float(2 ** rng.integers(0, 2))
        t = np.arange(m) / fs
        depth = recipe["vibrato"]
        wobble = (
            (depth * f0 / _VIBRATO_HZ) * np.sin(2.0 * np.pi * _VIBRATO_HZ * t)
            if depth
            else 0.0
        )
        note = np.zeros(m)
        for k in range(1, recipe["max_harm"] + 1):
            if f0 * k >= cap:
                break
            amp = (recipe["even"] if k % 2 == 0 else 1.0) / k ** recipe["rolloff"]
            phase = rng.uniform(0.0, 2.0 * np.pi)
            note += amp * np.sin(2.0 * np.pi * f0 * k * t + k * wobble + phase)
        env = np.ones(m)
        a = min(int(recipe["attack"] * fs), m)
        if a > 0:
            env[:a] = np.linspace(0.0, 1.0, a, endpoint=False)
        if recipe["decay"]:
            env *= np.exp(-t / recipe["decay"])
        r = min(int(0.02 * fs), m)
        if r > 0:
            env[m - r :] *= np.linspace(1.0, 0.0, r)
        out[pos : pos + m] = note * env
        pos += m
    peak = np.max(np.abs(out))
    if peak > 0.0:
        out *= 0.5 / peak
    return out


def build_audio_bank(classes, fs, seconds=12.0, entries=2, seed=0):
    """Per-class synthesized clips the generator slices source audio from."""
    n = int(round(seconds * fs))
    bank = {}
    for name in classes:
        if name not in _AUDIO_RECIPES:
            raise ValueError(f"unknown instrument {name!r}")
        cid = INSTRUMENT_CLASSES.index(name)
        clips = []
        for e in range(entries):
            rng = np.random.default_rng([int(seed), cid, e])
            clips.append(AudioClip(_render_tone(_AUDIO_RECIPES[name], fs, n, rng)[None, :], fs))
        bank[name] = clips
    return bank


# ---------------------------------------------------------------------------
# Example generation.


@dataclass
class GenConfig:
    """Knobs for example synthesis; augment is off for val/test splits."""

    classes: tuple = INSTRUMENT_CLASSES
    sample_rate: int = 8000
    clip_seconds: float = 1.0
    augment: bool = True
    cloud_variants: int = 2
    bank_entries: int = 2
    bank_seconds: float = 12.0
    asset_seed: int = 0

    def __post_init__(self):
        self.classes = tuple(self.classes)
        if not self.classes:
            raise ValueError("at least one instrument class required")
        unknown = [c for c in self.classes if c not in INSTRUMENT_CLASSES]
        if unknown:
            raise ValueError(f"unknown instrument classes {unknown}")
        if self.clip_seconds <= 0 or self.bank_seconds < self.clip_seconds:
            raise ValueError("need 0 < clip_seconds <= bank_seconds")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")


@dataclass
class Assets:
    """Reusable raw material: base clouds, audio bank, impulse responses."""

    clouds: dict
    audio: dict
    hrirs: HRIRSet


def build_assets(config):
    clouds = {
        name: [
            make_musician_cloud(name, config.asset_seed + v)
            for v in range(config.cloud_variants)
        ]
        for name in config.classes
    }
    audio = build_audio_bank(
        config.classes,
        config.sample_rate,
        config.bank_seconds,
        config.bank_entries,
        config.asset_seed,
    )
    return Assets(clouds, audio, make_spherical_hrir_set(config.sample_rate))


@dataclass
class TrainingExample:
    scene: PointCloud
    s_m: AudioClip
    s_b: AudioClip
    spec: SceneSpec
    seed: int

    def __post_init__(self):
        if len(self.scene) == 0:
            raise ValueError("scene cloud is empty")
        if self.s_m.channels != 1 or self.s_b.channels != 2:
            raise ValueError("expected mono s_m and binaural s_b")
        if self.s_m.length != self.s_b.length:
            raise ValueError("audio lengths differ")


def draw_scene_spec(rng, config):
    """Sample N in 1..3, distinct azimuth slots, classes, and distances."""
    n = int(rng.integers(1, 4))
    slots = rng.choice(AZIMUTH_COUNT, size=n, replace=False)
    placements = []
    for k in slots:
        name = config.classes[int(rng.integers(len(config.classes)))]
        distance = float(rng.uniform(1.0, 3.0))
        placements.append(Placement(name, int(k), distance))
    return SceneSpec(tuple(placements), config.clip_seconds)


def generate_example(seed, assets, config):
    """One fully determined scene + audio pair from a single integer seed."""
    rng = np.random.default_rng(int(seed))
    spec = draw_scene_spec(rng, config)
    clouds = []
    for placement in spec.sources:
        variants = assets.clouds[placement.instrument]
        base = variants[int(rng.integers(len(variants)))]
        clouds.append(augment_cloud(base, rng) if config.augment else base)
    scene = compose_scene(clouds, spec)

    n = int(round(config.clip_seconds * config.sample_rate))
    clips = []
    for placement in spec.sources:
        entries = assets.audio[placement.instrument]
        source = entries[int(rng.integers(len(entries)))]
        if source.length < n:
            raise ValueError("audio bank entry shorter than the requested clip")
        onset = int(rng.integers(source.length - n + 1))
        clips.append(
            AudioClip(source.samples[:, onset : onset + n].copy(), config.sample_rate)
        )
    s_m, s_b = mix_scene(clips, spec, assets.hrirs)
    return TrainingExample(scene, s_m, s_b, spec, int(seed))


# ---------------------------------------------------------------------------
# Dataset layout on disk.


def split_seeds(master_seed, split, count):
    """Independent per-example seeds; each split gets a disjoint stream."""
    if split not in SPLITS:
        raise ValueError(f"split must be one of {SPLITS}, got {split!r}")
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(SPLITS.index(split),))
    return [int(s) for s in ss.generate_state(int(count), dtype=np.uint64)]


def write_dataset(out_dir, split, count, master_seed, config, assets=None):
    """Write count examples under out_dir/split/exNNNNN/; returns the dirs."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if assets is None:
        assets = build_assets(config)
    root = Path(out_dir) / split
    root.mkdir(parents=True, exist_ok=True)
    dirs = []
    for i, seed in enumerate(split_seeds(master_seed, split, count)):
        example = generate_example(seed, assets, config)
        d = root / f"ex{i:05d}"
        d.mkdir(exist_ok=True)
        write_cloud(d / "scene.p2s-cloud", example.scene)
        write_wav(d / "mono.wav", example.s_m)
        write_wav(d / "binaural.wav", example.s_b)
        manifest = {
            "seed": example.seed,
            "split": split,
            "augmentation": bool(config.augment),
            "sample_rate": int(config.sample_rate),
            "clip_seconds": float(config.clip_seconds),
            "spec": example.spec.to_json(),
            "files": {
                "scene": "scene.p2s-cloud",
                "mono": "mono.wav",
                "binaural": "binaural.wav",
            },
        }
        with open(d / "manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        dirs.append(d)
    return dirs


def list_example_dirs(data_dir, split):
    root = Path(data_dir) / split
    if not root.is_dir():
        raise FileNotFoundError(f"no '{split}' split under {data_dir}")
    dirs = sorted(p for p in root.iterdir() if (p / "manifest.json").is_file())
    if not dirs:
        raise FileNotFoundError(f"no examples under {root}")
    return dirs


@dataclass
class LoadedExample:
    scene: PointCloud
    s_m: AudioClip
    s_b: AudioClip
    spec: SceneSpec
    manifest: dict


def read_example_dir(path):
    path = Path(path)
    with open(path / "manifest.json") as fh:
        manifest = json.load(fh)
    files = manifest["files"]
    return LoadedExample(
        scene=read_cloud(path / files["scene"]),
        s_m=read_wav(path / files["mono"]),
        s_b=read_wav(path / files["binaural"]),
        spec=SceneSpec.from_json(manifest["spec"]),
        manifest=manifest,
    )
