"""Joint training of the vision and audio networks.

The loop draws fixed-size batches from a pregenerated dataset, runs
voxelize -> vision net -> conditioning vector -> audio net, reduces an L1
loss in one of two modes (full: both binaural channels; diff: the L-R
difference channel, recovered against the mono mix at inference), and
applies Adam updates.  Validation loss is tracked on a held-out split and
the best-validation weights are what gets checkpointed.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import sparse as S
from . import tensor as T
from .audionet import AudioNet, AudioNetConfig
from .checkpoint import load_tensors, save_tensors
from .optim import AdamState, adam_step
from .scenes import INSTRUMENT_CLASSES, list_example_dirs, read_example_dir
from .vision import VisionConfig, VisionNet

FEATURE_MODES = ("rgb-depth", "depth")
LOSS_MODES = ("full", "diff")
DTYPES = {"float32": np.float32, "float64": np.float64}


# ---------------------------------------------------------------------------
# Losses and channel recovery.


def loss_full(pred, target):
    """Mean absolute error between predicted and true binaural channels."""
    pred = T.as_tensor(pred)
    target = T.as_tensor(target, dtype=pred.data.dtype)
    if pred.data.shape != target.data.shape:
        raise ValueError(f"shape mismatch: {pred.data.shape} vs {target.data.shape}")
    return T.mean(T.absolute(T.sub(pred, target)))


def loss_diff(pred_diff, target_binaural):
    """Mean absolute error against the true L-R difference channel.

    pred_diff carries one channel; the target is a full binaural clip
    whose difference is formed here.
    """
    pred_diff = T.as_tensor(pred_diff)
    tb = np.asarray(
        target_binaural.data if isinstance(target_binaural, T.Tensor) else target_binaural
    )
    if tb.shape[-2] != 2:
        raise ValueError(f"target must have 2 channels, got shape {tb.shape}")
    diff = (tb[..., 0:1, :] - tb[..., 1:2, :]).astype(pred_diff.data.dtype)
    if pred_diff.data.shape != diff.shape:
        raise ValueError(f"shape mismatch: {pred_diff.data.shape} vs {diff.shape}")
    return T.mean(T.absolute(T.sub(pred_diff, T.Tensor(diff))))


def recover_channels(s_m, s_diff):
    """Binaural channels from the mono mix and the difference channel.

    L = (m + d) / 2 and R = (m - d) / 2, so recover(L+R, L-R) is exact.
    """
    s_m = np.asarray(s_m, dtype=np.float64).reshape(-1)
    s_diff = np.asarray(s_diff, dtype=np.float64).reshape(-1)
    if s_m.shape != s_diff.shape:
        raise ValueError(f"length mismatch: {s_m.shape[0]} vs {s_diff.shape[0]}")
    return np.stack([(s_m + s_diff) * 0.5, (s_m - s_diff) * 0.5])


# ---------------------------------------------------------------------------
# Configuration.


@dataclass
class TrainConfig:
    loss_mode: str = "diff"
    feature_mode: str = "depth"
    iterations: int = 2000
    batch_size: int = 8
    lr: float = 1e-4
    seed: int = 0
    eval_every: int = 100
    sample_rate: int = 8000
    voxel_size: float = 0.075
    stage_channels: tuple = (8, 16, 32, 64)
    head_channels: int = 16
    audio_depth: int = 2
    audio_channels: int = 32
    classes: tuple = ("violin", "saxophone")
    dtype: str = "float32"

    def __post_init__(self):
        if self.loss_mode not in LOSS_MODES:
            raise ValueError(f"loss_mode must be one of {LOSS_MODES}")
        if self.feature_mode not in FEATURE_MODES:
            raise ValueError(f"feature_mode must be one of {FEATURE_MODES}")
        if self.dtype not in DTYPES:
            raise ValueError(f"dtype must be one of {tuple(DTYPES)}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        self.stage_channels = tuple(int(c) for c in self.stage_channels)
        self.classes = tuple(self.classes)

    @property
    def output_channels(self):
        return 2 if self.loss_mode == "full" else 1

    @staticmethod
    def desk(**overrides):
        """Small-footprint preset: 8 kHz, 1 s clips, 2 classes, 2k steps.

        Three defaults here come from short-budget experiments.  The audio
        net is shallow and wide (depth 2, 32 channels): deeper or narrower
        nets do not learn to use the conditioning vector within 2k steps.
        Voxel features carry positions, which move when the scene rotates;
        colors barely do.  The loss predicts the channel difference, so all
        of the output depends on the conditioning instead of mostly on the
        mono content, which keeps the model sensitive to the scene.
        """
        return replace(TrainConfig(), **overrides)

    @staticmethod
    def paper(**overrides):
        """Reference-scale preset; provided for completeness, not speed."""
        base = TrainConfig(
            feature_mode="rgb-depth",
            iterations=120_000,
            batch_size=40,
            sample_rate=44_100,
            voxel_size=0.02,
            stage_channels=(16, 32, 64, 128),
            audio_depth=6,
            audio_channels=32,
            classes=INSTRUMENT_CLASSES,
        )
        return replace(base, **overrides)


def build_nets(config, rng=None):
    """Fresh (vision, audio) networks matching a TrainConfig."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    dtype = DTYPES[config.dtype]
    vnet = VisionNet(
        VisionConfig(
            stage_channels=config.stage_channels,
            head_channels=config.head_channels,
            voxel_size=config.voxel_size,
            feature_mode=config.feature_mode,
        ),
        rng,
        dtype=dtype,
    )
    anet = AudioNet(
        AudioNetConfig(
            depth=config.audio_depth,
            initial_channels=config.audio_channels,
            cond_dim=config.head_channels,
            output_channels=config.output_channels,
            sample_rate=config.sample_rate,
        ),
        rng,
        dtype=dtype,
    )
    return vnet, anet


# ---------------------------------------------------------------------------
# Checkpoint contents.  Everything needed to rebuild the nets is stored as
# numeric meta.* entries, so one file is self-contained.


def _meta_arrays(config):
    return {
        "meta.sample_rate": np.array(float(config.sample_rate)),
        "meta.voxel_size": np.array(float(config.voxel_size)),
        "meta.feature_mode_id": np.array(float(FEATURE_MODES.index(config.feature_mode))),
        "meta.loss_mode_id": np.array(float(LOSS_MODES.index(config.loss_mode))),
        "meta.stage_channels": np.array([float(c) for c in config.stage_channels]),
        "meta.head_channels": np.array(float(config.head_channels)),
        "meta.audio_depth": np.array(float(config.audio_depth)),
        "meta.audio_channels": np.array(float(config.audio_channels)),
        "meta.class_ids": np.array(
            [float(INSTRUMENT_CLASSES.index(c)) for c in config.classes]
        ),
        "meta.dtype_id": np.array(0.0 if config.dtype == "float32" else 1.0),
    }


def config_from_arrays(arrays):
    """Rebuild the architecture-relevant TrainConfig from meta.* entries."""
    def scalar(name):
        if name not in arrays:
            raise ValueError(f"checkpoint missing {name}")
        return float(np.asarray(arrays[name]).reshape(-1)[0])

    return TrainConfig(
        loss_mode=LOSS_MODES[int(scalar("meta.loss_mode_id"))],
        feature_mode=FEATURE_MODES[int(scalar("meta.feature_mode_id"))],
        sample_rate=int(scalar("meta.sample_rate")),
        voxel_size=scalar("meta.voxel_size"),
        stage_channels=tuple(int(c) for c in np.asarray(arrays["meta.stage_channels"])),
        head_channels=int(scalar("meta.head_channels")),
        audio_depth=int(scalar("meta.audio_depth")),
        audio_channels=int(scalar("meta.audio_channels")),
        classes=tuple(
            INSTRUMENT_CLASSES[int(i)] for i in np.asarray(arrays["meta.class_ids"])
        ),
        dtype="float32" if scalar("meta.dtype_id") == 0.0 else "float64",
    )


def load_model(path):
    """(vision net, audio net, config) restored from a checkpoint file."""
    arrays = load_tensors(path)
    config = config_from_arrays(arrays)
    vnet, anet = build_nets(config)
    vnet.load_state(arrays)
    anet.load_state(arrays)
    return vnet, anet, config


# ---------------------------------------------------------------------------
# Dataset access.


class SceneBatcher:
    """Loads a split once and serves merged sparse batches from a cache."""

    def __init__(self, data_dir, split, config):
        self.dtype = DTYPES[config.dtype]
        self.examples = [read_example_dir(d) for d in list_example_dirs(data_dir, split)]
        rate = {ex.s_m.sample_rate for ex in self.examples}
        if rate != {config.sample_rate}:
            raise ValueError(
                f"dataset sample rate {sorted(rate)} does not match config "
                f"{config.sample_rate}"
            )
        self.cached = []
        for ex in self.examples:
            st = S.voxelize(ex.scene, config.voxel_size, config.feature_mode, dtype=self.dtype)
            self.cached.append((st.coords, st.feats.data))
        self.mono = np.stack([ex.s_m.samples for ex in self.examples]).astype(self.dtype)
        self.binaural = np.stack([ex.s_b.samples for ex in self.examples]).astype(self.dtype)

    def __len__(self):
        return len(self.examples)

    def scene_batch(self, idxs):
        coords = []
        feats = []
        for bi, ei in enumerate(idxs):
            c, f = self.cached[ei]
            c = c.copy()
            c[:, 0] = bi
            coords.append(c)
            feats.append(f)
        return S.SparseTensor(
            np.concatenate(coords), np.concatenate(feats), batch_size=len(idxs)
        )

    def audio_batch(self, idxs):
        return self.mono[idxs], self.binaural[idxs]


def _batch_loss(vnet, anet, config, scene, mono, binaural, training):
    h = vnet.forward(scene, training=training)
    pred = anet.forward(T.Tensor(mono), h)
    if config.loss_mode == "full":
        return loss_full(pred, binaural)
    return loss_diff(pred, binaural)


# ---------------------------------------------------------------------------
# The loop.


class TrainingAborted(RuntimeError):
    pass


@dataclass
class TrainResult:
    arrays: dict
    best_val_loss: float
    best_iteration: int
    log_records: list = field(default_factory=list)


def train(config, data_dir, log_path=None):
    """Run the loop and return the best-validation weights.

    The returned arrays hold parameters, batch-norm statistics, Adam
    moments, and the meta.* entries describing the architecture; pass
    them to save_checkpoint to persist.
    """
    train_set = SceneBatcher(data_dir, "train", config)
    val_set = SceneBatcher(data_dir, "val", config)
    vnet, anet = build_nets(config)
    params = {}
    params.update(vnet.named_parameters())
    params.update(anet.named_parameters())
    state = AdamState(lr=config.lr)
    batch_rng = np.random.default_rng(
        np.random.SeedSequence(config.seed, spawn_key=(99,))
    )

    best = TrainResult({}, np.inf, -1)
    records = []
    log_fh = open(log_path, "w") if log_path else None
    try:
        for it in range(1, config.iterations + 1):
            t0 = time.monotonic()
            idxs = batch_rng.integers(0, len(train_set), size=config.batch_size)
            scene = train_set.scene_batch(idxs)
            mono, binaural = train_set.audio_batch(idxs)
            with T.Tape() as tape:
                loss = _batch_loss(vnet, anet, config, scene, mono, binaural, True)
            train_loss = loss.item()
            if not np.isfinite(train_loss):
                raise TrainingAborted(
                    f"non-finite training loss at iteration {it} "
                    f"(lr {config.lr}, batch {idxs.tolist()})"
                )
            grads = tape.backward(loss)
            grad_map = {}
            for name, p in params.items():
                g = grads.get(p.tid)
                if g is not None:
                    grad_map[name] = g
            adam_step(params, grad_map, state)

            record = {"iter": it, "train_loss": train_loss}
            if it % config.eval_every == 0 or it == config.iterations:
                val_loss = _validation_loss(vnet, anet, config, val_set)
                record["val_loss"] = val_loss
                if val_loss < best.best_val_loss:
                    best = TrainResult(
                        _snapshot(vnet, anet, state, config), val_loss, it
                    )
            record["wall_ms"] = round((time.monotonic() - t0) * 1000.0, 3)
            records.append(record)
            if log_fh:
                log_fh.write(json.dumps(record) + "\n")
    finally:
        if log_fh:
            log_fh.close()

    if best.best_iteration < 0:
        raise TrainingAborted("no validation pass completed")
    best.log_records = records
    return best


def _validation_loss(vnet, anet, config, val_set, max_batches=None):
    total = 0.0
    count = 0
    n = len(val_set)
    bs = config.batch_size
    batches = range(0, n, bs)
    for start in batches if max_batches is None else list(batches)[:max_batches]:
        idxs = np.arange(start, min(start + bs, n))
        scene = val_set.scene_batch(idxs)
        mono, binaural = val_set.audio_batch(idxs)
        with T.Tape():
            loss = _batch_loss(vnet, anet, config, scene, mono, binaural, False)
        total += loss.item() * len(idxs)
        count += len(idxs)
    return total / count


def _snapshot(vnet, anet, state, config):
    arrays = {}
    for name, arr in vnet.state_arrays().items():
        arrays[name] = arr.copy()
    for name, arr in anet.state_arrays().items():
        arrays[name] = arr.copy()
    for name, m in state.m.items():
        arrays[f"adam.m.{name}"] = m.copy()
    for name, v in state.v.items():
        arrays[f"adam.v.{name}"] = v.copy()
    arrays["adam.step"] = np.array(float(state.step))
    arrays.update(_meta_arrays(config))
    return arrays


def save_checkpoint(path, result_or_arrays):
    arrays = (
        result_or_arrays.arrays
        if isinstance(result_or_arrays, TrainResult)
        else result_or_arrays
    )
    save_tensors(path, arrays)
