"""Evaluation harness: model predictions vs. reference-free baselines.

Three methods are reported over a dataset split, bucketed by source
count: the trained model, Mono-Mono (copies the mono mixture to both
output channels), and Rotated-Visual (the same model conditioned on the
scene rotated a quarter turn, probing that predictions actually depend
on the visual input).
"""

from __future__ import annotations

import json
import numpy as np

from . import sparse as S
from . import tensor as T
from .audionet import audionet_forward
from .cloud import PointCloud
from .metrics import envelope_distance, stft_distance
from .scenes import list_example_dirs, read_example_dir, rotate_y
from .trainer import load_model, recover_channels

METHODS = ("model", "mono-mono", "rotated-visual")

ROTATION_PROBE_ANGLE = np.pi / 2.0


def rotated_scene(cloud):
    """Quarter-turn counterclockwise about y, colors untouched."""
    return PointCloud(rotate_y(cloud.points, ROTATION_PROBE_ANGLE), cloud.colors)


def predict_binaural(vnet, anet, config, scene, mono, rotate=False):
    """(2, T) float64 prediction for one scene and mono clip."""
    if mono.channels != 1:
        raise ValueError("prediction expects a mono input clip")
    if mono.sample_rate != config.sample_rate:
        raise ValueError(
            f"clip rate {mono.sample_rate} does not match model rate {config.sample_rate}"
        )
    if rotate:
        scene = rotated_scene(scene)
    st = S.voxelize(
        scene, config.voxel_size, config.feature_mode, dtype=vnet.head.weight.data.dtype
    )
    with T.Tape():
        h = vnet.forward(st, training=False)
        out = audionet_forward(mono, T.Tensor(h.data[0]), anet)
    if config.loss_mode == "full":
        return out.samples.astype(np.float64)
    return recover_channels(mono.samples[0], out.samples[0])


def mono_mono_prediction(mono):
    """The no-spatialization baseline: both channels equal the mono mix."""
    m = np.asarray(mono.samples[0], dtype=np.float64)
    return np.stack([m, m])


def clip_distances(truth, pred, sample_rate):
    return (
        envelope_distance(truth, pred),
        stft_distance(truth, pred, sample_rate),
    )


def evaluate_nets(vnet, anet, config, data_dir, split="test", methods=METHODS):
    """Per-method, per-source-count mean distances over a dataset split."""
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise ValueError(f"unknown methods {unknown}")
    dirs = list_example_dirs(data_dir, split)
    per_method = {m: {"env": [], "stft": []} for m in methods}
    buckets = []
    for d in dirs:
        ex = read_example_dir(d)
        truth = ex.s_b.samples.astype(np.float64)
        buckets.append(ex.spec.n_sources)
        for m in methods:
            if m == "mono-mono":
                pred = mono_mono_prediction(ex.s_m)
            else:
                pred = predict_binaural(
                    vnet, anet, config, ex.scene, ex.s_m, rotate=(m == "rotated-visual")
                )
            env_d, stft_d = clip_distances(truth, pred, ex.s_m.sample_rate)
            per_method[m]["env"].append(env_d)
            per_method[m]["stft"].append(stft_d)

    buckets = np.array(buckets)
    report = {
        "split": split,
        "size": len(dirs),
        "counts": {str(n): int(np.sum(buckets == n)) for n in (1, 2, 3)},
        "methods": {},
    }
    for m in methods:
        entry = {}
        for metric in ("env", "stft"):
            values = np.array(per_method[m][metric])
            means = {
                str(n): (
                    float(values[buckets == n].mean()) if np.any(buckets == n) else None
                )
                for n in (1, 2, 3)
            }
            means["avg"] = float(values.mean())
            entry[metric] = means
        report["methods"][m] = entry
    return report


def evaluate_checkpoint(ckpt_path, data_dir, split="test", methods=METHODS):
    vnet, anet, config = load_model(ckpt_path)
    return evaluate_nets(vnet, anet, config, data_dir, split, methods)


def write_report(path, report):
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
