"""Command-line interface: dataset generation, training, inference, evaluation.

Thread control must happen before the numerical stack loads, so this
module imports nothing heavy at the top level; each subcommand pulls in
what it needs after --threads (or P2S_THREADS) has been applied to the
BLAS environment variables.  Exit codes: 0 success, 1 runtime failure,
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

_THREAD_VARS = (
    "OPENBLAS_NUM_THREADS",
    "OMP_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
    "VECLIB_MAXIMUM_THREADS",
)


class UsageError(Exception):
    pass


def _apply_threads(threads):
    if threads is None:
        threads = os.environ.get("P2S_THREADS")
        if threads is None:
            return
    try:
        n = int(threads)
    except ValueError:
        raise UsageError(f"--threads must be an integer, got {threads!r}")
    if n < 1:
        raise UsageError(f"--threads must be >= 1, got {n}")
    os.environ["P2S_THREADS"] = str(n)
    for var in _THREAD_VARS:
        os.environ[var] = str(n)


def _resolve(args, defaults):
    """defaults <- config-file values <- explicitly passed flags."""
    file_cfg = {}
    config_path = getattr(args, "config", None)
    if config_path:
        path = Path(config_path)
        if not path.is_file():
            raise UsageError(f"config file not found: {path}")
        try:
            file_cfg = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise UsageError(f"config file {path} is not valid JSON: {e}")
        unknown = sorted(set(file_cfg) - set(defaults))
        if unknown:
            raise UsageError(f"unknown config keys {unknown}; known: {sorted(defaults)}")
    cli_given = {
        k: v for k, v in vars(args).items() if k in defaults and v is not None
    }
    return {**defaults, **file_cfg, **cli_given}


def _log_config(command, resolved):
    print(json.dumps({"command": command, "config": resolved}, sort_keys=True))


def _parse_classes(value):
    if isinstance(value, str):
        value = [c.strip() for c in value.split(",") if c.strip()]
    return tuple(value)


# ---------------------------------------------------------------------------
# Subcommands.


def cmd_gen_data(args):
    defaults = {
        "out": None,
        "count": None,
        "seed": 0,
        "split": "train",
        "clip_secs": None,
        "classes": "violin,saxophone",
        "rate": 8000,
    }
    cfg = _resolve(args, defaults)
    if cfg["out"] is None or cfg["count"] is None:
        raise UsageError("gen-data requires --out and --count")
    if int(cfg["count"]) < 1:
        raise UsageError(f"--count must be >= 1, got {cfg['count']}")
    split = cfg["split"]
    if cfg["clip_secs"] is None:
        cfg["clip_secs"] = 1.0 if split == "train" else 2.0
    cfg["classes"] = list(_parse_classes(cfg["classes"]))
    _log_config("gen-data", cfg)

    from .scenes import SPLITS, GenConfig, write_dataset

    if split not in SPLITS:
        raise UsageError(f"--split must be one of {SPLITS}, got {split!r}")
    try:
        gen_config = GenConfig(
            classes=tuple(cfg["classes"]),
            sample_rate=int(cfg["rate"]),
            clip_seconds=float(cfg["clip_secs"]),
            augment=(split == "train"),
        )
    except ValueError as e:
        raise UsageError(str(e))
    dirs = write_dataset(cfg["out"], split, int(cfg["count"]), int(cfg["seed"]), gen_config)
    print(f"wrote {len(dirs)} examples under {Path(cfg['out']) / split}")
    return 0


def cmd_train(args):
    defaults = {
        "data": None,
        "out": None,
        "preset": "desk",
        "loss": None,
        "feature_mode": None,
        "iterations": None,
        "batch_size": None,
        "lr": None,
        "seed": None,
        "eval_every": None,
        "log": None,
        # file-only knobs (no dedicated flags)
        "sample_rate": None,
        "voxel_size": None,
        "stage_channels": None,
        "head_channels": None,
        "audio_depth": None,
        "audio_channels": None,
        "classes": None,
        "dtype": None,
    }
    cfg = _resolve(args, defaults)
    if cfg["data"] is None or cfg["out"] is None:
        raise UsageError("train requires --data and --out")
    data = Path(cfg["data"])
    if not data.is_dir():
        raise UsageError(f"dataset path not found: {data}")
    if cfg["preset"] not in ("desk", "paper"):
        raise UsageError(f"--preset must be desk or paper, got {cfg['preset']!r}")
    log_path = cfg["log"] or str(cfg["out"]) + ".log"
    cfg["log"] = log_path
    _log_config("train", cfg)

    from .trainer import TrainConfig, save_checkpoint, train

    overrides = {}
    for key, field_name in (
        ("loss", "loss_mode"),
        ("feature_mode", "feature_mode"),
        ("iterations", "iterations"),
        ("batch_size", "batch_size"),
        ("lr", "lr"),
        ("seed", "seed"),
        ("eval_every", "eval_every"),
        ("sample_rate", "sample_rate"),
        ("voxel_size", "voxel_size"),
        ("head_channels", "head_channels"),
        ("audio_depth", "audio_depth"),
        ("audio_channels", "audio_channels"),
        ("dtype", "dtype"),
    ):
        if cfg[key] is not None:
            overrides[field_name] = cfg[key]
    if cfg["stage_channels"] is not None:
        overrides["stage_channels"] = tuple(cfg["stage_channels"])
    if cfg["classes"] is not None:
        overrides["classes"] = _parse_classes(cfg["classes"])
    try:
        preset = TrainConfig.desk if cfg["preset"] == "desk" else TrainConfig.paper
        train_config = preset(**overrides)
    except (TypeError, ValueError) as e:
        raise UsageError(str(e))

    result = train(train_config, data, log_path=log_path)
    save_checkpoint(cfg["out"], result)
    print(
        json.dumps(
            {
                "checkpoint": str(cfg["out"]),
                "best_val_loss": result.best_val_loss,
                "best_iteration": result.best_iteration,
            }
        )
    )
    return 0


def cmd_binauralize(args):
    defaults = {"ckpt": None, "scene": None, "mono": None, "out": None, "rotate": False}
    cfg = _resolve(args, defaults)
    for key in ("ckpt", "scene", "mono", "out"):
        if cfg[key] is None:
            raise UsageError(f"binauralize requires --{key}")
        if key != "out" and not Path(cfg[key]).is_file():
            raise UsageError(f"{key} file not found: {cfg[key]}")
    _log_config("binauralize", cfg)

    import numpy as np

    from .audio import AudioClip, read_wav, write_wav
    from .cloud import read_cloud
    from .evaluate import predict_binaural
    from .trainer import load_model

    vnet, anet, model_config = load_model(cfg["ckpt"])
    scene = read_cloud(cfg["scene"])
    mono = read_wav(cfg["mono"])
    if mono.channels != 1:
        raise UsageError(f"--mono must be a mono WAV, got {mono.channels} channels")
    if mono.sample_rate != model_config.sample_rate:
        raise UsageError(
            f"input rate {mono.sample_rate} Hz does not match the checkpoint's "
            f"{model_config.sample_rate} Hz"
        )
    t0 = time.monotonic()
    pred = predict_binaural(vnet, anet, model_config, scene, mono, rotate=cfg["rotate"])
    wall = time.monotonic() - t0
    write_wav(cfg["out"], AudioClip(pred.astype(np.float64), mono.sample_rate))
    print(json.dumps({"out": str(cfg["out"]), "inference_seconds": round(wall, 4)}))
    return 0


def cmd_evaluate(args):
    defaults = {"ckpt": None, "data": None, "out": None, "split": "test"}
    cfg = _resolve(args, defaults)
    for key in ("ckpt", "data", "out"):
        if cfg[key] is None:
            raise UsageError(f"evaluate requires --{key}")
    if not Path(cfg["ckpt"]).is_file():
        raise UsageError(f"checkpoint not found: {cfg['ckpt']}")
    if not Path(cfg["data"]).is_dir():
        raise UsageError(f"dataset path not found: {cfg['data']}")
    _log_config("evaluate", cfg)

    from .evaluate import evaluate_checkpoint, write_report

    report = evaluate_checkpoint(cfg["ckpt"], cfg["data"], split=cfg["split"])
    write_report(cfg["out"], report)
    print(json.dumps({"report": str(cfg["out"]), "size": report["size"]}))
    return 0


# ---------------------------------------------------------------------------
# Parser and entry point.


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pointsound",
        description="Vision-conditioned mono-to-binaural audio synthesis pipeline.",
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help="BLAS/OpenMP thread count; 1 guarantees bit-identical runs "
        "(default: hardware parallelism, or P2S_THREADS if set)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="synthesize a dataset split")
    p.add_argument("--out", help="dataset root directory")
    p.add_argument("--count", type=int, help="number of examples")
    p.add_argument("--seed", type=int, help="master seed (default 0)")
    p.add_argument("--split", choices=("train", "val", "test"))
    p.add_argument("--clip-secs", dest="clip_secs", type=float,
                   help="audio clip length (default: 1.0 train, 2.0 val/test)")
    p.add_argument("--classes", help="comma-separated instrument classes")
    p.add_argument("--rate", type=int, help="sample rate in Hz (default 8000)")
    p.add_argument("--config", help="JSON config file; flags override it")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a model on a generated dataset")
    p.add_argument("--data", help="dataset root (needs train/ and val/ splits)")
    p.add_argument("--out", help="checkpoint output path")
    p.add_argument("--preset", choices=("desk", "paper"))
    p.add_argument("--loss", choices=("full", "diff"), help="loss mode")
    p.add_argument("--feature-mode", dest="feature_mode", choices=("rgb-depth", "depth"))
    p.add_argument("--iterations", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--eval-every", dest="eval_every", type=int)
    p.add_argument("--log", help="JSON-lines training log path (default OUT.log)")
    p.add_argument("--config", help="JSON config file; flags override it")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("binauralize", help="spatialize a mono clip against a scene")
    p.add_argument("--ckpt", help="trained checkpoint")
    p.add_argument("--scene", help="scene point-cloud file")
    p.add_argument("--mono", help="input mono WAV")
    p.add_argument("--out", help="output stereo WAV")
    p.add_argument("--rotate", action="store_true", default=None,
                   help="rotate the scene a quarter turn before conditioning")
    p.add_argument("--config", help="JSON config file; flags override it")
    p.set_defaults(func=cmd_binauralize)

    p = sub.add_parser("evaluate", help="score a checkpoint against baselines")
    p.add_argument("--ckpt", help="trained checkpoint")
    p.add_argument("--data", help="dataset root")
    p.add_argument("--out", help="report JSON output path")
    p.add_argument("--split", help="dataset split to score (default test)")
    p.add_argument("--config", help="JSON config file; flags override it")
    p.set_defaults(func=cmd_evaluate)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_threads(args.threads)
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001 - the CLI boundary reports, not raises
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
