"""Train a miniature model end to end on synthetic scenes, then compare it
against the copy-the-mono baseline and a deliberately rotated visual input.

Everything is scaled down (short clips, small nets, few iterations) so the
whole loop runs in about a minute.  The full-size twin of this recipe lives
in TrainConfig.desk().

Run with:  python3 demos/06_train_miniature.py
"""
import json
import tempfile

from pointsound.evaluate import evaluate_checkpoint, predict_binaural
from pointsound.scenes import GenConfig, read_example_dir, list_example_dirs, write_dataset
from pointsound.trainer import TrainConfig, load_model, save_checkpoint, train


def main():
    workdir = tempfile.mkdtemp(prefix="pointsound_demo_")
    data = f"{workdir}/data"
    gen = GenConfig(
        classes=("violin", "saxophone"),
        sample_rate=8000,
        clip_seconds=0.25,
        cloud_variants=1,
        bank_entries=1,
        bank_seconds=1.0,
    )
    print("generating a miniature dataset ...")
    write_dataset(data, "train", 24, 7, gen)
    write_dataset(data, "val", 8, 7, gen)
    write_dataset(data, "test", 16, 7, gen)

    config = TrainConfig.desk(
        iterations=600,
        eval_every=200,
        batch_size=4,
        stage_channels=(4, 8, 8, 8),
        head_channels=8,
        audio_depth=2,
        audio_channels=8,
        voxel_size=0.1,
    )
    print(f"training: {config.iterations} iterations, loss mode {config.loss_mode!r}")
    result = train(config, data)
    for rec in result.log_records:
        if "val_loss" in rec:
            print(f"  iter {rec['iter']:4d}  train {rec['train_loss']:.4f}"
                  f"  val {rec['val_loss']:.4f}")

    ckpt = f"{workdir}/demo.p2s-ckpt"
    save_checkpoint(ckpt, result)
    print(f"checkpoint -> {ckpt}")

    print()
    print("evaluating on the held-out split ...")
    report = evaluate_checkpoint(ckpt, data, split="test")
    print(f"{'method':16s} {'envelope':>10s} {'spectral':>10s}")
    for method, row in report["methods"].items():
        print(f"{method:16s} {row['env']['avg']:10.3f} {row['stft']['avg']:10.3f}")

    print()
    print("spot check on one scene:")
    vnet, anet, cfg = load_model(ckpt)
    example = read_example_dir(list_example_dirs(data, "test")[0])
    pred = predict_binaural(vnet, anet, cfg, example.scene, example.s_m)
    rot = predict_binaural(vnet, anet, cfg, example.scene, example.s_m, rotate=True)
    drift = float(abs(pred - rot).max())
    print(f"  prediction shape {pred.shape}, "
          f"max |correct - rotated| = {drift:.4f}")
    print(json.dumps(report["counts"], sort_keys=True),
          "scenes per source count in the held-out split")
    print()
    print("A run this brief does not yet beat the copy baseline, but the full")
    print("desk preset follows exactly this recipe with more data, more width")
    print("and more iterations, and the rotation probe already shifts the")
    print("output, which shows the visual conditioning is wired through.")


if __name__ == "__main__":
    main()
