"""Evaluation harness: baselines, bucketed reports, and prediction plumbing."""

import json

import numpy as np
import pytest

from pointsound.audio import AudioClip
from pointsound.binaural import AZIMUTH_COUNT, HRIRSet
from pointsound.evaluate import (
    METHODS,
    clip_distances,
    evaluate_checkpoint,
    evaluate_nets,
    mono_mono_prediction,
    predict_binaural,
    rotated_scene,
    write_report,
)
from pointsound.cloud import PointCloud
from pointsound.scenes import GenConfig, build_assets, write_dataset
from pointsound.trainer import TrainConfig, load_model, save_checkpoint, train

DATA_CFG = GenConfig(
    classes=("violin", "saxophone"),
    sample_rate=8000,
    clip_seconds=0.25,
    augment=False,
    cloud_variants=1,
    bank_entries=1,
    bank_seconds=1.0,
)


def tiny_train_config(**overrides):
    base = dict(
        iterations=4,
        eval_every=2,
        batch_size=2,
        feature_mode="depth",
        stage_channels=(4, 8, 8, 8),
        head_channels=8,
        audio_depth=2,
        audio_channels=4,
        voxel_size=0.1,
    )
    base.update(overrides)
    return TrainConfig.desk(**base)


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    assets = build_assets(DATA_CFG)
    root = tmp_path_factory.mktemp("eval-data")
    write_dataset(root, "train", 6, 21, DATA_CFG, assets)
    write_dataset(root, "val", 3, 21, DATA_CFG, assets)
    write_dataset(root, "test", 6, 21, DATA_CFG, assets)
    return root


@pytest.fixture(scope="module")
def checkpoint(dataset, tmp_path_factory):
    path = tmp_path_factory.mktemp("eval-ckpt") / "model.ckpt"
    save_checkpoint(path, train(tiny_train_config(), dataset))
    return path


class TestPredictions:
    def test_shapes_and_dtype(self, dataset, checkpoint):
        from pointsound.scenes import list_example_dirs, read_example_dir

        vnet, anet, config = load_model(checkpoint)
        ex = read_example_dir(list_example_dirs(dataset, "test")[0])
        pred = predict_binaural(vnet, anet, config, ex.scene, ex.s_m)
        assert pred.shape == ex.s_b.samples.shape
        assert pred.dtype == np.float64

    def test_rotation_changes_prediction(self, dataset, checkpoint):
        from pointsound.scenes import list_example_dirs, read_example_dir

        vnet, anet, config = load_model(checkpoint)
        ex = read_example_dir(list_example_dirs(dataset, "test")[0])
        plain = predict_binaural(vnet, anet, config, ex.scene, ex.s_m)
        rotated = predict_binaural(vnet, anet, config, ex.scene, ex.s_m, rotate=True)
        assert not np.array_equal(plain, rotated)

    def test_rotated_scene_geometry(self):
        cloud = PointCloud(np.array([[0.0, 0.5, 2.0]]), np.array([[0.1, 0.2, 0.3]]))
        out = rotated_scene(cloud)
        assert out.points[0] == pytest.approx([2.0, 0.5, 0.0], abs=1e-12)
        assert np.array_equal(out.colors, cloud.colors)

    def test_diff_mode_recovers_two_channels(self, dataset, tmp_path):
        from pointsound.scenes import list_example_dirs, read_example_dir

        path = tmp_path / "diff.ckpt"
        save_checkpoint(path, train(tiny_train_config(loss_mode="diff"), dataset))
        vnet, anet, config = load_model(path)
        assert anet.config.output_channels == 1
        ex = read_example_dir(list_example_dirs(dataset, "test")[0])
        pred = predict_binaural(vnet, anet, config, ex.scene, ex.s_m)
        assert pred.shape == (2, ex.s_m.length)

    def test_input_validation(self, dataset, checkpoint):
        from pointsound.scenes import list_example_dirs, read_example_dir

        vnet, anet, config = load_model(checkpoint)
        ex = read_example_dir(list_example_dirs(dataset, "test")[0])
        stereo = AudioClip(np.zeros((2, 2000)), config.sample_rate)
        with pytest.raises(ValueError):
            predict_binaural(vnet, anet, config, ex.scene, stereo)
        wrong_rate = AudioClip(np.zeros((1, 2000)), config.sample_rate * 2)
        with pytest.raises(ValueError):
            predict_binaural(vnet, anet, config, ex.scene, wrong_rate)

    def test_mono_mono_duplicates_the_mix(self):
        clip = AudioClip(np.arange(5, dtype=np.float64)[None, :], 8000)
        pred = mono_mono_prediction(clip)
        assert pred.shape == (2, 5)
        assert np.array_equal(pred[0], pred[1])
        assert np.array_equal(pred[0], clip.samples[0])


class TestDistances:
    def test_truth_as_prediction_scores_zero(self):
        rng = np.random.default_rng(0)
        truth = rng.standard_normal((2, 2000))
        env_d, stft_d = clip_distances(truth, truth.copy(), 8000)
        assert env_d == 0.0
        assert stft_d == 0.0

    def test_mono_mono_penalized_on_hard_left_source(self):
        rng = np.random.default_rng(1)
        src = AudioClip(rng.standard_normal(2000)[None, :], 8000)
        left = np.zeros(8)
        left[0] = 1.0
        hard_left = HRIRSet(
            8000, {k: (left.copy(), np.zeros(8)) for k in range(AZIMUTH_COUNT)}
        )
        from pointsound.binaural import render_binaural

        truth = render_binaural(src, 2, hard_left).samples
        mono = AudioClip(truth.sum(axis=0)[None, :], 8000)
        env_d, stft_d = clip_distances(truth, mono_mono_prediction(mono), 8000)
        assert env_d > 0.0
        assert stft_d > 0.0


class TestReports:
    def test_schema_and_bucket_counts(self, dataset, checkpoint):
        report = evaluate_checkpoint(checkpoint, dataset)
        assert report["split"] == "test"
        assert report["size"] == 6
        assert sum(report["counts"].values()) == report["size"]
        assert set(report["methods"]) == set(METHODS)
        for entry in report["methods"].values():
            for metric in ("env", "stft"):
                assert set(entry[metric]) == {"1", "2", "3", "avg"}
                assert entry[metric]["avg"] >= 0.0
                for n in ("1", "2", "3"):
                    count = report["counts"][n]
                    if count:
                        assert entry[metric][n] >= 0.0
                    else:
                        assert entry[metric][n] is None

    def test_deterministic(self, dataset, checkpoint):
        a = evaluate_checkpoint(checkpoint, dataset)
        b = evaluate_checkpoint(checkpoint, dataset)
        assert a == b

    def test_mono_mono_is_checkpoint_independent(self, dataset, checkpoint, tmp_path):
        other = tmp_path / "other.ckpt"
        save_checkpoint(other, train(tiny_train_config(seed=5), dataset))
        a = evaluate_checkpoint(checkpoint, dataset)
        b = evaluate_checkpoint(other, dataset)
        assert a["methods"]["mono-mono"] == b["methods"]["mono-mono"]
        assert a["methods"]["model"] != b["methods"]["model"]

    def test_unknown_method_rejected(self, dataset, checkpoint):
        vnet, anet, config = load_model(checkpoint)
        with pytest.raises(ValueError):
            evaluate_nets(vnet, anet, config, dataset, methods=("model", "oracle"))

    def test_write_report_round_trip(self, dataset, checkpoint, tmp_path):
        report = evaluate_checkpoint(checkpoint, dataset)
        out = tmp_path / "report.json"
        write_report(out, report)
        assert json.loads(out.read_text()) == report
