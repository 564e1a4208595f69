"""Drive the whole pipeline through the command-line interface.

The same four commands cover dataset synthesis, training, inference and
scoring.  Every run here passes --threads 1, which also pins the BLAS
thread pools, so repeating a command reproduces its outputs bit for bit.

Run with:  python3 demos/07_command_line.py
"""
import json
import subprocess
import sys
import tempfile
from pathlib import Path


def run(*args):
    cmd = [sys.executable, "-m", "pointsound.cli", "--threads", "1", *args]
    print("$ pointsound " + " ".join(args))
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        sys.stderr.write(proc.stderr)
        raise SystemExit(proc.returncode)
    return proc.stdout


def main():
    work = Path(tempfile.mkdtemp(prefix="pointsound_cli_"))
    data = work / "data"

    gen_cfg = work / "gen.json"
    gen_cfg.write_text(json.dumps({"clip_secs": 0.25}))
    for split, count in (("train", 16), ("val", 6), ("test", 8)):
        run("gen-data", "--out", str(data), "--split", split,
            "--count", str(count), "--config", str(gen_cfg))
    n_files = sum(1 for _ in data.rglob("*") if _.is_file())
    print(f"-> {n_files} files under {data}\n")

    train_cfg = work / "train.json"
    train_cfg.write_text(json.dumps({
        "iterations": 60,
        "eval_every": 30,
        "batch_size": 4,
        "stage_channels": [4, 8, 8, 8],
        "head_channels": 8,
        "audio_depth": 2,
        "audio_channels": 8,
        "voxel_size": 0.1,
    }))
    ckpt = work / "model.p2s-ckpt"
    out = run("train", "--data", str(data), "--out", str(ckpt),
              "--config", str(train_cfg))
    summary = json.loads(out.splitlines()[-1])
    print(f"-> best val loss {summary['best_val_loss']:.4f} "
          f"at iteration {summary['best_iteration']}\n")

    example = sorted((data / "test").iterdir())[0]
    wav = work / "pred.wav"
    run("binauralize", "--ckpt", str(ckpt), "--scene", str(example / "scene.p2s-cloud"),
        "--mono", str(example / "mono.wav"), "--out", str(wav))
    first = wav.read_bytes()
    run("binauralize", "--ckpt", str(ckpt), "--scene", str(example / "scene.p2s-cloud"),
        "--mono", str(example / "mono.wav"), "--out", str(wav))
    print(f"-> two runs byte-identical: {first == wav.read_bytes()}\n")

    report_path = work / "report.json"
    run("evaluate", "--ckpt", str(ckpt), "--data", str(data),
        "--out", str(report_path))
    report = json.loads(report_path.read_text())
    print(f"-> scored {report['size']} held-out scenes; methods: "
          + ", ".join(sorted(report["methods"])))
    print(f"\nartifacts kept in {work}")


if __name__ == "__main__":
    main()
