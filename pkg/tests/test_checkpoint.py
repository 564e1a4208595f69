import struct

import numpy as np
import pytest

from pointsound.checkpoint import MAGIC, load_tensors, save_tensors


def test_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    tensors = {
        "vision.stem.weight": rng.standard_normal((27, 3, 4)).astype(np.float32),
        "audio.enc1.bias": rng.standard_normal(8).astype(np.float64),
        "adam.step": np.asarray(17.0),
        "meta.sample_rate": np.asarray(8000.0),
    }
    path = tmp_path / "model.ckpt"
    save_tensors(path, tensors)
    loaded = load_tensors(path)
    assert set(loaded) == set(tensors)
    for name, arr in tensors.items():
        assert loaded[name].dtype == arr.dtype
        np.testing.assert_array_equal(loaded[name], arr)


def test_wire_layout(tmp_path):
    path = tmp_path / "one.ckpt"
    save_tensors(path, {"w": np.asarray([1.0, 2.0], dtype=np.float32)})
    raw = path.read_bytes()
    assert raw[:4] == MAGIC
    version, count = struct.unpack_from("<II", raw, 4)
    assert version == 1 and count == 1
    (name_len,) = struct.unpack_from("<H", raw, 12)
    assert name_len == 1 and raw[14:15] == b"w"
    dtype_tag, ndim = struct.unpack_from("<BB", raw, 15)
    assert dtype_tag == 0 and ndim == 1
    (dim0,) = struct.unpack_from("<Q", raw, 17)
    assert dim0 == 2
    vals = np.frombuffer(raw, dtype="<f4", count=2, offset=25)
    np.testing.assert_array_equal(vals, [1.0, 2.0])
    assert len(raw) == 25 + 8


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(ValueError, match="magic"):
        load_tensors(path)


def test_deterministic_bytes(tmp_path):
    tensors = {"a": np.arange(6, dtype=np.float32).reshape(2, 3), "b": np.asarray(1.0)}
    p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    save_tensors(p1, tensors)
    save_tensors(p2, tensors)
    assert p1.read_bytes() == p2.read_bytes()
