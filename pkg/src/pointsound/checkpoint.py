"""Binary checkpoint serialization.

Layout (all integers little-endian):

    magic   4 bytes  b"P2SC"
    version u32      (currently 1)
    count   u32      number of tensors
    then per tensor:
        name_len u16, name utf-8 bytes
        dtype    u8   (0 = float32, 1 = float64)
        ndim     u8
        dims     ndim * u64
        data     raw little-endian values

Optimizer state rides along as ordinary tensors named ``adam.m.<param>``,
``adam.v.<param>`` and the scalar ``adam.step``.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"P2SC"
VERSION = 1

_DTYPE_TAGS = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_TAG_FOR = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}


def save_tensors(path, tensors):
    """Write {name -> ndarray} to `path` in checkpoint format."""
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(tensors)))
        for name, arr in tensors.items():
            arr = np.asarray(arr)
            if arr.dtype not in _TAG_FOR:
                raise ValueError(f"unsupported dtype {arr.dtype} for tensor {name!r}")
            nb = name.encode("utf-8")
            f.write(struct.pack("<H", len(nb)))
            f.write(nb)
            f.write(struct.pack("<BB", _TAG_FOR[arr.dtype], arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            f.write(np.ascontiguousarray(arr).astype(arr.dtype.newbyteorder("<")).tobytes())


def load_tensors(path):
    """Read a checkpoint back into {name -> ndarray}."""
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:4] != MAGIC:
        raise ValueError(f"{path}: bad magic {raw[:4]!r}, expected {MAGIC!r}")
    version, count = struct.unpack_from("<II", raw, 4)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    off = 12
    out = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", raw, off)
        off += 2
        name = raw[off : off + name_len].decode("utf-8")
        off += name_len
        tag, ndim = struct.unpack_from("<BB", raw, off)
        off += 2
        if tag not in _DTYPE_TAGS:
            raise ValueError(f"{path}: unknown dtype tag {tag} for tensor {name!r}")
        dims = struct.unpack_from(f"<{ndim}Q", raw, off)
        off += 8 * ndim
        dt = _DTYPE_TAGS[tag]
        n = int(np.prod(dims, dtype=np.int64)) if ndim else 1
        arr = np.frombuffer(raw, dtype=dt, count=n, offset=off).reshape(dims)
        off += n * dt.itemsize
        out[name] = arr.astype(dt.newbyteorder("="))
    if off != len(raw):
        raise ValueError(f"{path}: {len(raw) - off} trailing bytes after last tensor")
    return out
