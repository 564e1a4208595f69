"""Sparse voxel tensors and generalized sparse 3D convolution.

Coordinates are integer (batch, x, y, z) rows.  Rows are kept sorted by an
int64 packed key (batch in the high bits, then x, y, z), which makes batch
segments contiguous, gives every tensor a canonical row order, and lets
kernel maps be built with vectorized binary search instead of per-voxel
hashing.

A kernel map lists, for every kernel offset, the (input_row, output_row)
pairs it connects.  Within one offset each input row and each output row
appears at most once, so gather / matmul / scatter-add with fancy indexing
is collision-free.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .tensor import Tensor, as_tensor, record

_FIELD_BITS = 19
_FIELD_OFF = 1 << (_FIELD_BITS - 1)  # coordinate offset so negatives pack
_FIELD_MOD = 1 << _FIELD_BITS
COORD_LIMIT = _FIELD_OFF  # valid coordinate range is (-COORD_LIMIT, COORD_LIMIT)
BATCH_LIMIT = 1 << (63 - 3 * _FIELD_BITS)  # batch bits left after 3 spatial fields


def encode_coords(coords):
    """Pack (n, 4) integer (b, x, y, z) rows into sortable int64 keys."""
    c = np.asarray(coords, dtype=np.int64)
    if c.ndim != 2 or c.shape[1] != 4:
        raise ValueError(f"coords must be (n, 4), got {c.shape}")
    batch = c[:, 0]
    if batch.size and (batch.min() < 0 or batch.max() >= BATCH_LIMIT):
        raise ValueError("batch index out of packable range")
    spatial = c[:, 1:]
    if spatial.size and (spatial.min() <= -COORD_LIMIT or spatial.max() >= COORD_LIMIT):
        raise ValueError("coordinate out of packable range")
    key = c[:, 0]
    for axis in range(3):
        key = key * _FIELD_MOD + (spatial[:, axis] + _FIELD_OFF)
    return key


class SparseTensor:
    """Sorted sparse voxel tensor: integer coords plus per-row features."""

    def __init__(self, coords, feats, batch_size=1, _keys=None):
        coords = np.asarray(coords, dtype=np.int64)
        feats = as_tensor(feats)
        if coords.shape[0] != feats.data.shape[0]:
            raise ValueError("coords and feats row counts differ")
        if _keys is None:
            keys = encode_coords(coords)
            order = np.argsort(keys, kind="stable")
            coords = coords[order]
            keys = keys[order]
            feats = Tensor(feats.data[order])
            if keys.size > 1 and np.any(keys[1:] == keys[:-1]):
                raise ValueError("duplicate coordinates in SparseTensor")
        else:
            keys = _keys
        self.coords = coords
        self.keys = keys
        self.feats = feats
        self.batch_size = int(batch_size)
        self._coord_index = None

    def __len__(self):
        return self.coords.shape[0]

    @property
    def num_channels(self):
        return self.feats.data.shape[1]

    @property
    def coord_index(self):
        """Mapping {(b, x, y, z) -> row}; built lazily, mainly for lookups in tests."""
        if self._coord_index is None:
            self._coord_index = {tuple(row): i for i, row in enumerate(self.coords.tolist())}
        return self._coord_index

    def batch_slices(self):
        b = self.coords[:, 0]
        starts = np.searchsorted(b, np.arange(self.batch_size), side="left")
        ends = np.searchsorted(b, np.arange(self.batch_size), side="right")
        return starts, ends

    def to_dense(self):
        """Densify into (B, C, X, Y, Z) plus the minimum corner; test/demo helper."""
        if len(self) == 0:
            raise ValueError("cannot densify an empty SparseTensor")
        mins = self.coords[:, 1:].min(axis=0)
        maxs = self.coords[:, 1:].max(axis=0)
        shape = (self.batch_size, self.num_channels) + tuple((maxs - mins + 1).tolist())
        dense = np.zeros(shape, dtype=self.feats.data.dtype)
        idx = self.coords[:, 1:] - mins
        dense[self.coords[:, 0], :, idx[:, 0], idx[:, 1], idx[:, 2]] = self.feats.data
        return dense, mins


def voxelize(cloud, voxel_size, feature_mode="rgb-depth", batch_index=0, dtype=np.float32):
    """Quantize a point cloud onto an integer voxel grid.

    Duplicate points in one voxel have their features averaged.  Feature
    modes: ``rgb-depth`` uses the point colors, ``depth`` uses the raw
    (non-discretized) point coordinates.  Points are canonically sorted
    before averaging so any permutation of the input yields bit-identical
    output.
    """
    if voxel_size <= 0:
        raise ValueError(f"voxel_size must be positive, got {voxel_size}")
    n = len(cloud)
    if n == 0:
        raise ValueError("cannot voxelize an empty cloud")
    if feature_mode == "rgb-depth":
        if not cloud.has_rgb:
            raise ValueError("rgb-depth feature mode requires point colors")
        feats = cloud.colors
    elif feature_mode == "depth":
        feats = cloud.points
    else:
        raise ValueError(f"unknown feature mode {feature_mode!r}")

    vox = np.floor(cloud.points / voxel_size).astype(np.int64)
    coords = np.concatenate(
        [np.full((n, 1), batch_index, dtype=np.int64), vox], axis=1
    )
    keys = encode_coords(coords)
    # Full-column lexsort (np.lexsort treats the LAST key as primary): voxel
    # key first, then every point and feature column, so equal-voxel points
    # always sum in the same order regardless of input permutation.
    order = np.lexsort((feats[:, 2], feats[:, 1], feats[:, 0],
                        cloud.points[:, 2], cloud.points[:, 1], cloud.points[:, 0],
                        keys))
    keys_s = keys[order]
    coords_s = coords[order]
    feats_s = np.asarray(feats, dtype=np.float64)[order]

    boundaries = np.flatnonzero(np.diff(keys_s)) + 1
    starts = np.concatenate([[0], boundaries])
    counts = np.diff(np.concatenate([starts, [n]]))
    sums = np.add.reduceat(feats_s, starts, axis=0)
    mean_feats = (sums / counts[:, None]).astype(dtype)
    return SparseTensor(
        coords_s[starts], mean_feats, batch_size=batch_index + 1, _keys=keys_s[starts]
    )


# ---------------------------------------------------------------------------
# kernel maps
# ---------------------------------------------------------------------------


@dataclass
class KernelMap:
    """Gather/scatter plan for one sparse convolution."""

    out_coords: np.ndarray  # (m, 4)
    out_keys: np.ndarray  # (m,)
    pairs: list  # per kernel offset: (in_rows, out_rows) int arrays
    offsets: np.ndarray  # (V, 3) kernel offsets in lexicographic order
    n_in: int
    stride: int
    kernel_size: int
    batch_size: int

    @property
    def n_out(self):
        return self.out_coords.shape[0]


def kernel_offsets(kernel_size):
    """Lexicographically ordered offsets of a cubic kernel, e.g. 27 for size 3."""
    if kernel_size % 2 != 1 or kernel_size < 1:
        raise ValueError(f"kernel_size must be odd and >= 1, got {kernel_size}")
    half = kernel_size // 2
    rng = range(-half, half + 1)
    return np.array(list(product(rng, rng, rng)), dtype=np.int64)


def build_kernel_map(st, kernel_size, stride):
    """Build the (input_row, output_row) pairs for every kernel offset.

    stride 1 preserves the coordinate set; stride s > 1 produces the unique
    floor-divided coordinates on the coarser grid.  A pair (i, o) is listed
    for offset d exactly when in_coords[i] == out_coords[o] * s + d.
    """
    if stride not in (1, 2) and stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    in_coords = st.coords
    in_keys = st.keys
    if stride == 1:
        out_coords = in_coords
        out_keys = in_keys
    else:
        coarse = in_coords.copy()
        coarse[:, 1:] = np.floor_divide(coarse[:, 1:], stride)
        keys = encode_coords(coarse)
        out_keys, first = np.unique(keys, return_index=True)
        out_coords = coarse[first]

    offsets = kernel_offsets(kernel_size)
    pairs = []
    m = out_coords.shape[0]
    out_rows_all = np.arange(m, dtype=np.int64)
    base = out_coords[:, 1:] * stride
    batch_col = out_coords[:, :1]
    for d in offsets:
        probe = np.concatenate([batch_col, base + d], axis=1)
        probe_keys = encode_coords(probe)
        pos = np.searchsorted(in_keys, probe_keys)
        pos_c = np.minimum(pos, len(in_keys) - 1)
        hit = in_keys[pos_c] == probe_keys
        pairs.append((pos_c[hit], out_rows_all[hit]))
    return KernelMap(
        out_coords=out_coords,
        out_keys=out_keys,
        pairs=pairs,
        offsets=offsets,
        n_in=in_coords.shape[0],
        stride=stride,
        kernel_size=kernel_size,
        batch_size=st.batch_size,
    )


# ---------------------------------------------------------------------------
# differentiable sparse ops
# ---------------------------------------------------------------------------


def sparse_conv(st, kmap, weight, bias=None):
    """Generalized sparse convolution over a prebuilt kernel map.

    weight: Tensor (V, C_in, C_out) with V = kernel_size ** 3.
    Returns a SparseTensor on the kernel map's output coordinates.
    """
    weight = as_tensor(weight)
    if bias is not None:
        bias = as_tensor(bias)
    feats = st.feats
    x = feats.data
    v, c_in, c_out = weight.data.shape
    if v != kmap.kernel_size**3:
        raise ValueError(f"weight has {v} offsets, kernel map expects {kmap.kernel_size ** 3}")
    if x.shape[1] != c_in:
        raise ValueError(f"feature width {x.shape[1]} != weight C_in {c_in}")
    if x.shape[0] != kmap.n_in:
        raise ValueError("kernel map was built for a different tensor")

    w = weight.data
    out_d = np.zeros((kmap.n_out, c_out), dtype=x.dtype)
    for o, (in_rows, out_rows) in enumerate(kmap.pairs):
        if len(in_rows) == 0:
            continue
        out_d[out_rows] += x[in_rows] @ w[o]
    if bias is not None:
        out_d += bias.data

    out_feats = Tensor(out_d)

    def vjp(g):
        gx = np.zeros_like(x)
        gw = np.zeros_like(w)
        for o, (in_rows, out_rows) in enumerate(kmap.pairs):
            if len(in_rows) == 0:
                continue
            g_rows = g[out_rows]
            gx[in_rows] += g_rows @ w[o].T
            gw[o] = x[in_rows].T @ g_rows
        grads = [gx, gw]
        if bias is not None:
            grads.append(g.sum(axis=0))
        return grads

    inputs = (feats, weight) if bias is None else (feats, weight, bias)
    record(out_feats, inputs, vjp)
    return SparseTensor(kmap.out_coords, out_feats, kmap.batch_size, _keys=kmap.out_keys)


def sparse_batch_norm(st, gamma, beta, running_mean, running_var, training,
                      eps=1e-5, momentum=0.1):
    """Per-channel batch norm over all rows of the (merged) batch.

    Training mode normalizes with biased batch statistics and updates the
    running arrays in place; eval mode normalizes with the running stats.
    """
    gamma, beta = as_tensor(gamma), as_tensor(beta)
    feats = st.feats
    x = feats.data
    n = x.shape[0]
    if training:
        if n < 2:
            raise ValueError(f"batch norm needs >= 2 rows in training mode, got {n}")
        mu = x.mean(axis=0)
        xc = x - mu
        var = np.mean(np.square(xc), axis=0)
        running_mean *= 1.0 - momentum
        running_mean += momentum * mu.astype(running_mean.dtype)
        running_var *= 1.0 - momentum
        running_var += momentum * var.astype(running_var.dtype)
    else:
        mu = running_mean.astype(x.dtype)
        var = running_var.astype(x.dtype)
        xc = x - mu
    inv = 1.0 / np.sqrt(var + np.asarray(eps, dtype=x.dtype))
    xhat = xc * inv
    out_d = xhat * gamma.data + beta.data
    out_feats = Tensor(out_d)

    if training:

        def vjp(g):
            gg = (g * xhat).sum(axis=0)
            gb = g.sum(axis=0)
            gx = (gamma.data * inv) * (g - gb / n - xhat * (gg / n))
            return gx, gg, gb

    else:

        def vjp(g):
            gg = (g * xhat).sum(axis=0)
            gb = g.sum(axis=0)
            gx = g * (gamma.data * inv)
            return gx, gg, gb

    record(out_feats, (feats, gamma, beta), vjp)
    return SparseTensor(st.coords, out_feats, st.batch_size, _keys=st.keys)


def sparse_relu(st):
    feats = st.feats
    out_d = np.maximum(feats.data, 0)
    mask = feats.data > 0
    out_feats = Tensor(out_d)
    record(out_feats, (feats,), lambda g: (g * mask,))
    return SparseTensor(st.coords, out_feats, st.batch_size, _keys=st.keys)


def sparse_add(a, b):
    """Row-wise sum of two sparse tensors on the same coordinate set."""
    if a.coords.shape != b.coords.shape or not np.array_equal(a.keys, b.keys):
        raise ValueError("sparse_add requires identical coordinate sets")
    fa, fb = a.feats, b.feats
    out_feats = Tensor(fa.data + fb.data)
    record(out_feats, (fa, fb), lambda g: (g, g))
    return SparseTensor(a.coords, out_feats, a.batch_size, _keys=a.keys)


def global_max_pool(st):
    """Per-batch-item channelwise max over rows -> Tensor (B, C).

    The gradient routes to the first row attaining each maximum.
    """
    feats = st.feats
    x = feats.data
    b = st.batch_size
    starts, ends = st.batch_slices()
    if np.any(starts == ends):
        empty = int(np.flatnonzero(starts == ends)[0])
        raise ValueError(f"batch item {empty} has no voxels")
    c = x.shape[1]
    out_d = np.empty((b, c), dtype=x.dtype)
    arg = np.empty((b, c), dtype=np.int64)
    for i in range(b):
        seg = x[starts[i] : ends[i]]
        am = seg.argmax(axis=0)
        arg[i] = starts[i] + am
        out_d[i] = seg[am, np.arange(c)]
    out = Tensor(out_d)
    cols = np.broadcast_to(np.arange(c), (b, c))

    def vjp(g):
        gx = np.zeros_like(x)
        gx[arg, cols] += g
        return (gx,)

    record(out, (feats,), vjp)
    return out
