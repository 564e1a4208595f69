"""Sparse ResNet18 vision encoder producing the conditioning vector h.

Architecture: stem (3x3x3 sparse conv, stride 1) -> 4 stages of 2 residual
blocks (the first block of stages 2-4 downsamples with stride 2) -> head
3x3x3 conv to K channels -> global max pool per batch item.

Kernel maps depend only on the coordinate set, so one stride-1 map is shared
by every stride-1 convolution at the same resolution level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import sparse as S
from .tensor import Tensor, uniform_init


@dataclass
class VisionConfig:
    stage_channels: tuple = (16, 32, 64, 128)
    head_channels: int = 16  # K, the conditioning width
    voxel_size: float = 0.02
    feature_mode: str = "rgb-depth"  # or "depth"

    def __post_init__(self):
        self.stage_channels = tuple(int(c) for c in self.stage_channels)
        if len(self.stage_channels) != 4:
            raise ValueError("stage_channels must list exactly 4 widths")
        if self.head_channels < 1:
            raise ValueError("head_channels must be >= 1")


class SparseConvLayer:
    def __init__(self, rng, c_in, c_out, kernel_size, stride, bias, dtype):
        v = kernel_size**3
        self.weight = uniform_init(rng, (v, c_in, c_out), c_in * v, dtype)
        self.bias = Tensor(np.zeros(c_out, dtype=dtype)) if bias else None
        self.kernel_size = kernel_size
        self.stride = stride

    def __call__(self, st, kmap):
        return S.sparse_conv(st, kmap, self.weight, self.bias)

    def named(self, prefix):
        out = {f"{prefix}.weight": self.weight}
        if self.bias is not None:
            out[f"{prefix}.bias"] = self.bias
        return out


class SparseBatchNormLayer:
    def __init__(self, c, dtype):
        self.gamma = Tensor(np.ones(c, dtype=dtype))
        self.beta = Tensor(np.zeros(c, dtype=dtype))
        self.running_mean = np.zeros(c, dtype=dtype)
        self.running_var = np.ones(c, dtype=dtype)

    def __call__(self, st, training):
        return S.sparse_batch_norm(
            st, self.gamma, self.beta, self.running_mean, self.running_var, training
        )

    def named(self, prefix):
        return {f"{prefix}.gamma": self.gamma, f"{prefix}.beta": self.beta}

    def named_stats(self, prefix):
        return {
            f"{prefix}.running_mean": self.running_mean,
            f"{prefix}.running_var": self.running_var,
        }


class ResidualBlock:
    """conv-BN-ReLU-conv-BN plus (projected) shortcut, ReLU after the sum."""

    def __init__(self, rng, c_in, c_out, stride, dtype):
        self.conv1 = SparseConvLayer(rng, c_in, c_out, 3, stride, False, dtype)
        self.bn1 = SparseBatchNormLayer(c_out, dtype)
        self.conv2 = SparseConvLayer(rng, c_out, c_out, 3, 1, False, dtype)
        self.bn2 = SparseBatchNormLayer(c_out, dtype)
        if stride != 1 or c_in != c_out:
            self.proj = SparseConvLayer(rng, c_in, c_out, 1, stride, False, dtype)
        else:
            self.proj = None
        self.stride = stride

    def forward(self, st, maps, training):
        """maps: (map for conv1, map for conv2, map for projection or None)."""
        m1, m2, mp = maps
        if st.num_channels != self.conv1.weight.data.shape[1]:
            raise ValueError(
                f"residual block expects width {self.conv1.weight.data.shape[1]}, "
                f"got {st.num_channels}"
            )
        y = self.bn1(self.conv1(st, m1), training)
        y = S.sparse_relu(y)
        y = self.bn2(self.conv2(y, m2), training)
        shortcut = st if self.proj is None else self.proj(st, mp)
        return S.sparse_relu(S.sparse_add(y, shortcut))

    def named(self, prefix):
        out = {}
        out.update(self.conv1.named(f"{prefix}.conv1"))
        out.update(self.bn1.named(f"{prefix}.bn1"))
        out.update(self.conv2.named(f"{prefix}.conv2"))
        out.update(self.bn2.named(f"{prefix}.bn2"))
        if self.proj is not None:
            out.update(self.proj.named(f"{prefix}.proj"))
        return out

    def named_stats(self, prefix):
        out = {}
        out.update(self.bn1.named_stats(f"{prefix}.bn1"))
        out.update(self.bn2.named_stats(f"{prefix}.bn2"))
        return out


class VisionNet:
    def __init__(self, config, rng, dtype=np.float32):
        self.config = config
        ch = config.stage_channels
        self.stem_conv = SparseConvLayer(rng, 3, ch[0], 3, 1, False, dtype)
        self.stem_bn = SparseBatchNormLayer(ch[0], dtype)
        self.stages = []
        c_prev = ch[0]
        for si, c in enumerate(ch):
            stride = 1 if si == 0 else 2
            blocks = [
                ResidualBlock(rng, c_prev, c, stride, dtype),
                ResidualBlock(rng, c, c, 1, dtype),
            ]
            self.stages.append(blocks)
            c_prev = c
        self.head = SparseConvLayer(rng, ch[3], config.head_channels, 3, 1, True, dtype)

    def forward(self, scene, training=False):
        """scene: SparseTensor with 3-wide features -> Tensor (B, K)."""
        if len(scene) == 0:
            raise ValueError("empty scene")
        if scene.num_channels != 3:
            raise ValueError(f"vision net expects 3 input features, got {scene.num_channels}")
        m_same = S.build_kernel_map(scene, 3, 1)
        x = S.sparse_relu(self.stem_bn(self.stem_conv(scene, m_same), training))
        for si, blocks in enumerate(self.stages):
            if si == 0:
                x = blocks[0].forward(x, (m_same, m_same, None), training)
            else:
                m_down = S.build_kernel_map(x, 3, 2)
                m_proj = S.build_kernel_map(x, 1, 2)
                coarse = S.SparseTensor(
                    m_down.out_coords,
                    np.zeros((m_down.n_out, 1), dtype=x.feats.dtype),
                    x.batch_size,
                    _keys=m_down.out_keys,
                )
                m_same = S.build_kernel_map(coarse, 3, 1)
                x = blocks[0].forward(x, (m_down, m_same, m_proj), training)
            x = blocks[1].forward(x, (m_same, m_same, None), training)
        x = self.head(x, m_same)
        return S.global_max_pool(x)

    def named_parameters(self):
        out = {}
        out.update(self.stem_conv.named("vision.stem.conv"))
        out.update(self.stem_bn.named("vision.stem.bn"))
        for si, blocks in enumerate(self.stages, start=1):
            for bi, blk in enumerate(blocks, start=1):
                out.update(blk.named(f"vision.stage{si}.block{bi}"))
        out.update(self.head.named("vision.head"))
        return out

    def state_arrays(self):
        """All persistent arrays: trainable params plus batch-norm stats."""
        out = {name: t.data for name, t in self.named_parameters().items()}
        out.update(self.stem_bn.named_stats("vision.stem.bn"))
        for si, blocks in enumerate(self.stages, start=1):
            for bi, blk in enumerate(blocks, start=1):
                out.update(blk.named_stats(f"vision.stage{si}.block{bi}"))
        return out

    def load_state(self, arrays):
        params = self.named_parameters()
        for name, t in params.items():
            if name not in arrays:
                raise ValueError(f"checkpoint missing tensor {name}")
            if arrays[name].shape != t.data.shape:
                raise ValueError(f"shape mismatch for {name}")
            t.data = arrays[name].astype(t.data.dtype).copy()
        for name, arr in self.state_arrays().items():
            if name.endswith(("running_mean", "running_var")):
                if name not in arrays:
                    raise ValueError(f"checkpoint missing tensor {name}")
                arr[...] = arrays[name].astype(arr.dtype)


def vision_forward(scene, net, training=False):
    """Convenience wrapper mirroring the one-scene contract."""
    return net.forward(scene, training=training)
