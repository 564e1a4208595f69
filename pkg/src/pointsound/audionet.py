"""Conditioned waveform encoder/decoder for mono-to-binaural synthesis.

Each encoder level halves time resolution 4x with a kernel-8 stride-4 conv,
then applies a gated 1x1 conv; each decoder level mirrors it with a
transposed conv.  The visual conditioning vector h enters every level as
learned per-channel offsets (h @ V broadcast over time).  The final decoder
level omits the trailing ReLU so the output can be signed audio.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .audio import AudioClip
from .tensor import Tensor, uniform_init


@dataclass
class AudioNetConfig:
    depth: int = 6
    initial_channels: int = 8
    kernel: int = 8
    stride: int = 4
    cond_dim: int = 16
    output_channels: int = 2  # 2 for full binaural output, 1 for the L-R difference
    sample_rate: int = 8000

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if self.output_channels not in (1, 2):
            raise ValueError("output_channels must be 1 or 2")


def _cond(h, v):
    """Project h (B, cond) to per-channel offsets and lift to (B, C, 1)."""
    hv = T.matmul(h, v)
    b, c = hv.data.shape
    return T.reshape(hv, (b, c, 1))


class EncoderBlock:
    def __init__(self, rng, c_in, c_out, kernel, stride, cond_dim, dtype):
        self.w1 = uniform_init(rng, (c_out, c_in, kernel), c_in * kernel, dtype)
        self.b1 = Tensor(np.zeros(c_out, dtype=dtype))
        self.v1 = uniform_init(rng, (cond_dim, c_out), cond_dim, dtype)
        self.w2 = uniform_init(rng, (2 * c_out, c_out, 1), c_out, dtype)
        self.b2 = Tensor(np.zeros(2 * c_out, dtype=dtype))
        self.v2 = uniform_init(rng, (cond_dim, 2 * c_out), cond_dim, dtype)
        self.stride = stride

    def forward(self, x, h):
        y = T.conv1d(x, self.w1, self.b1, self.stride)
        y = T.relu(T.add(y, _cond(h, self.v1)))
        z = T.conv1d(y, self.w2, self.b2, 1)
        z = T.add(z, _cond(h, self.v2))
        return T.glu(z)

    def named(self, prefix):
        return {
            f"{prefix}.w1": self.w1, f"{prefix}.b1": self.b1, f"{prefix}.v1": self.v1,
            f"{prefix}.w2": self.w2, f"{prefix}.b2": self.b2, f"{prefix}.v2": self.v2,
        }


class DecoderBlock:
    def __init__(self, rng, c, c_out, kernel, stride, cond_dim, final, dtype):
        self.w1 = uniform_init(rng, (2 * c, c, 1), c, dtype)
        self.b1 = Tensor(np.zeros(2 * c, dtype=dtype))
        self.v1 = uniform_init(rng, (cond_dim, 2 * c), cond_dim, dtype)
        self.w2 = uniform_init(rng, (c, c_out, kernel), c * kernel, dtype)
        self.b2 = Tensor(np.zeros(c_out, dtype=dtype))
        self.v2 = uniform_init(rng, (cond_dim, c_out), cond_dim, dtype)
        self.stride = stride
        self.final = final

    def forward(self, x, skip, h):
        if x is not None:
            if x.data.shape != skip.data.shape:
                raise ValueError(f"skip shape {skip.data.shape} != decoder state {x.data.shape}")
            s = T.add(x, skip)
        else:
            s = skip
        z = T.conv1d(s, self.w1, self.b1, 1)
        z = T.glu(T.add(z, _cond(h, self.v1)))
        y = T.conv1d_transpose(z, self.w2, self.b2, self.stride)
        y = T.add(y, _cond(h, self.v2))
        return y if self.final else T.relu(y)

    def named(self, prefix):
        return {
            f"{prefix}.w1": self.w1, f"{prefix}.b1": self.b1, f"{prefix}.v1": self.v1,
            f"{prefix}.w2": self.w2, f"{prefix}.b2": self.b2, f"{prefix}.v2": self.v2,
        }


class AudioNet:
    def __init__(self, config, rng, dtype=np.float32):
        self.config = config
        ch = [config.initial_channels * 2**i for i in range(config.depth)]
        self.encoders = []
        self.decoders = []
        for i in range(config.depth):
            c_in = 1 if i == 0 else ch[i - 1]
            self.encoders.append(
                EncoderBlock(rng, c_in, ch[i], config.kernel, config.stride,
                             config.cond_dim, dtype)
            )
        for i in range(config.depth):
            c_out = config.output_channels if i == 0 else ch[i - 1]
            self.decoders.append(
                DecoderBlock(rng, ch[i], c_out, config.kernel, config.stride,
                             config.cond_dim, final=(i == 0), dtype=dtype)
            )

    def valid_length(self, t):
        """Smallest padded length >= t that flows through all levels exactly."""
        k, s, d = self.config.kernel, self.config.stride, self.config.depth
        length = t
        for _ in range(d):
            length = max(int(np.ceil((length - k) / s)) + 1, 1)
        for _ in range(d):
            length = (length - 1) * s + k
        return length

    def forward(self, x, h):
        """x: Tensor (B, 1, T); h: Tensor (B, cond_dim) -> (B, out_ch, T)."""
        t = x.data.shape[-1]
        if t == 0:
            raise ValueError("empty clip")
        if x.data.shape[1] != 1:
            raise ValueError(f"audio net input must be mono, got {x.data.shape[1]} channels")
        pad = self.valid_length(t) - t
        cur = T.pad_right(x, pad) if pad else x
        skips = []
        for enc in self.encoders:
            cur = enc.forward(cur, h)
            skips.append(cur)
        state = None
        for i in reversed(range(self.config.depth)):
            state = self.decoders[i].forward(state, skips[i], h)
        return T.trim_right(state, t)

    def named_parameters(self):
        out = {}
        for i, enc in enumerate(self.encoders, start=1):
            out.update(enc.named(f"audio.enc{i}"))
        for i, dec in enumerate(self.decoders, start=1):
            out.update(dec.named(f"audio.dec{i}"))
        return out

    def state_arrays(self):
        return {name: t.data for name, t in self.named_parameters().items()}

    def load_state(self, arrays):
        for name, t in self.named_parameters().items():
            if name not in arrays:
                raise ValueError(f"checkpoint missing tensor {name}")
            if arrays[name].shape != t.data.shape:
                raise ValueError(f"shape mismatch for {name}")
            t.data = arrays[name].astype(t.data.dtype).copy()


def audionet_forward(clip, h, net):
    """Run one mono AudioClip through the network.

    h may be a Tensor or plain array of length cond_dim.  Returns an
    AudioClip with the network's output channel count and the input rate.
    """
    if clip.channels != 1:
        raise ValueError(f"expected a mono clip, got {clip.channels} channels")
    if clip.length == 0:
        raise ValueError("empty clip")
    harr = h.data if isinstance(h, Tensor) else np.asarray(h)
    dtype = net.encoders[0].w1.data.dtype
    ht = Tensor(harr.reshape(1, -1).astype(dtype))
    x = Tensor(clip.samples[None].astype(dtype))
    out = net.forward(x, ht)
    return AudioClip(out.data[0].astype(np.float64), clip.sample_rate)
