"""Dense tensors and a minimal reverse-mode automatic differentiation tape.

The design is deliberately small: a ``Tensor`` wraps a numpy array, and every
differentiable operation is a free function that computes its result eagerly
and, when a ``Tape`` is active, records a vector-Jacobian closure.  Calling
``Tape.backward`` on a scalar loss walks the recorded nodes in reverse and
accumulates gradients keyed by tensor id.

Only float32 and float64 are supported.  Training runs in float32; gradient
checks run in float64.
"""

from __future__ import annotations

import itertools

import numpy as np

_SUPPORTED_DTYPES = (np.float32, np.float64)

_ids = itertools.count()

# The currently active tape, or None when running without recording.
_TAPE = None


class Tensor:
    """A dense array with an identity usable as a tape key."""

    __slots__ = ("data", "tid")

    def __init__(self, data, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in _SUPPORTED_DTYPES:
            arr = arr.astype(np.float64)
        self.data = arr
        self.tid = next(_ids)

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def item(self):
        return self.data.item()

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, tid={self.tid})"


def as_tensor(x, dtype=None):
    return x if isinstance(x, Tensor) else Tensor(x, dtype=dtype)


class TapeNode:
    __slots__ = ("output_tid", "inputs", "vjp")

    def __init__(self, output_tid, inputs, vjp):
        self.output_tid = output_tid
        self.inputs = inputs
        self.vjp = vjp


class Tape:
    """Records primitive operations and computes reverse-mode gradients.

    Use as a context manager::

        with Tape() as tape:
            loss = mean(absolute(sub(pred, target)))
        grads = tape.backward(loss)

    ``backward`` may only be called once per recording unless ``reset`` is
    called (gradients would otherwise silently mix).
    """

    def __init__(self):
        self.nodes = []
        self.gradients = {}
        self._consumed = False

    def __enter__(self):
        global _TAPE
        if _TAPE is not None:
            raise RuntimeError("a Tape is already active")
        _TAPE = self
        return self

    def __exit__(self, exc_type, exc, tb):
        global _TAPE
        _TAPE = None
        return False

    def record(self, output, inputs, vjp):
        self.nodes.append(TapeNode(output.tid, tuple(inputs), vjp))

    def reset(self):
        self.gradients = {}
        self._consumed = False

    def backward(self, loss):
        """Accumulate d(loss)/d(tensor) for every tensor reachable from loss.

        Returns the gradient map {tensor id -> ndarray}.  Raises on a
        non-scalar loss or when called twice without ``reset``.
        """
        if not isinstance(loss, Tensor):
            raise TypeError("loss must be a Tensor")
        if loss.data.size != 1:
            raise ValueError(f"loss must be scalar, got shape {loss.data.shape}")
        if self._consumed:
            raise RuntimeError("backward already called on this tape; call reset() first")
        self._consumed = True

        grads = {loss.tid: np.ones_like(loss.data)}
        # Nodes were appended in execution order, so the reversed list is a
        # valid reverse topological order.
        for node in reversed(self.nodes):
            g_out = grads.get(node.output_tid)
            if g_out is None:
                continue
            in_grads = node.vjp(g_out)
            for t, g in zip(node.inputs, in_grads):
                if g is None:
                    continue
                acc = grads.get(t.tid)
                # Never accumulate in place: a vjp may return (a view of) its
                # upstream gradient, so stored arrays must stay immutable.
                grads[t.tid] = g if acc is None else acc + g
        self.gradients = grads
        return grads


def active_tape():
    return _TAPE


def record(output, inputs, vjp):
    """Record a primitive on the active tape, if any."""
    if _TAPE is not None:
        _TAPE.record(output, inputs, vjp)


# ---------------------------------------------------------------------------
# elementwise and reduction primitives
# ---------------------------------------------------------------------------


def _unbroadcast(grad, shape):
    """Sum `grad` down to `shape` (reverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data + b.data)

    def vjp(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    record(out, (a, b), vjp)
    return out


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data - b.data)

    def vjp(g):
        return _unbroadcast(g, a.data.shape), -_unbroadcast(g, b.data.shape)

    record(out, (a, b), vjp)
    return out


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data * b.data)

    def vjp(g):
        return (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape),
        )

    record(out, (a, b), vjp)
    return out


def scale(a, c):
    """Multiply by a python scalar (not differentiated through c)."""
    a = as_tensor(a)
    out = Tensor(a.data * c)
    record(out, (a,), lambda g: (g * c,))
    return out


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data @ b.data)

    def vjp(g):
        return g @ b.data.T, a.data.T @ g

    record(out, (a, b), vjp)
    return out


def relu(x):
    x = as_tensor(x)
    out = Tensor(np.maximum(x.data, 0))
    mask = x.data > 0

    def vjp(g):
        return (g * mask,)

    record(out, (x,), vjp)
    return out


def _sigmoid(x):
    # numerically stable in both tails
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(x):
    x = as_tensor(x)
    s = _sigmoid(x.data)
    out = Tensor(s)

    def vjp(g):
        return (g * s * (1.0 - s),)

    record(out, (x,), vjp)
    return out


def glu(x):
    """Gated linear unit over the channel axis.

    The channel axis is axis 0 for (2C, T) inputs and axis 1 for (B, 2C, T);
    the first half is the content, the second half the gate.
    """
    x = as_tensor(x)
    axis = 0 if x.data.ndim == 2 else 1
    c2 = x.data.shape[axis]
    if c2 % 2 != 0:
        raise ValueError(f"glu needs an even channel count, got {c2}")
    c = c2 // 2
    a, b = np.split(x.data, 2, axis=axis)
    s = _sigmoid(b)
    out = Tensor(a * s)

    def vjp(g):
        ga = g * s
        gb = g * a * s * (1.0 - s)
        return (np.concatenate([ga, gb], axis=axis),)

    record(out, (x,), vjp)
    return out


def absolute(x):
    x = as_tensor(x)
    out = Tensor(np.abs(x.data))
    sign = np.sign(x.data)

    def vjp(g):
        return (g * sign,)

    record(out, (x,), vjp)
    return out


def summation(x):
    x = as_tensor(x)
    out = Tensor(np.asarray(x.data.sum(), dtype=x.data.dtype))

    def vjp(g):
        return (np.broadcast_to(g, x.data.shape).astype(x.data.dtype, copy=True),)

    record(out, (x,), vjp)
    return out


def mean(x):
    x = as_tensor(x)
    n = x.data.size
    out = Tensor(np.asarray(x.data.mean(), dtype=x.data.dtype))

    def vjp(g):
        return (np.broadcast_to(g / n, x.data.shape).astype(x.data.dtype, copy=True),)

    record(out, (x,), vjp)
    return out


def reshape(x, shape):
    x = as_tensor(x)
    out = Tensor(x.data.reshape(shape))
    orig = x.data.shape

    def vjp(g):
        return (g.reshape(orig),)

    record(out, (x,), vjp)
    return out


def pad_right(x, n):
    """Zero-pad the last axis on the right by n samples."""
    x = as_tensor(x)
    if n < 0:
        raise ValueError("pad amount must be >= 0")
    width = [(0, 0)] * (x.data.ndim - 1) + [(0, n)]
    out = Tensor(np.pad(x.data, width))
    t = x.data.shape[-1]

    def vjp(g):
        return (np.ascontiguousarray(g[..., :t]),)

    record(out, (x,), vjp)
    return out


def trim_right(x, length):
    """Keep the first `length` samples of the last axis."""
    x = as_tensor(x)
    t = x.data.shape[-1]
    if length > t:
        raise ValueError(f"cannot trim to {length} from {t}")
    out = Tensor(np.ascontiguousarray(x.data[..., :length]))

    def vjp(g):
        width = [(0, 0)] * (g.ndim - 1) + [(0, t - length)]
        return (np.pad(g, width),)

    record(out, (x,), vjp)
    return out


# ---------------------------------------------------------------------------
# 1-d convolution primitives (no implicit padding; floor semantics)
# ---------------------------------------------------------------------------


def _windows(x, k, stride):
    """Strided sliding windows: (B, C, T) -> (B, C, T', K) view."""
    w = np.lib.stride_tricks.sliding_window_view(x, k, axis=-1)
    return w[..., ::stride, :]


def conv1d(x, w, b=None, stride=1):
    """Strided valid cross-correlation along time.

    x: (C_in, T) or (B, C_in, T); w: (C_out, C_in, K); b: (C_out,) or None.
    Output length is floor((T - K) / stride) + 1.
    """
    x, w = as_tensor(x), as_tensor(w)
    if b is not None:
        b = as_tensor(b)
    squeeze = x.data.ndim == 2
    xd = x.data[None] if squeeze else x.data
    c_out, c_in, k = w.data.shape
    if xd.shape[1] != c_in:
        raise ValueError(f"conv1d channel mismatch: input {xd.shape[1]}, weight {c_in}")
    if xd.shape[2] < k:
        raise ValueError(f"conv1d input length {xd.shape[2]} shorter than kernel {k}")
    win = _windows(xd, k, stride)  # (B, C_in, T', K)
    out_d = np.tensordot(win, w.data, axes=([1, 3], [1, 2]))  # (B, T', C_out)
    out_d = np.ascontiguousarray(out_d.transpose(0, 2, 1))
    if b is not None:
        out_d += b.data[None, :, None]
    out = Tensor(out_d[0] if squeeze else out_d)

    def vjp(g):
        gd = g[None] if squeeze else g
        # d/dx is the transposed convolution of the output gradient; the
        # (C_out, C_in, K) weight already has transpose layout when read as
        # (C_in_t, C_out_t, K).  Trailing samples beyond the last window get
        # zero gradient, hence the pad back out to T.
        gx = _conv1d_transpose_raw(gd, w.data, stride)
        t = xd.shape[2]
        if gx.shape[2] < t:
            gx = np.pad(gx, ((0, 0), (0, 0), (0, t - gx.shape[2])))
        gw = np.tensordot(gd, win, axes=([0, 2], [0, 2]))  # (C_out, C_in, K)
        grads = [gx[0] if squeeze else gx, gw]
        if b is not None:
            grads.append(gd.sum(axis=(0, 2)))
        return grads

    inputs = (x, w) if b is None else (x, w, b)
    record(out, inputs, vjp)
    return out


def _conv1d_transpose_raw(x, w, stride):
    """Forward of the transposed conv on raw arrays.

    x: (B, C_in, T); w: (C_in, C_out, K) -> (B, C_out, (T-1)*stride + K).
    """
    b_, c_in, t = x.shape
    _, c_out, k = w.shape
    z = np.tensordot(x, w, axes=(1, 0))  # (B, T, C_out, K)
    out = np.zeros((b_, c_out, (t - 1) * stride + k), dtype=x.dtype)
    zt = z.transpose(0, 2, 1, 3)  # (B, C_out, T, K)
    for j in range(k):
        # tap j lands at positions j, j+stride, ..., j+(T-1)*stride
        out[:, :, j : j + stride * t : stride] += zt[:, :, :, j]
    return out


def conv1d_transpose(x, w, b=None, stride=1):
    """Strided transposed convolution (the adjoint of conv1d).

    x: (C_in, T) or (B, C_in, T); w: (C_in, C_out, K); b: (C_out,) or None.
    Output length is (T - 1) * stride + K.
    """
    x, w = as_tensor(x), as_tensor(w)
    if b is not None:
        b = as_tensor(b)
    squeeze = x.data.ndim == 2
    xd = x.data[None] if squeeze else x.data
    c_in, c_out, k = w.data.shape
    if xd.shape[1] != c_in:
        raise ValueError(f"conv1d_transpose channel mismatch: input {xd.shape[1]}, weight {c_in}")
    out_d = _conv1d_transpose_raw(xd, w.data, stride)
    if b is not None:
        out_d += b.data[None, :, None]
    out = Tensor(out_d[0] if squeeze else out_d)

    def vjp(g):
        gd = g[None] if squeeze else g
        gwin = _windows(gd, k, stride)  # (B, C_out, T, K)
        gx = np.tensordot(gwin, w.data, axes=([1, 3], [1, 2]))  # (B, T, C_in)
        gx = np.ascontiguousarray(gx.transpose(0, 2, 1))
        gw = np.tensordot(xd, gwin, axes=([0, 2], [0, 2]))  # (C_in, C_out, K)
        grads = [gx[0] if squeeze else gx, gw]
        if b is not None:
            grads.append(gd.sum(axis=(0, 2)))
        return grads

    inputs = (x, w) if b is None else (x, w, b)
    record(out, inputs, vjp)
    return out


def uniform_init(rng, shape, fan_in, dtype=np.float32):
    """Uniform in +/- sqrt(1 / fan_in), the package-wide layer default."""
    bound = float(np.sqrt(1.0 / fan_in))
    return Tensor(rng.uniform(-bound, bound, size=shape).astype(dtype))
