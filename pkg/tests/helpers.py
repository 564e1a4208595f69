"""Shared oracles and gradient-check utilities for the test suite."""

import numpy as np

from pointsound import tensor as T


def naive_conv1d(x, w, b=None, stride=1):
    """Triple-loop strided cross-correlation oracle. x: (C_in, T)."""
    c_out, c_in, k = w.shape
    t = x.shape[1]
    t_out = (t - k) // stride + 1
    out = np.zeros((c_out, t_out), dtype=np.float64)
    for o in range(c_out):
        for tt in range(t_out):
            acc = 0.0
            for i in range(c_in):
                for j in range(k):
                    acc += w[o, i, j] * x[i, tt * stride + j]
            out[o, tt] = acc
        if b is not None:
            out[o] += b[o]
    return out


def naive_conv1d_transpose(x, w, b=None, stride=1):
    """Scatter-loop transposed convolution oracle. x: (C_in, T), w: (C_in, C_out, K)."""
    c_in, c_out, k = w.shape
    t = x.shape[1]
    t_out = (t - 1) * stride + k
    out = np.zeros((c_out, t_out), dtype=np.float64)
    for i in range(c_in):
        for tt in range(t):
            for o in range(c_out):
                for j in range(k):
                    out[o, tt * stride + j] += w[i, o, j] * x[i, tt]
    if b is not None:
        out += b[:, None]
    return out


def xcorr_lag(left, right):
    """Peak cross-correlation lag of right relative to left, in samples.

    Positive means the right channel arrives later.
    """
    c = np.correlate(np.asarray(right, float), np.asarray(left, float), mode="full")
    return int(np.argmax(c)) - (len(left) - 1)


def rel_err(a, b, floor=1e-12):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = max(np.linalg.norm(a.ravel()), np.linalg.norm(b.ravel()), floor)
    return np.linalg.norm((a - b).ravel()) / denom


def numeric_grad(f, x, eps=1e-6):
    """Central finite differences of scalar f at ndarray x (float64)."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.ravel()
    gf = g.ravel()
    for i in range(flat.size):
        orig = flat[i]
        h = eps * max(1.0, abs(orig))
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        gf[i] = (fp - fm) / (2.0 * h)
    return g


def check_grads(build_loss, arrays, tol=1e-4, eps=1e-6):
    """Compare tape gradients against finite differences.

    build_loss(tensors) -> scalar loss Tensor, where `tensors` are Tensor
    wrappers around float64 copies of `arrays`.  Returns the worst relative
    error across all inputs.
    """
    tensors = [T.Tensor(np.array(a, dtype=np.float64)) for a in arrays]
    with T.Tape() as tape:
        loss = build_loss(tensors)
    grads = tape.backward(loss)
    worst = 0.0
    for idx, tt in enumerate(tensors):
        analytic = grads.get(tt.tid)
        assert analytic is not None, f"input {idx} received no gradient"

        def f(x, idx=idx, tensors=tensors):
            saved = tensors[idx].data
            tensors[idx].data = x
            val = build_loss(tensors).item()
            tensors[idx].data = saved
            return val

        numeric = numeric_grad(f, tensors[idx].data, eps=eps)
        worst = max(worst, rel_err(analytic, numeric))
    assert worst <= tol, f"gradient mismatch: rel err {worst:.3e} > {tol}"
    return worst
