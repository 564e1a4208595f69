"""Walk through the reverse-mode tape: record a computation, pull gradients,
and check them against central finite differences.

Run with:  python3 demos/01_autodiff_tape.py
"""
import numpy as np

from pointsound import tensor as T


def finite_diff(f, x, eps=1e-6):
    """Central-difference gradient of a scalar function of one array."""
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    out = g.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + eps
        hi = f(x)
        flat[i] = keep - eps
        lo = f(x)
        flat[i] = keep
        out[i] = (hi - lo) / (2.0 * eps)
    return g


def main():
    rng = np.random.default_rng(7)

    print("== a small expression ==")
    x = T.Tensor(rng.standard_normal((3, 4)))
    w = T.Tensor(rng.standard_normal((4, 2)))
    with T.Tape() as tape:
        y = T.relu(T.matmul(x, w))
        loss = T.mean(T.mul(y, y))
    grads = tape.backward(loss)
    print("loss                 =", loss.item())
    print("grad shapes          =", grads[x.tid].shape, grads[w.tid].shape)

    def loss_wrt_w(wv):
        with T.Tape():
            y = T.relu(T.matmul(x, T.Tensor(wv)))
            return T.mean(T.mul(y, y)).item()

    fd = finite_diff(loss_wrt_w, w.data.copy())
    err = np.abs(grads[w.tid] - fd).max() / np.abs(fd).max()
    print("fd check on w        = %.3e relative" % err)

    print()
    print("== a strided convolution pipeline ==")
    sig = T.Tensor(rng.standard_normal((2, 1, 64)))
    k1 = T.Tensor(0.3 * rng.standard_normal((8, 1, 8)))
    k2 = T.Tensor(0.3 * rng.standard_normal((8, 1, 8)))
    with T.Tape() as tape:
        hidden = T.relu(T.conv1d(sig, k1, stride=4))
        recon = T.conv1d_transpose(hidden, k2, stride=4)
        loss = T.mean(T.absolute(T.sub(recon, sig)))
    grads = tape.backward(loss)

    def loss_wrt_k1(kv):
        with T.Tape():
            hidden = T.relu(T.conv1d(sig, T.Tensor(kv), stride=4))
            recon = T.conv1d_transpose(hidden, k2, stride=4)
            return T.mean(T.absolute(T.sub(recon, sig))).item()

    fd = finite_diff(loss_wrt_k1, k1.data.copy())
    err = np.abs(grads[k1.tid] - fd).max() / np.abs(fd).max()
    print("loss                 =", loss.item())
    print("fd check on conv k1  = %.3e relative" % err)

    print()
    print("Gradients flow through relu, glu, conv1d and its transpose,")
    print("so the same tape drives both the vision and the audio networks.")


if __name__ == "__main__":
    main()
