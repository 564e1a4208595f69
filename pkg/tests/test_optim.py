import numpy as np

from pointsound.optim import AdamState, adam_step
from pointsound.tensor import Tensor


def test_zero_grad_leaves_params_and_moments():
    p = Tensor(np.array([1.0, -2.0]))
    state = AdamState(lr=1e-3)
    adam_step({"p": p}, {"p": np.zeros(2)}, state)
    np.testing.assert_allclose(p.data, [1.0, -2.0])
    np.testing.assert_allclose(state.m["p"], 0.0)
    np.testing.assert_allclose(state.v["p"], 0.0)
    assert state.step == 1


def test_hand_evaluated_first_step():
    # m = 0.1, v = 1e-3; bias corrections make mhat = vhat = 1, so the update
    # is lr / (1 + eps) which is 1e-3 to within eps.
    p = Tensor(np.array(0.0))
    state = AdamState(lr=1e-3)
    adam_step({"p": p}, {"p": np.array(1.0)}, state)
    np.testing.assert_allclose(p.data, -1e-3, rtol=1e-6)


def test_constant_grad_moves_monotonically():
    p = Tensor(np.array(0.0))
    state = AdamState(lr=1e-2)
    values = [p.data.item()]
    for _ in range(5):
        adam_step({"p": p}, {"p": np.array(2.5)}, state)
        values.append(p.data.item())
    diffs = np.diff(values)
    assert np.all(diffs < 0), values
    assert state.step == 5


def test_missing_grad_skips_param():
    p = Tensor(np.array(1.0))
    q = Tensor(np.array(1.0))
    state = AdamState(lr=1e-2)
    adam_step({"p": p, "q": q}, {"p": np.array(1.0)}, state)
    assert q.data.item() == 1.0
    assert p.data.item() != 1.0


def test_float32_params_stay_float32():
    p = Tensor(np.zeros(3, dtype=np.float32))
    state = AdamState()
    adam_step({"p": p}, {"p": np.ones(3, dtype=np.float32)}, state)
    assert p.data.dtype == np.float32
