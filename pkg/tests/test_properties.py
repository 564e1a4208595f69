"""Randomized property tests for library invariants.

Each test states an invariant that must hold for *any* valid input, then
lets hypothesis search for a counterexample.  Settings pin the database
off and derandomize the search so runs are reproducible and leave no
state behind.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

import pointsound.tensor as T
from pointsound.binaural import woodworth_itd
from pointsound.cloud import PointCloud
from pointsound.metrics import envelope_distance, stft_distance
from pointsound.sparse import BATCH_LIMIT, COORD_LIMIT, encode_coords, voxelize
from pointsound.trainer import recover_channels

QUIET = settings(database=None, derandomize=True, deadline=None)

finite = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False, width=64)
coord_field = st.integers(min_value=-(COORD_LIMIT - 1), max_value=COORD_LIMIT - 1)


@QUIET
@given(
    rows=st.lists(
        st.tuples(
            st.integers(min_value=0, max_value=BATCH_LIMIT - 1),
            coord_field,
            coord_field,
            coord_field,
        ),
        min_size=1,
        max_size=64,
        unique=True,
    )
)
def test_packed_keys_are_distinct_and_lexicographic(rows):
    """Over the full documented range, distinct (b, x, y, z) rows pack to
    distinct keys, and sorting by key sorts rows lexicographically."""
    coords = np.asarray(rows, dtype=np.int64)
    keys = encode_coords(coords)
    assert len(np.unique(keys)) == coords.shape[0]
    by_key = coords[np.argsort(keys)]
    by_lex = coords[np.lexsort((coords[:, 3], coords[:, 2], coords[:, 1], coords[:, 0]))]
    assert np.array_equal(by_key, by_lex)


@QUIET
@given(
    row=st.tuples(
        st.integers(min_value=0, max_value=BATCH_LIMIT - 1),
        coord_field,
        coord_field,
        coord_field,
    ),
    field=st.integers(min_value=0, max_value=3),
    high=st.booleans(),
)
def test_packed_keys_reject_out_of_range_rows(row, field, high):
    """One field nudged past its packable range always raises, never wraps."""
    bad = list(row)
    if field == 0:
        bad[0] = BATCH_LIMIT if high else -1
    else:
        bad[field] = COORD_LIMIT if high else -COORD_LIMIT
    with pytest.raises(ValueError):
        encode_coords(np.asarray([bad], dtype=np.int64))


@settings(database=None, derandomize=True, deadline=None, max_examples=40)
@given(
    points=hnp.arrays(
        np.float64,
        st.tuples(st.integers(min_value=1, max_value=48), st.just(3)),
        elements=st.floats(min_value=-4.0, max_value=4.0, allow_nan=False, width=64),
    ),
    perm_seed=st.integers(min_value=0, max_value=2**31 - 1),
    mode=st.sampled_from(["rgb-depth", "depth"]),
)
def test_voxelize_is_permutation_invariant(points, perm_seed, mode):
    """Reordering the input points never changes the voxel grid, bit for bit."""
    colors = (np.sin(points * 37.0) + 1.0) * 0.5
    order = np.random.default_rng(perm_seed).permutation(points.shape[0])
    a = voxelize(PointCloud(points, colors), 0.1, feature_mode=mode)
    b = voxelize(PointCloud(points[order], colors[order]), 0.1, feature_mode=mode)
    assert np.array_equal(a.coords, b.coords)
    assert np.array_equal(a.feats.data, b.feats.data)


@QUIET
@given(
    left=hnp.arrays(np.float64, st.integers(min_value=1, max_value=256), elements=finite),
    seed=st.integers(min_value=0, max_value=2**31 - 1),
)
def test_recover_channels_inverts_sum_and_difference(left, seed):
    """recover_channels(L+R, L-R) returns (L, R) to near machine precision."""
    right = np.random.default_rng(seed).uniform(-1e3, 1e3, left.shape[0])
    rec = recover_channels(left + right, left - right)
    scale = max(1.0, float(np.abs(left).max()), float(np.abs(right).max()))
    assert np.abs(rec - np.stack([left, right])).max() <= 1e-12 * scale


@QUIET
@given(
    x=hnp.arrays(
        np.float64,
        st.tuples(
            st.integers(min_value=1, max_value=4),
            st.integers(min_value=1, max_value=4).map(lambda c: 2 * c),
            st.integers(min_value=1, max_value=16),
        ),
        elements=st.floats(min_value=-30.0, max_value=30.0, allow_nan=False, width=64),
    )
)
def test_glu_halves_channels_and_matches_closed_form(x):
    """glu splits the channel axis in half and gates: out = a * sigmoid(b)."""
    for arr in (x, x[0]):  # (B, 2C, T) then (2C, T)
        out = T.glu(T.Tensor(arr)).data
        axis = 0 if arr.ndim == 2 else 1
        a, b = np.split(arr, 2, axis=axis)
        expected = a / (1.0 + np.exp(-b))
        assert out.shape == a.shape
        assert np.abs(out - expected).max() <= 1e-12 * (1.0 + np.abs(expected).max())


@settings(database=None, derandomize=True, deadline=None, max_examples=40)
@given(
    ref=hnp.arrays(
        np.float64,
        st.tuples(st.just(2), st.integers(min_value=23, max_value=240)),
        elements=finite,
    ),
    seed=st.integers(min_value=0, max_value=2**31 - 1),
)
def test_distances_are_symmetric_zero_iff_identical(ref, seed):
    """Both distances vanish exactly on identical inputs and are symmetric."""
    est = ref + np.random.default_rng(seed).uniform(-1.0, 1.0, ref.shape)
    assert envelope_distance(ref, ref.copy()) == 0.0
    assert stft_distance(ref, ref.copy(), 1000) == 0.0
    assert envelope_distance(ref, est) == envelope_distance(est, ref)
    assert stft_distance(ref, est, 1000) == stft_distance(est, ref, 1000)
    assert envelope_distance(ref, est) >= 0.0
    assert stft_distance(ref, est, 1000) >= 0.0


@QUIET
@given(
    az=st.floats(min_value=-2.0 * np.pi, max_value=2.0 * np.pi, allow_nan=False, width=64),
    other=st.floats(min_value=0.0, max_value=np.pi / 2.0, allow_nan=False, width=64),
)
def test_itd_front_back_mirror_and_monotone(az, other):
    """The sphere delay mirrors front/back and left/right, peaks at the side,
    and grows monotonically as a source moves from ahead to the side."""
    peak = woodworth_itd(np.pi / 2.0)
    assert abs(woodworth_itd(az) - woodworth_itd(-az)) <= 1e-15
    assert abs(woodworth_itd(az) - woodworth_itd(np.pi - az)) <= 1e-15
    assert 0.0 <= woodworth_itd(az) <= peak + 1e-15
    lo, hi = sorted((abs(az) % (np.pi / 2.0), other))
    assert woodworth_itd(lo) <= woodworth_itd(hi) + 1e-15
