import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from winquant.errors import ConfigurationError, InvariantError
from winquant.numerics import MASK_VALUE, FeatureMap
from winquant.windowing import (
    ImportanceScores,
    WindowSet,
    cyclic_shift,
    importance_scores,
    partition,
    scatter,
    select_windows,
    shifted_window_mask,
    window_ranking,
)

from conftest import random_map


def test_partition_counts_and_order():
    fm = FeatureMap(np.arange(16.0).reshape(4, 4, 1))
    ws = partition(fm, 2)
    assert ws.n_win == 4
    assert ws.origins == ((0, 0), (0, 2), (2, 0), (2, 2))
    assert ws.tokens[1, :, 0].tolist() == [2.0, 3.0, 6.0, 7.0]


def test_single_window_is_whole_map():
    fm = random_map((3, 3, 2))
    ws = partition(fm, 3)
    assert ws.n_win == 1
    assert np.array_equal(ws.tokens[0], fm.data.reshape(9, 2))


def test_partition_rejects_indivisible():
    with pytest.raises(ConfigurationError):
        partition(random_map((5, 4, 1)), 2)


@given(st.integers(1, 4), st.integers(1, 4), st.integers(1, 3), st.integers(1, 3), st.integers(0, 10**6))
def test_scatter_partition_round_trip(nh, nw, p, c, seed):
    fm = random_map((nh * p, nw * p, c), seed)
    assert scatter(partition(fm, p), fm.height, fm.width) == fm


def test_scatter_uses_origins_not_order():
    fm = random_map((8, 8, 3), 1)
    ws = partition(fm, 2)
    perm = np.random.default_rng(0).permutation(ws.n_win)
    shuffled = WindowSet(2, ws.tokens[perm], tuple(ws.origins[i] for i in perm))
    assert scatter(shuffled, 8, 8) == fm


def test_scatter_detects_gaps_and_overlaps():
    ws = partition(random_map((4, 4, 1)), 2)
    gap = WindowSet(2, ws.tokens[:3], ws.origins[:3])
    with pytest.raises(InvariantError):
        scatter(gap, 4, 4)
    overlap = WindowSet(2, ws.tokens, ws.origins[:3] + (ws.origins[0],))
    with pytest.raises(InvariantError):
        scatter(overlap, 4, 4)


def test_cyclic_shift():
    fm = random_map((4, 4, 2), 2)
    assert cyclic_shift(fm, 0) is fm
    moved = cyclic_shift(fm, 1)
    assert np.array_equal(moved.data[1, 1], fm.data[0, 0])
    assert cyclic_shift(moved, -1) == fm


def test_shifted_mask_regions():
    m = shifted_window_mask(4, 4, 2, 1)
    assert m.shape == (4, 4, 4)
    assert np.all(m[0] == 0.0)  # interior window: one region
    assert set(np.unique(m[3])) == {0.0, MASK_VALUE}  # wrapped corner window mixes four regions
    assert np.all(np.diagonal(m, axis1=1, axis2=2) == 0.0)


def test_importance_scores_examples():
    data = np.zeros((2, 4, 1))
    data[0, 0, 0], data[0, 1, 0] = 3.0, 4.0
    scores = importance_scores(partition(FeatureMap(data), 2))
    assert scores.scores.tolist() == [5.0, 0.0]


def test_scores_scale_with_map():
    fm = random_map((4, 4, 2), 3)
    s1 = importance_scores(partition(fm, 2)).scores
    s2 = importance_scores(partition(FeatureMap(fm.data * 2.5), 2)).scores
    assert np.allclose(s2, 2.5 * s1)
    assert np.array_equal(window_ranking(s1), window_ranking(s2))


def test_scores_validation():
    with pytest.raises(ConfigurationError):
        ImportanceScores(np.array([1.0, -1.0]))


def test_select_examples():
    s = np.array([5.0, 1.0, 3.0, 2.0])
    a = select_windows(s, 0.5)
    assert (a.high_idx, a.low_idx, a.pruned_idx) == ((0, 2), (1, 3), ())
    a = select_windows(s, 0.0)
    assert a.high_idx == (0, 1, 2, 3)
    a = select_windows(s, 0.25, 0.25)
    assert (a.high_idx, a.low_idx, a.pruned_idx) == ((0, 2), (3,), (1,))


def test_select_ratio_errors():
    with pytest.raises(ConfigurationError):
        select_windows(np.ones(4), 0.7, 0.4)
    with pytest.raises(ConfigurationError):
        select_windows(np.ones(4), -0.1)


def test_ties_rank_lower_index_higher():
    a = select_windows(np.ones(4), 0.5)
    assert a.high_idx == (0, 1) and a.low_idx == (2, 3)


def test_floor_counts_with_float_products():
    # 0.3 * 10 evaluates to 2.9999999999999996
    a = select_windows(np.arange(10.0), 0.3)
    assert len(a.low_idx) == 3


codes = st.integers(0, 8)
score_vectors = st.lists(st.floats(0.0, 100.0), min_size=1, max_size=40).map(np.array)


@given(score_vectors, codes, codes)
def test_assignment_is_an_ordered_partition(s, rc, pc):
    if rc + pc > 10:
        return
    a = select_windows(s, rc / 10, pc / 10)
    allidx = sorted(a.high_idx + a.low_idx + a.pruned_idx)
    assert allidx == list(range(len(s)))
    assert len(a.pruned_idx) == int(np.floor(pc / 10 * len(s) + 1e-9))
    assert len(a.low_idx) == int(np.floor(rc / 10 * len(s) + 1e-9))
    if a.high_idx and a.low_idx:
        assert s[list(a.high_idx)].min() >= s[list(a.low_idx)].max()
    if a.low_idx and a.pruned_idx:
        assert s[list(a.low_idx)].min() >= s[list(a.pruned_idx)].max()


@given(score_vectors, codes, codes)
def test_reversed_equals_rank_reversal_oracle(s, rc, pc):
    if rc + pc > 10:
        return
    n = len(s)
    rank = sorted(range(n), key=lambda i: (-s[i], i))  # most important first
    worst_first = rank[::-1]
    n_p, n_l = int(np.floor(pc / 10 * n + 1e-9)), int(np.floor(rc / 10 * n + 1e-9))
    n_h = n - n_p - n_l
    a = select_windows(ImportanceScores(s, reversed=True), rc / 10, pc / 10)
    assert set(a.high_idx) == set(worst_first[:n_h])
    assert set(a.low_idx) == set(worst_first[n_h : n_h + n_l])
    assert set(a.pruned_idx) == set(worst_first[n_h + n_l :])
    assert a == select_windows(s, rc / 10, pc / 10, reversed=True)


@given(score_vectors, st.floats(1e-3, 1e3), codes)
def test_positive_rescaling_keeps_assignment(s, c, rc):
    scaled = s * c
    if len(np.unique(s)) != len(np.unique(scaled)):
        return  # rescaling collapsed distinct scores in floating point
    assert select_windows(s, rc / 10) == select_windows(scaled, rc / 10)
