import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from winquant.compression import CompressionConfig
from winquant.errors import ConfigurationError, SamplingError
from winquant.sampling import (
    SamplerConfig,
    lrm_round,
    naive_uniform_sample,
    sample_many,
    sum_range_from_cost_targets,
    uniform_sum_sample,
)


def brute_force_apportion(values, target):
    """Among all integer vectors with sum ``target`` and each entry in
    {floor, floor+1}, pick the one maximising the lexicographically sorted
    remainder mass: the largest remainders get the extra unit, lower index first."""
    floors = [int(np.floor(v)) for v in values]
    extra = target - sum(floors)
    best, best_key = None, None
    for chosen in itertools.combinations(range(len(values)), extra):
        rems = [Fraction(values[i]) - floors[i] for i in chosen]
        key = (sorted(rems, reverse=True), [-i for i in chosen])
        if best_key is None or key > best_key:
            best, best_key = chosen, key
    out = list(floors)
    for i in best:
        out[i] += 1
    return out


def test_sum_range_examples():
    assert sum_range_from_cost_targets(0.65, 0.95, 6) == (0.6, 4.2)
    assert sum_range_from_cost_targets(1.0, 1.0, 6) == (0.0, 0.0)
    assert sum_range_from_cost_targets(0.5, 1.0, 4) == (0.0, 4.0)
    with pytest.raises(ConfigurationError):
        sum_range_from_cost_targets(0.9, 0.5, 6)


def test_lrm_examples():
    assert lrm_round([2.5, 2.5], 5).tolist() == [3, 2]
    assert lrm_round([1.0, 4.0], 5).tolist() == [1, 4]
    assert lrm_round([1.2, 3.8], 5).tolist() == [1, 4]
    with pytest.raises(ConfigurationError):
        lrm_round([-1.0, 6.0], 5)
    with pytest.raises(ConfigurationError):
        lrm_round([1.0, 1.0], 5)


def test_lrm_matches_brute_force_on_random_vectors():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        n = int(rng.integers(1, 7))
        target = int(rng.integers(0, 40))
        v = rng.dirichlet(np.ones(n)) * target
        if abs(v.sum() - target) > 1e-9:
            continue
        assert lrm_round(v, target).tolist() == brute_force_apportion(v.tolist(), target)


@given(st.lists(st.floats(0, 50), min_size=1, max_size=12))
def test_lrm_exact_sum_and_unit_increments(raw):
    target = int(np.floor(sum(raw)))
    if target == 0 or sum(raw) == 0:
        return
    v = np.array(raw) * target / sum(raw)
    if abs(v.sum() - target) > 1e-6:
        return
    out = lrm_round(v, target)
    assert out.sum() == target
    assert set((out - np.floor(v)).astype(int)) <= {0, 1}


def test_forced_single_ratio():
    cfg = SamplerConfig(1, 0.3, 0.3)
    assert uniform_sum_sample(cfg, np.random.default_rng(0)).tolist() == [0.3]


def test_uniform_sum_contract_and_uniform_sums():
    cfg = SamplerConfig(6, 0.6, 4.2)
    rng = np.random.default_rng(1)
    counts = np.zeros(43, dtype=int)
    for _ in range(10_000):
        r = uniform_sum_sample(cfg, rng)
        codes = np.round(r * 10).astype(int)
        assert np.array_equal(codes / 10, r)
        assert r.max() <= 0.8
        s = int(codes.sum())
        assert 6 <= s <= 42
        counts[s] += 1
    expected = 10_000 / 37
    assert np.all(np.abs(counts[6:] - expected) <= 0.2 * expected)


def test_sampler_is_deterministic_and_seeded_per_draw():
    cfg = SamplerConfig(6, 0.6, 4.2)
    a, b = sample_many(cfg, 20, 11), sample_many(cfg, 20, 11)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    single = uniform_sum_sample(cfg, np.random.default_rng(11 + 7))
    assert np.array_equal(a[7], single)


def test_sampler_gives_up_on_infeasible_target():
    cfg = SamplerConfig(6, 4.8, 4.8, upper=0.8, max_rejects=500)
    with pytest.raises(SamplingError):
        uniform_sum_sample(cfg, np.random.default_rng(0))


def test_sampler_config_validation():
    with pytest.raises(ConfigurationError):
        SamplerConfig(6, 0.6, 5.0)
    with pytest.raises(ConfigurationError):
        SamplerConfig(6, 0.6, 4.2, upper=1.0)
    with pytest.raises(ConfigurationError):
        SamplerConfig(0, 0.0, 0.0)


def test_naive_sampler():
    rng = np.random.default_rng(2)
    draws = np.array([naive_uniform_sample(6, rng) for _ in range(10_000)])
    assert set(np.round(draws.ravel() * 10).astype(int)) <= set(range(9))
    assert draws.sum(axis=1).mean() == pytest.approx(2.4, rel=0.02)
    assert naive_uniform_sample(0, rng).shape == (0,)


def test_samples_are_valid_configs():
    for r in sample_many(SamplerConfig(6, 0.6, 4.2), 50, 0):
        CompressionConfig(tuple(r))
