import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from winquant.compression import CompressionConfig
from winquant.cost import swin_tiny_cost_model
from winquant.errors import ConfigurationError
from winquant.search import (
    LinearTradeoffEvaluator,
    ModelEvaluator,
    ParetoPoint,
    crowding_distance,
    dominates,
    evaluate_candidate,
    hypervolume,
    non_dominated_sort,
    nsga2_search,
    pareto_filter,
)

ZERO = CompressionConfig.zeros(1)
LINEAR = LinearTradeoffEvaluator(swin_tiny_cost_model())


def pts(pairs):
    return [ParetoPoint(float(s), float(q), ZERO) for s, q in pairs]


def brute_filter(points):
    return [p for p in points if not any(dominates(o, p) for o in points)]


def test_pareto_filter_examples():
    assert [(p.saving, p.quality) for p in pareto_filter(pts([(1, 2), (2, 1)]))] == [(1, 2), (2, 1)]
    assert [(p.saving, p.quality) for p in pareto_filter(pts([(1, 1), (2, 2)]))] == [(2, 2)]


def test_pareto_filter_matches_brute_force_on_random_points():
    rng = np.random.default_rng(0)
    for _ in range(20):
        points = pts(rng.integers(0, 10, (100, 2)))
        assert pareto_filter(points) == brute_filter(points)


@given(st.lists(st.tuples(st.integers(0, 6), st.integers(0, 6)), max_size=30))
def test_pareto_filter_property(pairs):
    points = pts(pairs)
    assert pareto_filter(points) == brute_filter(points)


def test_hypervolume():
    assert hypervolume(pts([(0.5, 2.0)])) == 1.0
    assert hypervolume(pts([(0.2, 3.0), (0.5, 1.0)])) == pytest.approx(0.2 * 3 + 0.3 * 1)
    assert hypervolume(pts([(0.2, 3.0), (0.1, 1.0), (0.0, 9.0)])) == pytest.approx(0.6)
    assert hypervolume([]) == 0.0


def test_hypervolume_matches_grid_integration():
    rng = np.random.default_rng(1)
    points = pts(rng.integers(1, 20, (15, 2)))
    grid = np.arange(0.5, 20, 1.0)
    covered = sum(any(p.saving >= s and p.quality >= q for p in points) for s in grid for q in grid)
    assert hypervolume(points) == pytest.approx(covered)


def test_non_dominated_sort_and_crowding():
    points = pts([(0, 3), (1, 2), (2, 1), (0, 1), (1, 0), (0, 0)])
    fronts = non_dominated_sort(points)
    assert fronts == [[0, 1, 2], [3, 4], [5]]
    d = crowding_distance(points, fronts[0])
    assert d[0] == d[2] == np.inf and d[1] == pytest.approx(2.0)


def test_single_zero_config_population():
    front = nsga2_search(LINEAR, 6, generations=3, initial=[CompressionConfig.zeros(6)])
    assert len(front) == 1 and front[0].config == CompressionConfig.zeros(6)
    assert front[0].saving == 0.0


def _assert_sound(front):
    assert pareto_filter(front) == front
    assert len({p.config.key for p in front}) == len(front)
    for p in front:
        assert all(r + q <= 1.0 + 1e-12 for r, q in zip(p.config.ratios, p.config.pruning))
        assert 0.0 <= p.saving < 1.0


@pytest.mark.parametrize("mode", ["mixaq", "prune", "mixaq+prune"])
@pytest.mark.parametrize("sampler", ["uniform_sum", "naive"])
def test_synthetic_search_is_sound(mode, sampler):
    _assert_sound(nsga2_search(LINEAR, 6, 16, 4, sampler, np.random.default_rng(0), mode=mode))


def test_linear_front_spread():
    front = nsga2_search(LINEAR, 6, 32, 10, "uniform_sum", np.random.default_rng(0))
    assert len({int(p.saving / 0.05) for p in front}) >= 5


def test_search_reproducible_per_seed():
    a = nsga2_search(LINEAR, 6, 16, 3, rng=np.random.default_rng(5))
    b = nsga2_search(LINEAR, 6, 16, 3, rng=np.random.default_rng(5))
    assert a == b


def test_threads_do_not_change_result():
    a = nsga2_search(LINEAR, 6, 16, 3, rng=np.random.default_rng(2))
    b = nsga2_search(LINEAR, 6, 16, 3, rng=np.random.default_rng(2), threads=4)
    assert a == b


class _Bumpy:
    """Quality peaks away from the linear trade-off to exercise selection."""

    def __init__(self):
        self.inner = LinearTradeoffEvaluator(swin_tiny_cost_model())

    def __call__(self, config):
        p = self.inner(config)
        return ParetoPoint(p.saving, float(np.cos(7 * p.saving) - p.saving + 0.1 * config.ratios[0]), config)


def test_elitism_best_quality_at_zero_saving_never_degrades():
    history = []
    start = [CompressionConfig.zeros(6)] + [CompressionConfig.from_codes([k] * 6) for k in range(1, 8)]
    nsga2_search(_Bumpy(), 6, generations=6, rng=np.random.default_rng(3), initial=start,
                 on_generation=lambda g, pop: history.append(pop))
    best = [max((p.quality for p in pop if p.saving == 0.0), default=-np.inf) for pop in history]
    assert best[0] > -np.inf
    assert all(b2 >= b1 for b1, b2 in zip(best, best[1:]))
    for pop in history[1:]:
        prev_best = max(p.quality for p in history[0])
        assert max(p.quality for p in pop) >= prev_best


def test_invalid_search_arguments():
    with pytest.raises(ConfigurationError):
        nsga2_search(LINEAR, 6, pop_size=5)
    with pytest.raises(ConfigurationError):
        nsga2_search(LINEAR, 6, sampler="sobol")


def test_model_evaluator(small_model, small_inputs):
    cm = swin_tiny_cost_model(8, 4)
    ev = ModelEvaluator(small_model, small_inputs[:2], cm)
    zero = ev(CompressionConfig.zeros(6))
    assert zero.saving == 0.0
    again = evaluate_candidate(small_model, small_inputs[:2], CompressionConfig.zeros(6), cm)
    assert again == zero
    full = ev(CompressionConfig((0.8,) * 6))
    assert full.saving > 0 and full.quality < zero.quality
    with pytest.raises(ConfigurationError):
        ModelEvaluator(small_model, [], cm)


def test_real_search_runs(small_model, small_inputs):
    ev = ModelEvaluator(small_model, small_inputs[:1], swin_tiny_cost_model(8, 4))
    _assert_sound(nsga2_search(ev, 6, 8, 1, rng=np.random.default_rng(0)))
