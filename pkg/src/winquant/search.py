"""Bi-objective NSGA-II search over per-pair compression configs.

Both objectives are maximised: computational saving (``1 - relative
cost``) and quality (mean final-stage SQNR against the float model).
Genes are ratio codes ``0..8`` (ratio x 10): one per pair, or two per pair
(compression then pruning) in ``mixaq+prune`` mode.
"""
from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .backbone import Model, forward_float, forward_mixed
from .compression import GRID_STEPS, MAX_CODE, CompressionConfig, Mode
from .cost import CostModel, total_bops
from .errors import ConfigurationError
from .numerics import FeatureMap
from .quantization import sqnr_db
from .sampling import SamplerConfig, naive_codes, sum_range_from_cost_targets, uniform_sum_codes

CROSSOVER_PROB = 0.9
SAMPLERS = ("uniform_sum", "naive")


@dataclass(frozen=True)
class ParetoPoint:
    saving: float
    quality: float
    config: CompressionConfig

    @property
    def relative_cost(self) -> float:
        return 1.0 - self.saving

    def to_dict(self) -> dict:
        return {
            "saving": self.saving,
            "relative_cost": self.relative_cost,
            "quality_db": self.quality,
            **self.config.to_dict(),
        }


Evaluator = Callable[[CompressionConfig], ParetoPoint]


def dominates(a: ParetoPoint, b: ParetoPoint) -> bool:
    return a.saving >= b.saving and a.quality >= b.quality and (a.saving > b.saving or a.quality > b.quality)


def pareto_filter(points: Iterable[ParetoPoint]) -> list[ParetoPoint]:
    """Points not dominated by any other, in input order. Duplicates all survive."""
    points = list(points)
    order = sorted(range(len(points)), key=lambda i: (-points[i].saving, -points[i].quality))
    keep = [False] * len(points)
    best_q = -np.inf  # best quality among strictly larger savings
    for _, group in itertools.groupby(order, key=lambda i: points[i].saving):
        group = list(group)
        top = points[group[0]].quality
        if top > best_q:
            for i in group:
                if points[i].quality == top:
                    keep[i] = True
        best_q = max(best_q, top)
    return [p for p, k in zip(points, keep) if k]


def hypervolume(points: Iterable[ParetoPoint], ref: tuple[float, float] = (0.0, 0.0)) -> float:
    """Area dominated by ``points`` and bounded below by ``ref`` (maximisation)."""
    pts = [p for p in pareto_filter(points) if p.saving > ref[0] and p.quality > ref[1]]
    pts.sort(key=lambda p: (p.saving, -p.quality))
    area, prev_s = 0.0, ref[0]
    for p in pts:
        area += (p.saving - prev_s) * (p.quality - ref[1])
        prev_s = p.saving
    return area


def dedupe(points: Iterable[ParetoPoint]) -> list[ParetoPoint]:
    seen, out = set(), []
    for p in points:
        if p.config.key not in seen:
            seen.add(p.config.key)
            out.append(p)
    return out


# --- evaluators ------------------------------------------------------------


def _point(config: CompressionConfig, cm: CostModel, quality: float) -> ParetoPoint:
    return ParetoPoint(total_bops(cm, config).saving, quality, config)


def evaluate_candidate(
    model: Model,
    eval_inputs: Sequence[FeatureMap],
    config: CompressionConfig,
    cost_model: CostModel,
    reversed: bool = False,
) -> ParetoPoint:
    return ModelEvaluator(model, eval_inputs, cost_model, reversed)(config)


class ModelEvaluator:
    """Scores configs on a fixed input batch without recalibrating the model.

    Float reference outputs are computed once; results are cached per config.
    """

    def __init__(self, model: Model, inputs: Sequence[FeatureMap], cost_model: CostModel, reversed: bool = False):
        if not inputs:
            raise ConfigurationError("evaluation batch is empty")
        if cost_model.n_pairs != model.n_pairs:
            raise ConfigurationError("cost model and model disagree on the number of block pairs")
        self.model = model
        self.inputs = list(inputs)
        self.cost_model = cost_model
        self.reversed = reversed
        self._refs = [forward_float(model, fm).final.data for fm in self.inputs]
        self._cache: dict[tuple, ParetoPoint] = {}

    def quality(self, config: CompressionConfig) -> float:
        vals = [
            sqnr_db(ref, forward_mixed(self.model, fm, config, self.reversed).final.data)
            for ref, fm in zip(self._refs, self.inputs)
        ]
        return float(np.mean(vals))

    def __call__(self, config: CompressionConfig) -> ParetoPoint:
        point = self._cache.get(config.key)
        if point is None:
            point = _point(config, self.cost_model, self.quality(config))
            self._cache[config.key] = point
        return point


class LinearTradeoffEvaluator:
    """Synthetic objective: ``quality = 1 - saving``; every point is Pareto-optimal."""

    def __init__(self, cost_model: CostModel):
        self.cost_model = cost_model

    def __call__(self, config: CompressionConfig) -> ParetoPoint:
        saving = total_bops(self.cost_model, config).saving
        return ParetoPoint(saving, 1.0 - saving, config)


# --- NSGA-II machinery -----------------------------------------------------


def non_dominated_sort(points: Sequence[ParetoPoint]) -> list[list[int]]:
    n = len(points)
    dominated_by = [[] for _ in range(n)]
    counts = [0] * n
    fronts: list[list[int]] = [[]]
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            if dominates(points[i], points[j]):
                dominated_by[i].append(j)
            elif dominates(points[j], points[i]):
                counts[i] += 1
        if counts[i] == 0:
            fronts[0].append(i)
    while fronts[-1]:
        nxt = []
        for i in fronts[-1]:
            for j in dominated_by[i]:
                counts[j] -= 1
                if counts[j] == 0:
                    nxt.append(j)
        fronts.append(sorted(nxt))
    return fronts[:-1]


def crowding_distance(points: Sequence[ParetoPoint], front: Sequence[int]) -> dict[int, float]:
    dist = {i: 0.0 for i in front}
    if len(front) <= 2:
        return {i: np.inf for i in front}
    for attr in ("saving", "quality"):
        ordered = sorted(front, key=lambda i: getattr(points[i], attr))
        lo, hi = getattr(points[ordered[0]], attr), getattr(points[ordered[-1]], attr)
        dist[ordered[0]] = dist[ordered[-1]] = np.inf
        if hi == lo:
            continue
        for k in range(1, len(ordered) - 1):
            gap = getattr(points[ordered[k + 1]], attr) - getattr(points[ordered[k - 1]], attr)
            dist[ordered[k]] += gap / (hi - lo)
    return dist


def _rank_and_crowding(points: Sequence[ParetoPoint]) -> tuple[list[int], list[float]]:
    rank = [0] * len(points)
    crowd = [0.0] * len(points)
    for r, front in enumerate(non_dominated_sort(points)):
        for i, d in crowding_distance(points, front).items():
            rank[i], crowd[i] = r, d
    return rank, crowd


def _survivors(points: Sequence[ParetoPoint], size: int) -> list[int]:
    chosen: list[int] = []
    for front in non_dominated_sort(points):
        if len(chosen) + len(front) <= size:
            chosen += front
            continue
        dist = crowding_distance(points, front)
        chosen += sorted(front, key=lambda i: -dist[i])[: size - len(chosen)]
        break
    return chosen


class _Genome:
    """Gene layout and repair for one search mode."""

    def __init__(self, n_pairs: int, mode: Mode):
        self.n_pairs = n_pairs
        self.mode = Mode(mode)
        self.length = 2 * n_pairs if self.mode is Mode.MIXAQ_PRUNE else n_pairs

    def repair(self, genes: np.ndarray) -> tuple[int, ...]:
        genes = np.clip(np.asarray(genes, dtype=np.int64), 0, MAX_CODE)
        if self.mode is Mode.MIXAQ_PRUNE:
            r, p = genes[: self.n_pairs], genes[self.n_pairs :]
            genes = np.concatenate([r, np.minimum(p, GRID_STEPS - r)])
        return tuple(int(g) for g in genes)

    def config(self, genes: Sequence[int]) -> CompressionConfig:
        n = self.n_pairs
        if self.mode is Mode.MIXAQ:
            return CompressionConfig.from_codes(genes)
        if self.mode is Mode.PRUNE:
            return CompressionConfig.from_codes([0] * n, genes)
        return CompressionConfig.from_codes(genes[:n], genes[n:])

    def genes(self, config: CompressionConfig) -> tuple[int, ...]:
        if self.mode is Mode.MIXAQ:
            return config.ratio_codes
        if self.mode is Mode.PRUNE:
            return config.pruning_codes
        return config.ratio_codes + config.pruning_codes


def default_sampler_config(n_pairs: int) -> SamplerConfig:
    s_min, s_max = sum_range_from_cost_targets(0.65, 0.95, n_pairs)
    return SamplerConfig(n_pairs, s_min, s_max)


def nsga2_search(
    evaluator: Evaluator,
    n_pairs: int,
    pop_size: int = 32,
    generations: int = 20,
    sampler: str = "uniform_sum",
    rng: np.random.Generator | None = None,
    mode: Mode | str = Mode.MIXAQ,
    sampler_config: SamplerConfig | None = None,
    initial: Sequence[CompressionConfig] | None = None,
    on_generation: Callable[[int, list[ParetoPoint]], None] | None = None,
    threads: int = 1,
) -> list[ParetoPoint]:
    """Run NSGA-II and return the final non-dominated set, one point per config.

    ``initial`` replaces sampler initialisation. ``on_generation`` receives
    the surviving population after initialisation (generation 0) and after
    every generation.
    """
    if sampler not in SAMPLERS:
        raise ConfigurationError(f"unknown sampler {sampler!r}; choose from {SAMPLERS}")
    rng = rng if rng is not None else np.random.default_rng(0)
    genome = _Genome(n_pairs, mode)
    scfg = sampler_config or default_sampler_config(n_pairs)
    cache: dict[tuple[int, ...], ParetoPoint] = {}

    def evaluate(batch: list[tuple[int, ...]]) -> list[ParetoPoint]:
        todo = [g for g in dict.fromkeys(batch) if g not in cache]
        configs = [genome.config(g) for g in todo]
        if threads > 1 and len(configs) > 1:
            with ThreadPoolExecutor(threads) as pool:
                results = list(pool.map(evaluator, configs))
        else:
            results = [evaluator(c) for c in configs]
        cache.update(zip(todo, results))
        return [cache[g] for g in batch]

    def draw() -> np.ndarray:
        if sampler == "naive":
            return naive_codes(n_pairs, rng)
        return uniform_sum_codes(scfg, rng)

    def fresh() -> tuple[int, ...]:
        if genome.mode is Mode.MIXAQ_PRUNE:
            return genome.repair(np.concatenate([draw(), draw()]))
        return genome.repair(draw())

    attempts = 20 * pop_size
    if initial is not None:
        population = [genome.repair(genome.genes(c)) for c in initial]
    else:
        if pop_size < 4 or pop_size % 2:
            raise ConfigurationError("population size must be even and at least 4")
        population, seen = [], set()
        for _ in range(attempts):
            g = fresh()
            if g not in seen:
                seen.add(g)
                population.append(g)
            if len(population) == pop_size:
                break
        while len(population) < pop_size:
            population.append(fresh())
    size = len(population)
    points = evaluate(population)
    if on_generation:
        on_generation(0, list(points))

    mutation_prob = 1.0 / genome.length
    for gen in range(1, generations + 1):
        rank, crowd = _rank_and_crowding(points)

        def tournament() -> tuple[int, ...]:
            a, b = rng.integers(0, size, 2)
            better = a if (rank[a], -crowd[a]) <= (rank[b], -crowd[b]) else b
            return population[better]

        existing = set(population)
        offspring: list[tuple[int, ...]] = []
        for _ in range(attempts):
            p1, p2 = np.array(tournament()), np.array(tournament())
            c1, c2 = p1.copy(), p2.copy()
            if rng.random() < CROSSOVER_PROB:
                swap = rng.random(genome.length) < 0.5
                c1[swap], c2[swap] = p2[swap], p1[swap]
            for child in (c1, c2):
                flip = rng.random(genome.length) < mutation_prob
                child[flip] = rng.integers(0, MAX_CODE, size=int(flip.sum()), endpoint=True)
                g = genome.repair(child)
                if g not in existing:
                    existing.add(g)
                    offspring.append(g)
            if len(offspring) >= size:
                break
        offspring = offspring[:size]
        merged = population + offspring
        merged_points = points + evaluate(offspring)
        keep = _survivors(merged_points, size)
        population = [merged[i] for i in keep]
        points = [merged_points[i] for i in keep]
        if on_generation:
            on_generation(gen, list(points))

    front = dedupe(pareto_filter(points))
    return sorted(front, key=lambda p: (p.saving, -p.quality))
