"""Compression-ratio samplers.

``uniform_sum_sample`` draws ratio vectors whose sum is uniform over a
target range: an integer sum ``S`` on the x10 grid, a Dirichlet split of
``S`` redrawn until no share exceeds the cap, then largest-remainder
rounding back onto the grid. ``naive_uniform_sample`` draws each ratio
independently, which concentrates the sum around its mean.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .compression import GRID_STEPS, MAX_CODE
from .errors import ConfigurationError, InvariantError, SamplingError

DEFAULT_MAX_REJECTS = 1_000_000
_BATCH = 256  # Dirichlet candidates drawn per vectorised rejection round


@dataclass(frozen=True)
class SamplerConfig:
    n: int
    s_min: float
    s_max: float
    upper: float = 0.8
    alpha: float = 1.0
    max_rejects: int = DEFAULT_MAX_REJECTS

    def __post_init__(self):
        if self.n < 1:
            raise ConfigurationError("sampler needs at least one ratio")
        if not 0.0 < self.upper < 1.0:
            raise ConfigurationError(f"upper bound must lie in (0, 1), got {self.upper}")
        if not 0.0 <= self.s_min <= self.s_max <= self.n * self.upper + 1e-9:
            raise ConfigurationError(
                f"need 0 <= s_min <= s_max <= n*u, got [{self.s_min}, {self.s_max}] with n*u={self.n * self.upper}"
            )
        if self.alpha <= 0 or self.max_rejects < 0:
            raise ConfigurationError("alpha must be positive and max_rejects non-negative")

    @property
    def sum_codes(self) -> tuple[int, int]:
        return round(self.s_min * GRID_STEPS), round(self.s_max * GRID_STEPS)

    @property
    def upper_code(self) -> float:
        return self.upper * GRID_STEPS


def sum_range_from_cost_targets(cost_lo: float, cost_hi: float, n: int) -> tuple[float, float]:
    """Ratio-sum range whose configs land in ``[cost_lo, cost_hi]`` relative cost,
    assuming equal-cost pairs and 50% saving per compressed window."""
    if not 0.0 < cost_lo <= cost_hi <= 1.0:
        raise ConfigurationError(f"need 0 < cost_lo <= cost_hi <= 1, got [{cost_lo}, {cost_hi}]")
    # exact decimal arithmetic on the shortest repr: 0.65 and 0.95 with n=6 give exactly (0.6, 4.2)
    lo, hi = Fraction(repr(float(cost_lo))), Fraction(repr(float(cost_hi)))
    return float((1 - hi) * n * 2), float((1 - lo) * n * 2)


def lrm_round(values: Sequence[float], target: int) -> np.ndarray:
    """Largest-remainder rounding of ``values`` to integers summing to ``target``.

    Remainder ties go to the lower index.
    """
    v = np.asarray(values, dtype=np.float64)
    if np.any(v < 0):
        raise ConfigurationError("largest-remainder rounding needs non-negative values")
    if abs(float(v.sum()) - target) > 1e-6:
        raise ConfigurationError(f"values sum to {v.sum()}, expected {target}")
    out = np.floor(v).astype(np.int64)
    diff = int(target) - int(out.sum())
    if not 0 <= diff <= v.shape[0]:
        raise InvariantError(f"rounding deficit {diff} outside [0, {v.shape[0]}]")
    if diff:
        remainder = v - out
        order = np.lexsort((np.arange(v.shape[0]), -remainder))
        out[order[:diff]] += 1
    return out


def _dirichlet(rng: np.random.Generator, alpha: float, size: tuple[int, int]) -> np.ndarray:
    # normalised unit-rate exponentials are Dirichlet(1, ..., 1)
    g = rng.standard_exponential(size) if alpha == 1.0 else rng.standard_gamma(alpha, size)
    return g / g.sum(axis=1, keepdims=True)


def uniform_sum_codes(cfg: SamplerConfig, rng: np.random.Generator) -> np.ndarray:
    """One draw as integer codes (ratio x 10)."""
    lo, hi = cfg.sum_codes
    s = int(rng.integers(lo, hi, endpoint=True))
    cap = cfg.upper_code
    rejected = 0
    while True:
        shares = _dirichlet(rng, cfg.alpha, (_BATCH, cfg.n)) * s
        ok = np.flatnonzero(np.all(shares <= cap, axis=1))
        if ok.size:
            rejected += int(ok[0])
            if rejected > cfg.max_rejects:
                break
            return lrm_round(shares[ok[0]], s)
        rejected += _BATCH
        if rejected > cfg.max_rejects:
            break
    raise SamplingError(
        f"no ratio split of sum {s / GRID_STEPS} under cap {cfg.upper} after {cfg.max_rejects} rejections"
    )


def uniform_sum_sample(cfg: SamplerConfig, rng: np.random.Generator) -> np.ndarray:
    return uniform_sum_codes(cfg, rng) / GRID_STEPS


def naive_codes(n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, MAX_CODE, size=n, endpoint=True)


def naive_uniform_sample(n: int, rng: np.random.Generator) -> np.ndarray:
    """Each ratio independently uniform over {0.0, 0.1, ..., 0.8}."""
    return naive_codes(n, rng) / GRID_STEPS


def draw_seed(base_seed: int, index: int) -> int:
    """Per-draw seed; draws are independent and reproducible in any order."""
    return base_seed + index


def sample_many(cfg: SamplerConfig, count: int, base_seed: int) -> list[np.ndarray]:
    return [uniform_sum_sample(cfg, np.random.default_rng(draw_seed(base_seed, i))) for i in range(count)]

