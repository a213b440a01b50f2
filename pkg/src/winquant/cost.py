"""Bit-operation accounting for compression configs.

BOPs of a layer = MACs x weight bits x activation bits. A window routed to
the low branch costs half (its activations use half the bits); a pruned
window costs nothing. Layers outside the block pairs (patch merging)
always run at full cost.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

from .backbone import MLP_RATIO, ModelSpec
from .compression import CompressionConfig, Mode
from .errors import ConfigurationError

# Swin-Tiny backbone: GMACs per block pair, and the non-saveable remainder
SWIN_TINY_GMACS = (13.3, 13.56, 14.16, 14.16, 14.16, 14.02)
SWIN_TINY_FIXED_GMACS = 3.0


@dataclass(frozen=True)
class CostModel:
    gmacs_per_pair: tuple[float, ...]
    fixed_gmacs: float
    base_act_bits: int = 4
    weight_bits: int = 4

    def __post_init__(self):
        object.__setattr__(self, "gmacs_per_pair", tuple(float(g) for g in self.gmacs_per_pair))
        if not self.gmacs_per_pair or min(self.gmacs_per_pair) <= 0:
            raise ConfigurationError("per-pair GMACs must be positive")
        if self.fixed_gmacs < 0 or self.base_act_bits <= 0 or self.weight_bits <= 0:
            raise ConfigurationError("cost model constants must be positive")

    @property
    def n_pairs(self) -> int:
        return len(self.gmacs_per_pair)


@dataclass(frozen=True)
class CostReport:
    total_bops: float
    relative_cost: float
    speedup: float
    equivalent_act_bits: float

    @property
    def saving(self) -> float:
        return 1.0 - self.relative_cost

    def to_dict(self) -> dict:
        return asdict(self)


def swin_tiny_cost_model(base_act_bits: int = 4, weight_bits: int = 4) -> CostModel:
    return CostModel(SWIN_TINY_GMACS, SWIN_TINY_FIXED_GMACS, base_act_bits, weight_bits)


def toy_cost_model(spec: ModelSpec, base_act_bits: int, weight_bits: int) -> CostModel:
    """Count the toy backbone's MACs analytically.

    Per block and token: qkv ``3C^2``, projection ``C^2``, FFN
    ``2 * MLP_RATIO * C^2``, and ``2 * P^2 * C`` for the two attention
    products. Patch merging (``4C -> 2C`` per output token) is fixed cost.
    """
    pairs = []
    fixed = 0.0
    t = spec.window_size**2
    for i, st in enumerate(spec.stages):
        h, w = spec.stage_resolution(i)
        c = st.channels
        per_block = h * w * ((4 + 2 * MLP_RATIO) * c * c + 2 * t * c)
        pairs += [2 * per_block / 1e9] * st.n_block_pairs
        if i < len(spec.stages) - 1:
            fixed += (h // 2) * (w // 2) * 4 * c * 2 * c / 1e9
    return CostModel(tuple(pairs), fixed, base_act_bits, weight_bits)


def pair_cost_fraction(r: float, p: float = 0.0, method: Mode | str = Mode.MIXAQ) -> float:
    """Share of a block pair's full cost that is still spent.

    ``method="prune"`` reads ``r`` itself as a pruning ratio.
    """
    method = Mode(method)
    if method is Mode.PRUNE:
        frac = 1.0 - r - p
    else:
        frac = 1.0 - p - r / 2.0
    if r < 0 or p < 0 or frac < 0:
        raise ConfigurationError(f"invalid ratios r={r}, p={p} give cost fraction {frac}")
    return frac


def _as_config(config: CompressionConfig | Sequence[float], method: Mode | str | None) -> CompressionConfig:
    if isinstance(config, CompressionConfig):
        if method is not None and Mode(method) is Mode.PRUNE and any(config.ratios):
            raise ConfigurationError("prune method expects a config without compression ratios")
        return config
    return CompressionConfig.from_mode(config, method or Mode.MIXAQ)


def _fractions(config: CompressionConfig, cm: CostModel) -> list[float]:
    if len(config) != cm.n_pairs:
        raise ConfigurationError(f"config has {len(config)} pairs, cost model has {cm.n_pairs}")
    return [pair_cost_fraction(r, p) for r, p in zip(config.ratios, config.pruning)]


def equivalent_act_bits(
    config: CompressionConfig | Sequence[float], cm: CostModel, method: Mode | str | None = None
) -> float:
    """Cost-weighted average activation bit width.

    ``base * (sum(frac_i * G_i) + C) / (sum(G_i) + C)``
    """
    fracs = _fractions(_as_config(config, method), cm)
    num = sum(f * g for f, g in zip(fracs, cm.gmacs_per_pair)) + cm.fixed_gmacs
    den = sum(cm.gmacs_per_pair) + cm.fixed_gmacs
    return cm.base_act_bits * num / den


def total_bops(
    cm: CostModel, config: CompressionConfig | Sequence[float], method: Mode | str | None = None
) -> CostReport:
    config = _as_config(config, method)
    unit = 1e9 * cm.weight_bits * cm.base_act_bits
    fracs = _fractions(config, cm)
    full = (sum(cm.gmacs_per_pair) + cm.fixed_gmacs) * unit
    total = (sum(f * g for f, g in zip(fracs, cm.gmacs_per_pair)) + cm.fixed_gmacs) * unit
    relative = total / full
    return CostReport(
        total_bops=total,
        relative_cost=relative,
        speedup=1.0 / relative,
        equivalent_act_bits=equivalent_act_bits(config, cm),
    )
