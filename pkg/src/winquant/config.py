"""Versioned JSON run configuration."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .backbone import ModelSpec, QuantBits, StageSpec
from .compression import Mode
from .cost import CostModel, swin_tiny_cost_model, toy_cost_model
from .errors import ConfigurationError, WinQuantError
from .sampling import DEFAULT_MAX_REJECTS, SamplerConfig, sum_range_from_cost_targets

SCHEMA_VERSION = 1


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class StageSection(_Strict):
    n_block_pairs: int = Field(ge=1)
    channels: int = Field(ge=1)
    heads: int = Field(ge=1)


class ModelSection(_Strict):
    stages: list[StageSection] = [
        StageSection(n_block_pairs=1, channels=32, heads=2),
        StageSection(n_block_pairs=1, channels=64, heads=4),
        StageSection(n_block_pairs=3, channels=128, heads=8),
        StageSection(n_block_pairs=1, channels=256, heads=16),
    ]
    window_size: int = 7
    input_shape: tuple[int, int, int] = (56, 56, 32)


class BitsSection(_Strict):
    weight: int = 4
    act_high: int = 8
    act_low: int = 4


class CostSection(_Strict):
    mode: Literal["swin_tiny", "toy"] = "swin_tiny"
    base_act_bits: Optional[int] = Field(default=None, ge=1)  # defaults to bits.act_high


class SamplerSection(_Strict):
    cost_lo: float = 0.65
    cost_hi: float = 0.95
    upper: float = 0.8
    alpha: float = 1.0
    max_rejects: int = DEFAULT_MAX_REJECTS


class SearchSection(_Strict):
    pop_size: int = 32
    generations: int = Field(default=20, ge=0)
    sampler: Literal["uniform_sum", "naive"] = "uniform_sum"
    mode: Mode = Mode.MIXAQ
    eval_batch: int = Field(default=8, ge=1)


class OutputSection(_Strict):
    dir: str = "out"


class RunConfig(_Strict):
    schema_version: int
    seed: int = Field(default=0, ge=0)
    model: ModelSection = ModelSection()
    bits: BitsSection = BitsSection()
    cost: CostSection = CostSection()
    sampler: SamplerSection = SamplerSection()
    search: SearchSection = SearchSection()
    outputs: OutputSection = OutputSection()

    @field_validator("schema_version")
    @classmethod
    def _known_version(cls, v: int) -> int:
        if v != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {v}; expected {SCHEMA_VERSION}")
        return v

    def model_spec(self, seed: int | None = None) -> ModelSpec:
        m = self.model
        return ModelSpec(
            stages=tuple(StageSpec(s.n_block_pairs, s.channels, s.heads) for s in m.stages),
            window_size=m.window_size,
            input_shape=tuple(m.input_shape),
            seed=self.seed if seed is None else seed,
        )

    def quant_bits(self) -> QuantBits:
        return QuantBits(self.bits.weight, self.bits.act_high, self.bits.act_low)

    def cost_model(self, spec: ModelSpec) -> CostModel:
        base = self.cost.base_act_bits or self.bits.act_high
        if self.cost.mode == "toy":
            return toy_cost_model(spec, base, self.bits.weight)
        cm = swin_tiny_cost_model(base, self.bits.weight)
        if cm.n_pairs != spec.n_pairs:
            raise ConfigurationError(
                f"Swin-Tiny cost constants cover {cm.n_pairs} block pairs, model has {spec.n_pairs}; use cost mode 'toy'"
            )
        return cm

    def sampler_config(self, n_pairs: int) -> SamplerConfig:
        s = self.sampler
        s_min, s_max = sum_range_from_cost_targets(s.cost_lo, s.cost_hi, n_pairs)
        return SamplerConfig(n_pairs, s_min, min(s_max, n_pairs * s.upper), s.upper, s.alpha, s.max_rejects)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}") from None
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    try:
        cfg = RunConfig.model_validate(raw)
        cfg.model_spec()
        cfg.quant_bits()
    except ValidationError as exc:
        raise ConfigurationError(f"invalid config {path}:\n{exc}") from None
    except WinQuantError as exc:
        raise ConfigurationError(f"invalid config {path}: {exc}") from None
    return cfg


def sub_seed(seed: int, stream: str) -> int:
    """Independent seed for one named randomness stream of a run."""
    tag = [ord(ch) for ch in stream]
    return int(np.random.SeedSequence([seed, *tag]).generate_state(1)[0])
