"""Toy hierarchical Swin-style backbone built from two-branch blocks.

Each stage holds ``n_block_pairs`` (regular, shifted) block pairs and is
followed by 2x2 patch merging, except the last. Window importance is
scored once on each stage's input and shared by every block of the stage.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .block import (
    LAYER_ROLES,
    BlockTrace,
    Branch,
    QuantLinear,
    TwoBranchBlockParams,
    single_branch_forward,
    two_branch_forward,
)
from .compression import CompressionConfig
from .errors import ConfigurationError
from .numerics import FeatureMap, LayerNormParams, LinearWeights, linear
from .quantization import PASS_THROUGH, VALID_BITS, BranchQuant, calibrate_minmax
from .windowing import ImportanceScores, WindowAssignment, importance_scores, partition

MLP_RATIO = 4


@dataclass(frozen=True)
class StageSpec:
    n_block_pairs: int
    channels: int
    heads: int


@dataclass(frozen=True)
class ModelSpec:
    stages: tuple[StageSpec, ...] = (
        StageSpec(1, 32, 2),
        StageSpec(1, 64, 4),
        StageSpec(3, 128, 8),
        StageSpec(1, 256, 16),
    )
    window_size: int = 7
    input_shape: tuple[int, int, int] = (56, 56, 32)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        object.__setattr__(self, "input_shape", tuple(self.input_shape))
        if not self.stages:
            raise ConfigurationError("a model needs at least one stage")
        h, w, c = self.input_shape
        if self.window_size < 1:
            raise ConfigurationError("window size must be positive")
        factor = self.window_size * 2 ** (len(self.stages) - 1)
        if h % factor or w % factor:
            raise ConfigurationError(f"input {h}x{w} must be divisible by {factor}")
        if self.stages[0].channels != c:
            raise ConfigurationError("first stage width must equal the input channel count")
        for i, st in enumerate(self.stages):
            if st.n_block_pairs < 1:
                raise ConfigurationError("each stage needs at least one block pair")
            if st.heads < 1 or st.channels % st.heads:
                raise ConfigurationError(f"stage {i}: {st.heads} heads do not divide {st.channels}")
            if i and st.channels != 2 * self.stages[i - 1].channels:
                raise ConfigurationError("patch merging doubles the width; stage channels must double")

    @property
    def n_pairs(self) -> int:
        return sum(st.n_block_pairs for st in self.stages)

    def stage_resolution(self, i: int) -> tuple[int, int]:
        h, w, _ = self.input_shape
        return h >> i, w >> i


@dataclass(frozen=True)
class QuantBits:
    weight: int = 4
    act_high: int = 8
    act_low: int = 4

    def __post_init__(self):
        for name in ("weight", "act_high", "act_low"):
            if getattr(self, name) not in VALID_BITS:
                raise ConfigurationError(f"{name} bits must be one of {VALID_BITS}")
        if self.act_low > self.act_high:
            raise ConfigurationError("low-branch bits exceed high-branch bits")


@dataclass(frozen=True)
class Stage:
    blocks: tuple[TwoBranchBlockParams, ...]
    merge: QuantLinear | None


@dataclass(frozen=True)
class Model:
    spec: ModelSpec
    bits: QuantBits
    stages: tuple[Stage, ...]

    @property
    def n_pairs(self) -> int:
        return self.spec.n_pairs

    @property
    def blocks(self) -> list[TwoBranchBlockParams]:
        return [b for st in self.stages for b in st.blocks]


@dataclass
class StageOutputs:
    """Per-stage outputs (before patch merging) plus the selection records."""

    maps: list[FeatureMap]
    scores: list[ImportanceScores | None] = field(default_factory=list)
    assignments: list[list[WindowAssignment]] = field(default_factory=list)

    @property
    def final(self) -> FeatureMap:
        return self.maps[-1]

    def to_dict(self, include_data: bool = False) -> dict:
        stages = []
        for i, fm in enumerate(self.maps):
            entry = {"stage": i, "shape": list(fm.shape)}
            if self.scores and self.scores[i] is not None:
                entry["scores"] = self.scores[i].scores.tolist()
            if self.assignments and self.assignments[i]:
                entry["assignments"] = [a.labels() for a in self.assignments[i]]
            if include_data:
                entry["data"] = fm.data.tolist()
            stages.append(entry)
        return {"stages": stages}


def _init_linear(rng: np.random.Generator, in_dim: int, out_dim: int) -> LinearWeights:
    a = 1.0 / np.sqrt(in_dim)
    return LinearWeights(rng.uniform(-a, a, (out_dim, in_dim)), rng.uniform(-a, a, out_dim))


def _quant_layer(weights: LinearWeights, bits: QuantBits) -> QuantLinear:
    wq = calibrate_minmax(weights.matrix, bits.weight)
    # activation quantizers start as pass-through until calibrated
    return QuantLinear.from_float(weights, BranchQuant(PASS_THROUGH, PASS_THROUGH, wq))


def build_model(
    spec: ModelSpec,
    bits: QuantBits = QuantBits(),
    calibration: FeatureMap | None = None,
) -> Model:
    """Seeded weights, calibrated weight quantizers and activation quantizers.

    Activations are calibrated on ``calibration`` or, by default, on one
    seeded random input derived from ``spec.seed``.
    """
    rng = np.random.default_rng(spec.seed)
    stages = []
    for i, st in enumerate(spec.stages):
        c = st.channels
        blocks = []
        for b in range(2 * st.n_block_pairs):
            layers = {
                "qkv": _init_linear(rng, c, 3 * c),
                "proj": _init_linear(rng, c, c),
                "fc1": _init_linear(rng, c, MLP_RATIO * c),
                "fc2": _init_linear(rng, MLP_RATIO * c, c),
            }
            blocks.append(
                TwoBranchBlockParams(
                    ln1_high=LayerNormParams.identity(c),
                    ln1_low=LayerNormParams.identity(c),
                    ln2_high=LayerNormParams.identity(c),
                    ln2_low=LayerNormParams.identity(c),
                    **{role: _quant_layer(w, bits) for role, w in layers.items()},
                    heads=st.heads,
                    window_size=spec.window_size,
                    shifted=bool(b % 2),
                )
            )
        merge = None
        if i < len(spec.stages) - 1:
            merge = _quant_layer(_init_linear(rng, 4 * c, 2 * c), bits)
        stages.append(Stage(tuple(blocks), merge))
    model = Model(spec, bits, tuple(stages))
    if calibration is None:
        calibration = random_input(spec, seed=calibration_seed(spec))
    return calibrate(model, calibration)


def calibration_seed(spec: ModelSpec) -> int:
    return spec.seed + 7919


def random_input(spec: ModelSpec, seed: int) -> FeatureMap:
    """Seeded standard-normal patch embeddings standing in for an image."""
    rng = np.random.default_rng(seed)
    return FeatureMap(rng.standard_normal(spec.input_shape))


def patch_merge(fm: FeatureMap, layer: LinearWeights | QuantLinear, branch: Branch = Branch.FLOAT) -> FeatureMap:
    """Concatenate each 2x2 patch neighbourhood (C -> 4C), then reduce linearly."""
    if fm.height % 2 or fm.width % 2:
        raise ConfigurationError(f"patch merging needs even dimensions, got {fm.height}x{fm.width}")
    x = fm.data
    cat = np.concatenate([x[0::2, 0::2], x[1::2, 0::2], x[0::2, 1::2], x[1::2, 1::2]], axis=-1)
    if isinstance(layer, QuantLinear):
        return FeatureMap(layer(cat, branch))
    return FeatureMap(linear(cat, layer))


def _run(
    model: Model,
    fm: FeatureMap,
    config: CompressionConfig | None,
    branch: Branch,
    reversed: bool = False,
    traces: list[BlockTrace] | None = None,
) -> StageOutputs:
    if fm.shape != model.spec.input_shape:
        raise ConfigurationError(f"model expects input {model.spec.input_shape}, got {fm.shape}")
    if config is not None and len(config) != model.n_pairs:
        raise ConfigurationError(f"config has {len(config)} pairs, model has {model.n_pairs}")
    merge_branch = Branch.FLOAT if branch is Branch.FLOAT else Branch.HIGH
    out = StageOutputs(maps=[])
    x = fm
    pair = 0
    for stage in model.stages:
        scores = None
        if config is not None:
            scores = importance_scores(partition(x, model.spec.window_size), reversed)
        stage_assign = []
        for b, block in enumerate(stage.blocks):
            if config is None:
                trace = None
                if traces is not None:
                    trace = BlockTrace()
                    traces.append(trace)
                x = single_branch_forward(x, block, branch, trace)
            else:
                k = pair + b // 2
                trace = BlockTrace()
                x = two_branch_forward(x, scores, config.ratios[k], config.pruning[k], block, trace=trace)
                stage_assign.append(trace.assignment)
        pair += len(stage.blocks) // 2
        out.maps.append(x)
        out.scores.append(scores)
        out.assignments.append(stage_assign)
        if stage.merge is not None:
            if traces is not None:
                merge_trace = BlockTrace()
                merge_trace.record("merge", x.data)
                traces.append(merge_trace)
            x = patch_merge(x, stage.merge, merge_branch)
    return out


def forward_mixed(
    model: Model, fm: FeatureMap, config: CompressionConfig, reversed: bool = False
) -> StageOutputs:
    """Two-branch forward: per pair, ``config`` sets the low and pruned window shares."""
    return _run(model, fm, config, Branch.HIGH, reversed)


def forward_uniform(model: Model, fm: FeatureMap) -> StageOutputs:
    """Single-branch forward with every window at the high activation bit width."""
    return _run(model, fm, None, Branch.HIGH)


def forward_float(model: Model, fm: FeatureMap) -> StageOutputs:
    """Float oracle: master weights, no activation quantization, single branch."""
    return _run(model, fm, None, Branch.FLOAT)


def calibrate(model: Model, fm: FeatureMap) -> Model:
    """Min/max-calibrate every activation quantizer on the float activations
    of ``fm``. Both branches see the full feature map."""
    traces: list[BlockTrace] = []
    _run(model, fm, None, Branch.FLOAT, traces=traces)
    it = iter(traces)
    bits = model.bits

    def fitted(layer: QuantLinear, samples: list[np.ndarray]) -> QuantLinear:
        flat = np.concatenate([s.ravel() for s in samples])
        return layer.with_activation_quant(
            calibrate_minmax(flat, bits.act_high), calibrate_minmax(flat, bits.act_low)
        )

    stages = []
    for stage in model.stages:
        blocks = []
        for block in stage.blocks:
            trace = next(it)
            blocks.append(replace(block, **{r: fitted(block.layer(r), trace.layer_inputs[r]) for r in LAYER_ROLES}))
        merge = stage.merge
        if merge is not None:
            merge = fitted(merge, next(it).layer_inputs["merge"])
        stages.append(Stage(tuple(blocks), merge))
    return replace(model, stages=tuple(stages))
