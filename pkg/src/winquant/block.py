"""Two-branch Swin block.

Windows are gathered into a high-precision set, a low-precision set and a
pruned set. Both executing branches run the same pre-norm block
(``x + Attn(LN1(x))`` then ``x + FFN(LN2(x))``) over one shared set of
fake-quantized weights; they differ only in their layer norms and
activation quantizers. Pruned windows skip the whole block.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError
from .numerics import (
    FeatureMap,
    LayerNormParams,
    LinearWeights,
    attention_context,
    gelu,
    layer_norm,
    linear,
)
from .quantization import BranchQuant, QuantParams, fake_quantize
from .windowing import (
    ImportanceScores,
    WindowAssignment,
    WindowSet,
    cyclic_shift,
    partition,
    scatter,
    select_windows,
    shifted_window_mask,
)


class Branch(str, enum.Enum):
    FLOAT = "float"
    HIGH = "high"
    LOW = "low"


@dataclass(frozen=True)
class QuantLinear:
    """A float master layer plus one fake-quantized copy shared by both branches."""

    weights: LinearWeights
    qweights: LinearWeights
    quant: BranchQuant

    @classmethod
    def from_float(cls, weights: LinearWeights, quant: BranchQuant) -> "QuantLinear":
        qmatrix = fake_quantize(weights.matrix, quant.weight)
        return cls(weights, LinearWeights(np.array(qmatrix, copy=True), weights.bias), quant)

    def with_activation_quant(self, act_high: QuantParams, act_low: QuantParams) -> "QuantLinear":
        return QuantLinear(self.weights, self.qweights, BranchQuant(act_high, act_low, self.quant.weight))

    def __call__(self, x: np.ndarray, branch: Branch) -> np.ndarray:
        if branch is Branch.FLOAT:
            return linear(x, self.weights)
        act = self.quant.act_high if branch is Branch.HIGH else self.quant.act_low
        return linear(fake_quantize(x, act), self.qweights)


LAYER_ROLES = ("qkv", "proj", "fc1", "fc2")


@dataclass(frozen=True)
class TwoBranchBlockParams:
    ln1_high: LayerNormParams
    ln1_low: LayerNormParams
    ln2_high: LayerNormParams
    ln2_low: LayerNormParams
    qkv: QuantLinear
    proj: QuantLinear
    fc1: QuantLinear
    fc2: QuantLinear
    heads: int
    window_size: int
    shifted: bool = False

    def __post_init__(self):
        c = self.ln1_high.channels
        if self.heads < 1 or c % self.heads:
            raise ConfigurationError(f"{self.heads} heads do not divide {c} channels")
        if self.qkv.weights.out_dim != 3 * c or self.proj.weights.in_dim != c:
            raise ConfigurationError("attention weights do not match the block width")

    @property
    def channels(self) -> int:
        return self.ln1_high.channels

    def layer(self, role: str) -> QuantLinear:
        return getattr(self, role)

    def norms(self, branch: Branch) -> tuple[LayerNormParams, LayerNormParams]:
        if branch is Branch.LOW:
            return self.ln1_low, self.ln2_low
        return self.ln1_high, self.ln2_high

    def shift_for(self, height: int, width: int) -> int:
        # a map that fits in one window is never shifted
        if not self.shifted or (height <= self.window_size and width <= self.window_size):
            return 0
        return self.window_size // 2


@dataclass
class BlockTrace:
    """Optional side channel: the window assignment used and raw layer inputs."""

    assignment: WindowAssignment | None = None
    layer_inputs: dict[str, list[np.ndarray]] = field(default_factory=dict)

    def record(self, role: str, x: np.ndarray) -> None:
        self.layer_inputs.setdefault(role, []).append(x)


@lru_cache(maxsize=64)
def _mask(height: int, width: int, window_size: int, shift: int) -> np.ndarray:
    m = shifted_window_mask(height, width, window_size, shift)
    m.setflags(write=False)
    return m


def branch_forward(
    tokens: np.ndarray,
    mask: np.ndarray | None,
    params: TwoBranchBlockParams,
    branch: Branch,
    trace: BlockTrace | None = None,
) -> np.ndarray:
    """Run the block on a window batch ``[n, P*P, C]`` in one precision."""

    def apply(role: str, x: np.ndarray) -> np.ndarray:
        if trace is not None:
            trace.record(role, x)
        return params.layer(role)(x, branch)

    ln1, ln2 = params.norms(branch)
    ctx = attention_context(apply("qkv", layer_norm(tokens, ln1)), params.heads, mask)
    x = tokens + apply("proj", ctx)
    hidden = gelu(apply("fc1", layer_norm(x, ln2)))
    return x + apply("fc2", hidden)


def _windows(fm: FeatureMap, params: TwoBranchBlockParams) -> tuple[int, WindowSet, np.ndarray | None]:
    if fm.channels != params.channels:
        raise ConfigurationError(f"block expects {params.channels} channels, got {fm.channels}")
    shift = params.shift_for(fm.height, fm.width)
    ws = partition(cyclic_shift(fm, -shift), params.window_size)
    mask = _mask(fm.height, fm.width, params.window_size, shift) if shift else None
    return shift, ws, mask


def _reassemble(fm: FeatureMap, ws: WindowSet, tokens: np.ndarray, shift: int) -> FeatureMap:
    out = scatter(WindowSet(ws.window_size, tokens, ws.origins), fm.height, fm.width)
    return cyclic_shift(out, shift)


def single_branch_forward(
    fm: FeatureMap,
    params: TwoBranchBlockParams,
    branch: Branch = Branch.HIGH,
    trace: BlockTrace | None = None,
) -> FeatureMap:
    """Every window through one branch; the uniform-precision reference block."""
    shift, ws, mask = _windows(fm, params)
    return _reassemble(fm, ws, branch_forward(ws.tokens, mask, params, branch, trace), shift)


def two_branch_forward(
    fm: FeatureMap,
    scores: ImportanceScores,
    r: float,
    p: float,
    params: TwoBranchBlockParams,
    reversed: bool | None = None,
    trace: BlockTrace | None = None,
) -> FeatureMap:
    shift, ws, mask = _windows(fm, params)
    if len(scores) != ws.n_win:
        raise ConfigurationError(f"{len(scores)} scores for {ws.n_win} windows")
    assignment = select_windows(scores, r, p, reversed)
    if trace is not None:
        trace.assignment = assignment
    out = ws.tokens.copy()  # pruned windows keep their input tokens
    for branch, idx in ((Branch.HIGH, assignment.high_idx), (Branch.LOW, assignment.low_idx)):
        if not idx:
            continue
        sel = np.asarray(idx)
        out[sel] = branch_forward(ws.tokens[sel], None if mask is None else mask[sel], params, branch)
    return _reassemble(fm, ws, out, shift)
