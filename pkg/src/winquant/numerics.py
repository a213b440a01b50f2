"""Dense float64 building blocks: feature maps, linear maps, layer norm and
window multi-head attention.

All window-batched operations act on arrays shaped ``[n_win, tokens, C]``.
numpy's stacked matmul evaluates each window slice independently, so a
window's result does not depend on which other windows share the batch.
The two-branch block relies on that to split and re-join windows bitwise.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

MASK_VALUE = -1e9


@dataclass(frozen=True)
class FeatureMap:
    """Activation grid of ``height x width`` patches with ``channels`` features."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3:
            raise ConfigurationError(f"feature map must be 3-D (H, W, C), got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ConfigurationError("feature map contains non-finite values")
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    def __eq__(self, other):
        if not isinstance(other, FeatureMap):
            return NotImplemented
        return self.data.shape == other.data.shape and np.array_equal(self.data, other.data)

    __hash__ = None


@dataclass(frozen=True)
class LinearWeights:
    """Affine map ``y = x @ matrix.T + bias``; ``matrix`` is ``[out_dim, in_dim]``."""

    matrix: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=np.float64)
        bias = np.asarray(self.bias, dtype=np.float64)
        if matrix.ndim != 2 or bias.shape != (matrix.shape[0],):
            raise ConfigurationError(
                f"inconsistent linear weights: matrix {matrix.shape}, bias {bias.shape}"
            )
        if not (np.all(np.isfinite(matrix)) and np.all(np.isfinite(bias))):
            raise ConfigurationError("linear weights contain non-finite values")
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "bias", bias)

    @property
    def in_dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def out_dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class LayerNormParams:
    gamma: np.ndarray
    beta: np.ndarray
    epsilon: float = 1e-5

    def __post_init__(self):
        gamma = np.asarray(self.gamma, dtype=np.float64)
        beta = np.asarray(self.beta, dtype=np.float64)
        if gamma.ndim != 1 or gamma.shape != beta.shape:
            raise ConfigurationError("layer norm gamma/beta must be vectors of equal length")
        if not self.epsilon > 0:
            raise ConfigurationError("layer norm epsilon must be positive")
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "beta", beta)

    @classmethod
    def identity(cls, channels: int, epsilon: float = 1e-5) -> "LayerNormParams":
        return cls(np.ones(channels), np.zeros(channels), epsilon)

    @property
    def channels(self) -> int:
        return self.gamma.shape[0]


def linear(x: np.ndarray, w: LinearWeights) -> np.ndarray:
    """Apply ``w`` along the last axis of ``x``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != w.in_dim:
        raise ConfigurationError(f"linear expects last dim {w.in_dim}, got {x.shape[-1]}")
    return x @ w.matrix.T + w.bias


def layer_norm(x: np.ndarray, p: LayerNormParams) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != p.channels:
        raise ConfigurationError(f"layer norm expects {p.channels} channels, got {x.shape[-1]}")
    mean = x.mean(axis=-1, keepdims=True)
    centered = x - mean
    var = (centered * centered).mean(axis=-1, keepdims=True)
    return centered / np.sqrt(var + p.epsilon) * p.gamma + p.beta


_GELU_C = float(np.sqrt(2.0 / np.pi))


def gelu(x: np.ndarray) -> np.ndarray:
    """GELU, tanh form."""
    t = x * x
    t *= 0.044715 * _GELU_C
    t += _GELU_C
    t *= x
    np.tanh(t, out=t)
    t += 1.0
    t *= x
    t *= 0.5
    return t


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _split_heads(t: np.ndarray, heads: int) -> np.ndarray:
    n, tokens, c = t.shape
    return t.reshape(n, tokens, heads, c // heads).transpose(0, 2, 1, 3)


def attention_weights(q: np.ndarray, k: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """Softmax attention matrix for per-head queries/keys ``[n, heads, T, d]``.

    ``mask`` is additive, shaped ``[T, T]`` or ``[n, T, T]``.
    """
    scale = 1.0 / np.sqrt(q.shape[-1])
    logits = (q @ k.transpose(0, 1, 3, 2)) * scale
    if mask is not None:
        mask = np.asarray(mask, dtype=np.float64)
        if mask.ndim == 2:
            logits = logits + mask
        else:
            logits = logits + mask[:, None, :, :]
    return softmax(logits)


def attention_context(qkv_out: np.ndarray, heads: int, mask: np.ndarray | None = None) -> np.ndarray:
    """Mix values by masked softmax attention; input is the packed ``[q|k|v]`` projection.

    Returns the per-token context ``[n, T, C]`` that feeds the output projection.
    """
    n, tokens, c3 = qkv_out.shape
    c = c3 // 3
    if c3 != 3 * c or c % heads:
        raise ConfigurationError(f"{heads} heads do not divide {c} channels")
    q = _split_heads(qkv_out[..., :c], heads)
    k = _split_heads(qkv_out[..., c : 2 * c], heads)
    v = _split_heads(qkv_out[..., 2 * c :], heads)
    ctx = attention_weights(q, k, mask) @ v
    return ctx.transpose(0, 2, 1, 3).reshape(n, tokens, c)


def window_attention(
    windows: np.ndarray,
    qkv: LinearWeights,
    proj: LinearWeights,
    heads: int,
    mask: np.ndarray | None = None,
) -> np.ndarray:
    """Per-window multi-head self-attention followed by the output projection."""
    windows = np.asarray(windows, dtype=np.float64)
    if windows.ndim != 3:
        raise ConfigurationError("windows must be shaped [n_win, tokens, C]")
    c = windows.shape[-1]
    if heads < 1 or c % heads:
        raise ConfigurationError(f"{heads} heads do not divide {c} channels")
    if qkv.out_dim != 3 * c:
        raise ConfigurationError(f"qkv projection must output {3 * c} features")
    return linear(attention_context(linear(windows, qkv), heads, mask), proj)
