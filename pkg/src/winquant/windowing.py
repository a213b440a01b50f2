"""Window partition/scatter, cyclic shift, L2 importance and window selection."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InvariantError
from .numerics import MASK_VALUE, FeatureMap

# tolerance absorbing float error in ratio * n_win before flooring (0.29 * 100 -> 28.999...)
_COUNT_EPS = 1e-9


@dataclass(frozen=True)
class WindowSet:
    """Non-overlapping ``P x P`` windows of a feature map, in row-major window order."""

    window_size: int
    tokens: np.ndarray  # [n_win, P*P, C]
    origins: tuple[tuple[int, int], ...]  # top-left patch (row, col) of each window

    @property
    def n_win(self) -> int:
        return self.tokens.shape[0]

    @property
    def channels(self) -> int:
        return self.tokens.shape[2]

    def subset(self, idx) -> "WindowSet":
        idx = np.asarray(idx, dtype=np.int64)
        return WindowSet(self.window_size, self.tokens[idx], tuple(self.origins[i] for i in idx))


@dataclass(frozen=True)
class ImportanceScores:
    scores: np.ndarray
    reversed: bool = False

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        if scores.ndim != 1 or not np.all(np.isfinite(scores)) or np.any(scores < 0):
            raise ConfigurationError("importance scores must be a finite non-negative vector")
        object.__setattr__(self, "scores", scores)

    def __len__(self):
        return self.scores.shape[0]


@dataclass(frozen=True)
class WindowAssignment:
    high_idx: tuple[int, ...]
    low_idx: tuple[int, ...]
    pruned_idx: tuple[int, ...]

    @property
    def n_win(self) -> int:
        return len(self.high_idx) + len(self.low_idx) + len(self.pruned_idx)

    def labels(self) -> list[str]:
        out = [""] * self.n_win
        for name, idx in (("high", self.high_idx), ("low", self.low_idx), ("pruned", self.pruned_idx)):
            for i in idx:
                out[i] = name
        return out


def _check_divisible(height: int, width: int, window_size: int) -> None:
    if window_size < 1 or height % window_size or width % window_size:
        raise ConfigurationError(
            f"feature map {height}x{width} is not divisible into {window_size}x{window_size} windows"
        )


def partition(fm: FeatureMap, window_size: int) -> WindowSet:
    h, w, c = fm.shape
    p = window_size
    _check_divisible(h, w, p)
    tokens = (
        fm.data.reshape(h // p, p, w // p, p, c).transpose(0, 2, 1, 3, 4).reshape(-1, p * p, c).copy()
    )
    origins = tuple((i * p, j * p) for i in range(h // p) for j in range(w // p))
    return WindowSet(p, tokens, origins)


def scatter(ws: WindowSet, height: int, width: int) -> FeatureMap:
    """Reassemble windows by their origins (window order is irrelevant)."""
    p = ws.window_size
    _check_divisible(height, width, p)
    out = np.zeros((height, width, ws.channels))
    coverage = np.zeros((height // p, width // p), dtype=np.int64)
    for tokens, (r, c) in zip(ws.tokens, ws.origins):
        if r % p or c % p or not (0 <= r < height and 0 <= c < width):
            raise InvariantError(f"window origin {(r, c)} is off the {p}-patch grid")
        coverage[r // p, c // p] += 1
        out[r : r + p, c : c + p] = tokens.reshape(p, p, -1)
    if not np.all(coverage == 1):
        raise InvariantError("windows do not tile the feature map exactly once")
    return FeatureMap(out)


def cyclic_shift(fm: FeatureMap, offset: int) -> FeatureMap:
    """Roll the patch grid by ``(offset, offset)``; ``-offset`` undoes it."""
    if offset == 0:
        return fm
    return FeatureMap(np.roll(fm.data, shift=(offset, offset), axis=(0, 1)))


def shifted_window_mask(height: int, width: int, window_size: int, shift: int) -> np.ndarray:
    """Additive attention mask ``[n_win, P*P, P*P]`` for a grid rolled by ``-shift``.

    Tokens that come from different regions of the un-rolled map get
    ``MASK_VALUE``, so wrapped windows never mix disjoint areas.
    """
    p = window_size
    _check_divisible(height, width, p)
    region = np.zeros((height, width))
    label = 0
    for hs in (slice(0, -p), slice(-p, -shift), slice(-shift, None)):
        for wsl in (slice(0, -p), slice(-p, -shift), slice(-shift, None)):
            region[hs, wsl] = label
            label += 1
    ids = partition(FeatureMap(region[..., None]), p).tokens[..., 0]
    same = ids[:, :, None] == ids[:, None, :]
    return np.where(same, 0.0, MASK_VALUE)


def importance_scores(ws: WindowSet, reversed: bool = False) -> ImportanceScores:
    """L2 norm of each window's token values."""
    flat = ws.tokens.reshape(ws.n_win, -1)
    return ImportanceScores(np.sqrt(np.sum(flat * flat, axis=1)), reversed)


def window_ranking(scores: ImportanceScores | np.ndarray, reversed: bool | None = None) -> np.ndarray:
    """Window indices from most to least important.

    Ties: the smaller index ranks higher. ``reversed`` flips the whole list.
    """
    if not isinstance(scores, ImportanceScores):
        scores = ImportanceScores(scores)
    if reversed is None:
        reversed = scores.reversed
    s = scores.scores
    order = np.lexsort((np.arange(s.shape[0]), -s))
    return order[::-1] if reversed else order


def window_count(ratio: float, n_win: int) -> int:
    return int(math.floor(ratio * n_win + _COUNT_EPS))


def select_windows(
    scores: ImportanceScores | np.ndarray,
    r: float,
    p: float = 0.0,
    reversed: bool | None = None,
) -> WindowAssignment:
    """Split windows into high / low (compressed) / pruned sets.

    The lowest-ranked ``floor(p * n)`` windows are pruned, the next
    ``floor(r * n)`` go to the low branch, the rest stay high.
    """
    if not (0.0 <= r <= 1.0 and 0.0 <= p <= 1.0):
        raise ConfigurationError(f"ratios must lie in [0, 1], got r={r}, p={p}")
    if r + p > 1.0 + _COUNT_EPS:
        raise ConfigurationError(f"compression + pruning ratio exceeds 1 (r={r}, p={p})")
    order = window_ranking(scores, reversed)
    n = order.shape[0]
    n_pruned = window_count(p, n)
    n_low = window_count(r, n)
    n_high = n - n_low - n_pruned
    if n_high < 0:
        raise InvariantError("window counts exceed the number of windows")
    return WindowAssignment(
        high_idx=tuple(sorted(int(i) for i in order[:n_high])),
        low_idx=tuple(sorted(int(i) for i in order[n_high : n_high + n_low])),
        pruned_idx=tuple(sorted(int(i) for i in order[n_high + n_low :])),
    )
