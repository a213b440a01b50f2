"""Per-block-pair compression/pruning ratios on the 10% grid."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

from .errors import ConfigurationError

GRID_STEPS = 10  # ratios are multiples of 1/10
MAX_CODE = 8  # ... and at most 0.8
RATIO_GRID = tuple(k / GRID_STEPS for k in range(MAX_CODE + 1))


class Mode(str, enum.Enum):
    MIXAQ = "mixaq"
    PRUNE = "prune"
    MIXAQ_PRUNE = "mixaq+prune"


def ratio_to_code(value: float) -> int:
    code = round(float(value) * GRID_STEPS)
    if abs(code - float(value) * GRID_STEPS) > 1e-6 or not 0 <= code <= MAX_CODE:
        raise ConfigurationError(f"ratio {value} is not on the grid {RATIO_GRID}")
    return int(code)


@dataclass(frozen=True)
class CompressionConfig:
    """``ratios[i]``: share of pair ``i``'s windows sent to the low branch;
    ``pruning[i]``: share of its windows skipped entirely.

    Values are snapped to exact ``k / 10`` floats on construction.
    """

    ratios: tuple[float, ...]
    pruning: tuple[float, ...] | None = None

    def __post_init__(self):
        r_codes = tuple(ratio_to_code(v) for v in self.ratios)
        p_src = self.pruning if self.pruning is not None else (0.0,) * len(r_codes)
        p_codes = tuple(ratio_to_code(v) for v in p_src)
        if len(p_codes) != len(r_codes):
            raise ConfigurationError("ratios and pruning ratios differ in length")
        for r, p in zip(r_codes, p_codes):
            if r + p > GRID_STEPS:
                raise ConfigurationError(f"compression {r / 10} + pruning {p / 10} exceeds 1")
        object.__setattr__(self, "ratios", tuple(c / GRID_STEPS for c in r_codes))
        object.__setattr__(self, "pruning", tuple(c / GRID_STEPS for c in p_codes))

    def __len__(self):
        return len(self.ratios)

    @classmethod
    def zeros(cls, n: int) -> "CompressionConfig":
        return cls((0.0,) * n)

    @classmethod
    def from_codes(cls, r_codes: Sequence[int], p_codes: Sequence[int] | None = None) -> "CompressionConfig":
        p = None if p_codes is None else tuple(c / GRID_STEPS for c in p_codes)
        return cls(tuple(c / GRID_STEPS for c in r_codes), p)

    @classmethod
    def from_mode(
        cls, values: Sequence[float], mode: Mode | str, pruning: Sequence[float] | None = None
    ) -> "CompressionConfig":
        """Interpret a ratio vector the way a method does: as compression
        ratios (``mixaq``), as pruning ratios (``prune``) or both."""
        mode = Mode(mode)
        values = tuple(values)
        if mode is Mode.PRUNE:
            if pruning is not None and any(pruning):
                raise ConfigurationError("prune mode takes a single ratio vector")
            return cls((0.0,) * len(values), values)
        if mode is Mode.MIXAQ and pruning is not None and any(pruning):
            raise ConfigurationError("pruning ratios require mode mixaq+prune")
        return cls(values, pruning)

    @property
    def ratio_codes(self) -> tuple[int, ...]:
        return tuple(round(v * GRID_STEPS) for v in self.ratios)

    @property
    def pruning_codes(self) -> tuple[int, ...]:
        return tuple(round(v * GRID_STEPS) for v in self.pruning)

    @property
    def key(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        return self.ratio_codes, self.pruning_codes

    def to_dict(self) -> dict:
        return {"ratios": list(self.ratios), "pruning": list(self.pruning)}
