"""Asymmetric per-tensor fake quantization, min/max calibration and SQNR."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CalibrationError, ConfigurationError, UndefinedSignalError

VALID_BITS = (2, 3, 4, 8, 32)
FLOAT_BITS = 32
DEGENERATE_STEP = 1e-8
SQNR_CAP_DB = 100.0


@dataclass(frozen=True)
class QuantParams:
    """Quantizer for one tensor role. ``bits == 32`` is a float pass-through."""

    bits: int
    step: float = 1.0
    zero_point: int = 0

    def __post_init__(self):
        if self.bits not in VALID_BITS:
            raise ConfigurationError(f"bits must be one of {VALID_BITS}, got {self.bits}")
        if not self.step > 0:
            raise ConfigurationError(f"step must be positive, got {self.step}")
        if self.bits != FLOAT_BITS and not 0 <= self.zero_point <= self.qmax:
            raise ConfigurationError(f"zero point {self.zero_point} outside [0, {self.qmax}]")

    @property
    def qmax(self) -> int:
        return (1 << self.bits) - 1

    @property
    def is_float(self) -> bool:
        return self.bits == FLOAT_BITS

    def grid(self) -> np.ndarray:
        """All representable dequantized values."""
        if self.is_float:
            raise ConfigurationError("a float pass-through has no finite grid")
        return self.step * (np.arange(self.qmax + 1, dtype=np.float64) - self.zero_point)

    def to_dict(self) -> dict:
        return {"bits": self.bits, "step": self.step, "zero_point": self.zero_point}


PASS_THROUGH = QuantParams(FLOAT_BITS)


@dataclass(frozen=True)
class BranchQuant:
    """Quantizers of one linear layer: its input in each branch, and its weights."""

    act_high: QuantParams
    act_low: QuantParams
    weight: QuantParams

    def __post_init__(self):
        if self.act_low.bits > self.act_high.bits:
            raise ConfigurationError("low-branch activation bits exceed high-branch bits")


_BELOW_HALF = float(np.nextafter(0.5, 0.0))


def round_half_away(v: np.ndarray) -> np.ndarray:
    """Round to nearest integer, halves away from zero (exact for |v| < 2**52).

    Adding the largest double below 0.5 lands exact halves on the next
    integer (by round-to-nearest of the sum) and keeps everything below a
    half under it; ``trunc`` then finishes.
    """
    v = np.asarray(v, dtype=np.float64)
    return np.trunc(v + np.copysign(_BELOW_HALF, v))


def fake_quantize(x: np.ndarray, q: QuantParams) -> np.ndarray:
    if q.is_float:
        return x
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0:
        return fake_quantize(x.reshape(1), q).reshape(())
    codes = round_half_away(x / q.step)
    codes += q.zero_point
    np.clip(codes, 0, q.qmax, out=codes)
    codes -= q.zero_point
    codes *= q.step
    return codes


def calibrate_minmax(samples: np.ndarray, bits: int) -> QuantParams:
    """Fit step and zero point to the range of ``samples``.

    The range is widened to contain 0 so that zero is always exactly
    representable. A range narrower than ``DEGENERATE_STEP`` yields
    ``step = DEGENERATE_STEP``.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size == 0:
        raise CalibrationError("cannot calibrate on an empty sample")
    if bits == FLOAT_BITS:
        return PASS_THROUGH
    qmax = (1 << bits) - 1
    lo = min(float(samples.min()), 0.0)
    hi = max(float(samples.max()), 0.0)
    step = (hi - lo) / qmax
    if step < DEGENERATE_STEP:
        return QuantParams(bits, DEGENERATE_STEP, 0)
    zero_point = int(np.clip(round_half_away(-lo / step), 0, qmax))
    return QuantParams(bits, step, zero_point)


def sqnr_db(reference: np.ndarray, approx: np.ndarray) -> float:
    """Signal-to-quantization-noise ratio in dB, capped at ``SQNR_CAP_DB``."""
    reference = np.asarray(reference, dtype=np.float64)
    approx = np.asarray(approx, dtype=np.float64)
    if reference.shape != approx.shape:
        raise ConfigurationError(f"shape mismatch {reference.shape} vs {approx.shape}")
    signal = float(np.sum(reference * reference))
    if signal == 0.0:
        raise UndefinedSignalError("reference signal is identically zero")
    diff = reference - approx
    noise = float(np.sum(diff * diff))
    if noise < 1e-20:
        return SQNR_CAP_DB
    return min(SQNR_CAP_DB, 10.0 * np.log10(signal / noise))
