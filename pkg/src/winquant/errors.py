"""Exception hierarchy shared by every module."""


class WinQuantError(Exception):
    """Base class for all package errors."""


class ConfigurationError(WinQuantError, ValueError):
    """Invalid shapes, ratios, bit widths or config files."""


class CalibrationError(WinQuantError, ValueError):
    pass


class UndefinedSignalError(WinQuantError, ValueError):
    """SQNR requested against an all-zero reference."""


class SamplingError(WinQuantError, RuntimeError):
    """Rejection sampling gave up; the sampler config is infeasible."""


class InvariantError(WinQuantError, AssertionError):
    """An internal invariant was violated (a bug, not bad input)."""
