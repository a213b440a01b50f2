"""Per-window mixed-precision activation quantization for a toy Swin-style backbone."""
from .backbone import ModelSpec, QuantBits, StageSpec, build_model, forward_float, forward_mixed, forward_uniform
from .compression import CompressionConfig, Mode
from .cost import CostModel, CostReport, equivalent_act_bits, swin_tiny_cost_model, toy_cost_model, total_bops
from .errors import (
    CalibrationError,
    ConfigurationError,
    InvariantError,
    SamplingError,
    UndefinedSignalError,
    WinQuantError,
)
from .numerics import FeatureMap
from .quantization import QuantParams, calibrate_minmax, fake_quantize, sqnr_db
from .sampling import SamplerConfig, lrm_round, naive_uniform_sample, uniform_sum_sample
from .search import ParetoPoint, hypervolume, nsga2_search, pareto_filter

__all__ = [
    "CalibrationError",
    "CompressionConfig",
    "ConfigurationError",
    "CostModel",
    "CostReport",
    "FeatureMap",
    "InvariantError",
    "Mode",
    "ModelSpec",
    "ParetoPoint",
    "QuantBits",
    "QuantParams",
    "SamplerConfig",
    "SamplingError",
    "StageSpec",
    "UndefinedSignalError",
    "WinQuantError",
    "build_model",
    "calibrate_minmax",
    "equivalent_act_bits",
    "fake_quantize",
    "forward_float",
    "forward_mixed",
    "forward_uniform",
    "hypervolume",
    "lrm_round",
    "naive_uniform_sample",
    "nsga2_search",
    "pareto_filter",
    "sqnr_db",
    "swin_tiny_cost_model",
    "total_bops",
    "toy_cost_model",
    "uniform_sum_sample",
]
