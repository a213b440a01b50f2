import pytest
from hypothesis import given
from hypothesis import strategies as st

from winquant.compression import RATIO_GRID, CompressionConfig, Mode, ratio_to_code
from winquant.errors import ConfigurationError


def test_grid():
    assert RATIO_GRID == (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8)


def test_snapping_and_validation():
    cfg = CompressionConfig((0.1 + 0.2, 0.8))
    assert cfg.ratios == (0.3, 0.8) and cfg.pruning == (0.0, 0.0)
    for bad in ((0.9,), (0.25,), (-0.1,)):
        with pytest.raises(ConfigurationError):
            CompressionConfig(bad)
    with pytest.raises(ConfigurationError):
        CompressionConfig((0.8,), (0.3,))
    with pytest.raises(ConfigurationError):
        CompressionConfig((0.1, 0.2), (0.1,))


def test_from_mode():
    assert CompressionConfig.from_mode([0.4], "prune").key == ((0,), (4,))
    assert CompressionConfig.from_mode([0.4], Mode.MIXAQ_PRUNE, [0.5]).key == ((4,), (5,))
    with pytest.raises(ConfigurationError):
        CompressionConfig.from_mode([0.4], Mode.MIXAQ, [0.5])


@given(st.lists(st.integers(0, 8), min_size=1, max_size=8))
def test_code_round_trip(codes):
    cfg = CompressionConfig.from_codes(codes)
    assert list(cfg.ratio_codes) == codes
    assert [ratio_to_code(v) for v in cfg.ratios] == codes
    assert CompressionConfig(**cfg.to_dict()) == cfg
