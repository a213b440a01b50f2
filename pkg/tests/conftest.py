from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings

from winquant.backbone import ModelSpec, StageSpec, build_model, random_input
from winquant.block import QuantLinear, TwoBranchBlockParams
from winquant.numerics import FeatureMap, LayerNormParams, LinearWeights
from winquant.quantization import PASS_THROUGH, BranchQuant, QuantParams, calibrate_minmax

settings.register_profile("repo", deadline=None, max_examples=60, derandomize=True)
settings.load_profile("repo")

# Same topology as the default toy backbone with 4x4 windows and half the width.
SMALL_SPEC = ModelSpec(
    stages=(StageSpec(1, 16, 2), StageSpec(1, 32, 4), StageSpec(3, 64, 8), StageSpec(1, 128, 16)),
    window_size=4,
    input_shape=(32, 32, 16),
    seed=3,
)


@pytest.fixture(scope="session")
def small_spec() -> ModelSpec:
    return SMALL_SPEC


@pytest.fixture(scope="session")
def small_model():
    return build_model(SMALL_SPEC)


@pytest.fixture(scope="session")
def small_inputs():
    return [random_input(SMALL_SPEC, 500 + i) for i in range(4)]


def make_block(
    channels: int = 8,
    heads: int = 2,
    window_size: int = 2,
    shifted: bool = False,
    seed: int = 0,
    act_high: QuantParams | None = None,
    act_low: QuantParams | None = None,
    weight_bits: int = 4,
    low_norm_shift: float = 0.0,
) -> TwoBranchBlockParams:
    rng = np.random.default_rng(seed)

    def layer(i: int, o: int) -> QuantLinear:
        a = 1 / np.sqrt(i)
        w = LinearWeights(rng.uniform(-a, a, (o, i)), rng.uniform(-a, a, o))
        q = BranchQuant(act_high or PASS_THROUGH, act_low or PASS_THROUGH, calibrate_minmax(w.matrix, weight_bits))
        return QuantLinear.from_float(w, q)

    c = channels
    ln = LayerNormParams.identity(c)
    ln_low = LayerNormParams(np.ones(c) + low_norm_shift, np.zeros(c) + low_norm_shift)
    return TwoBranchBlockParams(
        ln1_high=ln,
        ln1_low=ln_low,
        ln2_high=ln,
        ln2_low=ln_low,
        qkv=layer(c, 3 * c),
        proj=layer(c, c),
        fc1=layer(c, 4 * c),
        fc2=layer(4 * c, c),
        heads=heads,
        window_size=window_size,
        shifted=shifted,
    )


def random_map(shape, seed: int = 0) -> FeatureMap:
    return FeatureMap(np.random.default_rng(seed).standard_normal(shape))


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance():
    """Record one verdict line per acceptance criterion."""

    def record(number: int, passed: bool, detail: str) -> None:
        ACCEPTANCE_LINES.append(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
