import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lossy_consensus.quantizers import (
    UniformQuantizer,
    dithered_quantize,
    ecsq_quantizer_for,
    empirical_entropy_rate,
    fixed_rate_quantizer_for,
    quantize,
)
from lossy_consensus.rd_models import RdModel, distortion_for_rate
from lossy_consensus.rng import stream


def test_midtread_examples():
    q = UniformQuantizer(0.5)
    assert quantize(q, 0.6) == 0.5
    assert quantize(q, 0.0) == 0.0
    assert quantize(q, 0.25) == 0.5 and quantize(q, -0.25) == -0.5


def test_midrise_saturation():
    q = UniformQuantizer(1.0, levels=4, style="mid-rise")
    assert quantize(q, 10.0) == 1.5
    assert quantize(q, -10.0) == -1.5
    np.testing.assert_allclose(quantize(q, np.array([-1.2, -0.2, 0.2, 1.2])), [-1.5, -0.5, 0.5, 1.5])


def test_level_parity():
    with pytest.raises(ValueError):
        UniformQuantizer(1.0, levels=3, style="mid-rise")
    with pytest.raises(ValueError):
        UniformQuantizer(1.0, levels=4, style="mid-tread")
    with pytest.raises(ValueError):
        UniformQuantizer(0.0)


@given(st.floats(-50, 50), st.floats(0.01, 5))
def test_error_within_half_bin(x, b):
    assert abs(quantize(UniformQuantizer(b), x) - x) <= b / 2 + 1e-12


@given(st.floats(-1e3, 1e3), st.integers(1, 6))
def test_bounded_output(x, half):
    q = UniformQuantizer(0.3, levels=2 * half, style="mid-rise")
    assert abs(quantize(q, x)) <= q.max_level + 1e-12


def test_fixed_rate_examples():
    q = fixed_rate_quantizer_for(1.0, 4)
    assert q.bin_size == pytest.approx(0.75) and q.levels == 16
    q = fixed_rate_quantizer_for(4.0, 1)
    assert q.bin_size == pytest.approx(12.0)
    assert sorted(np.unique(quantize(q, np.linspace(-20, 20, 101)))) == [-6.0, 6.0]
    with pytest.raises(ValueError):
        fixed_rate_quantizer_for(1.0, 0)


def test_fixed_rate_distortion_matches_model():
    for var, R in [(1.0, 3), (2.5, 5), (0.3, 1)]:
        q = fixed_rate_quantizer_for(var, R)
        assert q.bin_size**2 / 12 == pytest.approx(distortion_for_rate(RdModel.dithered_uniform(), var, R), rel=1e-12)


def test_dither_vanishing_bin():
    x = np.linspace(-3, 3, 50)
    rec, _ = dithered_quantize(UniformQuantizer(1e-9, dithered=True), x, stream(0, 1))
    np.testing.assert_allclose(rec, x, atol=1e-9)


def test_dither_moments():
    rng = np.random.default_rng(0)
    x = rng.normal(size=1_000_000)
    b = 0.25
    rec, _ = dithered_quantize(UniformQuantizer(b, dithered=True), x, stream(7, 3))
    e = rec - x
    assert abs(e.mean()) < 0.001
    assert e.var() == pytest.approx(b * b / 12, rel=0.01)
    assert abs(np.corrcoef(x, e)[0, 1]) < 0.005


def test_dither_errors_uncorrelated_across_draws():
    x = np.random.default_rng(1).normal(size=1_000_000)
    q = UniformQuantizer(0.8, dithered=True)
    e1 = dithered_quantize(q, x, stream(1, 0))[0] - x
    e2 = dithered_quantize(q, x, stream(1, 1))[0] - x
    assert abs(np.corrcoef(e1, e2)[0, 1]) < 0.005
    assert abs(np.corrcoef(e1[:-1], e1[1:])[0, 1]) < 0.005


def test_ecsq_quantizer():
    q = ecsq_quantizer_for(0.01)
    assert q.levels is None and q.style == "mid-tread" and q.dithered
    assert q.bin_size == pytest.approx(math.sqrt(0.12))


def test_entropy_examples():
    assert empirical_entropy_rate([3, 3, 3]) == 0.0
    assert empirical_entropy_rate([0, 1] * 50) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        empirical_entropy_rate([])


def test_entropy_of_quantized_gaussian():
    # oracle: -sum p log2 p with p from Gaussian cell probabilities
    x = np.random.default_rng(2).normal(size=1_000_000)
    idx = UniformQuantizer(0.5).index(x)
    assert empirical_entropy_rate(idx) == pytest.approx(3.0619692493630026, abs=0.01)


@given(st.lists(st.integers(-5, 5), min_size=1, max_size=200))
def test_entropy_bounded_by_alphabet(v):
    assert empirical_entropy_rate(v) <= math.log2(len(set(v))) + 1e-12
