import math

import numpy as np
import pytest

from lossy_consensus.rd_models import (
    RdModel,
    distortion_for_rate,
    dithered_uniform_distortion,
    ecsq_dmax_for_activity,
    midtread_distortion,
    rate_for_distortion,
)

MODELS = [RdModel.gaussian_vq(), RdModel.ecsq(), RdModel.dithered_uniform()]


def test_floor_constant():
    for m in MODELS:
        assert m.k == 2.0 ** (-2 * m.r_c)
    assert RdModel.gaussian_vq().d_max == 1.0
    assert RdModel.ecsq().r_c == 0.255


def test_gaussian_examples():
    g = RdModel.gaussian_vq()
    assert rate_for_distortion(g, 4.0, 1.0) == pytest.approx(1.0)
    assert rate_for_distortion(g, 2.5, 2.5) == 0.0
    assert rate_for_distortion(g, 2.5, 7.0) == 0.0
    assert distortion_for_rate(g, 3.0, 0.0) == pytest.approx(3.0)


def test_ecsq_example():
    assert rate_for_distortion(RdModel.ecsq(), 1.0, 0.25) == pytest.approx(1.255)


def test_dithered_uniform_example():
    assert distortion_for_rate(RdModel.dithered_uniform(12), 1.0, 4) == pytest.approx(0.046875)
    assert dithered_uniform_distortion(1.0, 4) == pytest.approx(0.046875)


def test_input_validation():
    g = RdModel.gaussian_vq()
    with pytest.raises(ValueError):
        rate_for_distortion(g, 1.0, 0.0)
    with pytest.raises(ValueError):
        rate_for_distortion(g, -1.0, 0.1)
    with pytest.raises(ValueError):
        distortion_for_rate(g, 0.0, 1.0)
    with pytest.raises(ValueError):
        RdModel.from_name("lloyd-max")


def test_from_name_aliases():
    assert RdModel.from_name("gauss-vq") == RdModel.gaussian_vq()
    assert RdModel.from_name("ecsq", dmax=0.97).d_max == 0.97
    assert RdModel.from_name("dithered-uniform", delta=8).delta == 8


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.kind)
def test_round_trip(model):
    rng = np.random.default_rng(5)
    var = rng.uniform(0.1, 10, 200)
    D = var * model.d_max * rng.uniform(1e-6, 0.999, 200)
    R = rate_for_distortion(model, var, D)
    np.testing.assert_allclose(distortion_for_rate(model, var, R), D, rtol=1e-10)
    R2 = rng.uniform(model.min_rate + 1e-3, 12, 200)
    np.testing.assert_allclose(rate_for_distortion(model, var, distortion_for_rate(model, var, R2)), R2, atol=1e-10)


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.kind)
def test_monotonicity(model):
    D = np.linspace(1e-3, 0.99 * model.d_max, 100)
    assert np.all(np.diff(rate_for_distortion(model, 1.0, D)) < 0)
    var = np.linspace(0.5, 5, 100)
    assert np.all(np.diff(rate_for_distortion(model, var, 0.01)) > 0)


def test_template_matches_native_forms():
    rng = np.random.default_rng(9)
    var = rng.uniform(0.1, 10, 100)
    R = rng.uniform(1, 10, 100)
    # dithered uniform: Delta^2 sigma^2 / 12 * 2^-2R
    np.testing.assert_allclose(distortion_for_rate(RdModel.dithered_uniform(), var, R), dithered_uniform_distortion(var, R), rtol=1e-10)
    # gaussian: sigma^2 2^-2R
    np.testing.assert_allclose(distortion_for_rate(RdModel.gaussian_vq(), var, R), var * 2.0 ** (-2 * R), rtol=1e-10)
    # ecsq: the Gaussian bound plus 0.255 bits
    D = var * 2.0 ** (-2 * R)
    np.testing.assert_allclose(rate_for_distortion(RdModel.ecsq(), var, D), R + 0.255, rtol=1e-10)


def test_midtread_distortion_fine_bin():
    assert midtread_distortion(1.0, 0.5) == pytest.approx(0.25 / 12, rel=1e-3)


def test_activity_cap():
    # oracle: Gaussian partial moments summed over cells, half-width Phi^-1(0.995)
    assert ecsq_dmax_for_activity(1.0, 0.01) == pytest.approx(0.9674292255566651, rel=1e-8)
    assert ecsq_dmax_for_activity(3.0, 0.01) == pytest.approx(3 * 0.9674292255566651, rel=1e-6)
    assert ecsq_dmax_for_activity(1.0, 0.999) < 1e-5
    with pytest.raises(ValueError):
        ecsq_dmax_for_activity(1.0, 1.0)


def test_activity_cap_binds_the_floor():
    cap = ecsq_dmax_for_activity(1.0, 0.01)
    m = RdModel.ecsq(d_max=cap)
    assert m.floor == pytest.approx(1 / cap)
    assert rate_for_distortion(m, 1.0, 5.0) == pytest.approx(0.5 * math.log2(1 / cap) + 0.255)
