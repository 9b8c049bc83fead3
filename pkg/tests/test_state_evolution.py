import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lossy_consensus.graph import generate_rgg_torus, max_degree_weights
from lossy_consensus.state_evolution import (
    DistortionSchedule,
    InfeasibleError,
    StateStats,
    centering,
    error_stats,
    error_trajectory,
    evolve_covariance,
    evolve_mean,
    lossless_mse,
    lossless_mse_trajectory,
    min_iterations,
    node_variance,
    signal_plus_noise_cov,
    state_stats,
)


def test_mean_examples(pair):
    W, _, _ = pair
    np.testing.assert_allclose(evolve_mean(W, [1.0, 0.0], 0), [1, 0])
    np.testing.assert_allclose(evolve_mean(W, [1.0, 0.0], 1), [0.1, 0.9])
    np.testing.assert_allclose(evolve_mean(W, [3.0, 3.0], 7), [3, 3])


def test_mean_dimension_mismatch(pair):
    with pytest.raises(ValueError):
        evolve_mean(pair[0], [1.0, 2.0, 3.0], 1)


def test_lossless_covariance_is_power_form(rgg20):
    _, W, _, cov0 = rgg20
    P = np.linalg.matrix_power(W, 4)
    np.testing.assert_allclose(evolve_covariance(W, cov0, None, 4), P @ cov0 @ P.T, atol=1e-12)


def test_pure_noise_variance_limit(rgg20):
    _, W, mean0, _ = rgg20
    cov0 = 0.5 * np.eye(20)
    st_ = state_stats(W, mean0, cov0, None, 400)
    for i in range(20):
        assert node_variance(st_, i) == pytest.approx(0.5 / 20, rel=1e-6)


def test_pair_distortion_trace(pair):
    # W - I = -1.8 (I - avg) on this graph, so the added covariance is 3.24 D (I - avg)
    W, _, cov0 = pair
    D = 0.37
    c1 = evolve_covariance(W, cov0, DistortionSchedule.constant([D]), 1)
    c0 = evolve_covariance(W, cov0, None, 1)
    assert np.trace(c1 - c0) == pytest.approx(3.24 * D)


def test_pair_lossless_sequence(pair):
    W, mean0, cov0 = pair
    np.testing.assert_allclose(lossless_mse_trajectory(W, mean0, cov0, 3), [0.25, 0.16, 0.1024, 0.065536])


def test_initial_mse_signal_plus_noise(rgg20):
    _, W, mean0, cov0 = rgg20
    assert lossless_mse(W, mean0, cov0, 0) == pytest.approx(0.475)


def test_exact_averaging_in_one_step():
    m = 6
    W = np.full((m, m), 1 / m)
    cov0 = signal_plus_noise_cov(m, 1.0, 2.0)
    assert error_stats(W, np.arange(m, dtype=float), cov0, None, 1).network_mse == pytest.approx(0, abs=1e-14)


def test_node_variance_basics():
    s = StateStats(0, np.zeros(3), np.eye(3))
    assert [node_variance(s, i) for i in range(3)] == [1, 1, 1]
    s = StateStats(0, np.zeros(3), signal_plus_noise_cov(3, 1.0, 0.5))
    assert node_variance(s, 2) == 1.5
    with pytest.raises(IndexError):
        node_variance(s, 3)


def test_lossless_mse_monotone(rgg20):
    _, W, mean0, cov0 = rgg20
    traj = lossless_mse_trajectory(W, mean0, cov0, 30)
    assert np.all(np.diff(traj) <= 1e-15)


def test_min_iterations(pair):
    W, mean0, cov0 = pair
    assert min_iterations(W, mean0, cov0, 0.3, 10) == 0
    assert min_iterations(W, mean0, cov0, 0.2, 10) == 1
    # the error MSE decays geometrically, so only a tiny target outlasts the horizon
    with pytest.raises(InfeasibleError) as exc:
        min_iterations(W, mean0, cov0, 1e-30, 5)
    assert exc.value.floor == pytest.approx(0.25 * 0.64**5)


def test_horizon_and_distortion_checks(pair):
    W, mean0, cov0 = pair
    with pytest.raises(ValueError):
        evolve_covariance(W, cov0, DistortionSchedule.constant([0.1]), 2)
    with pytest.raises(ValueError):
        DistortionSchedule.constant([0.1, 0.0])


def test_projector():
    C = centering(7)
    np.testing.assert_allclose(C @ C, C, atol=1e-15)
    assert np.max(np.abs(C @ np.ones(7))) < 1e-12


def _random_instance(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(2, 12))
    topo = generate_rgg_torus(m, 0.5, seed, require_connected=True)
    W = max_degree_weights(topo).W
    A = rng.normal(size=(m, m))
    return rng, m, W, rng.normal(size=m), A @ A.T + 0.1 * np.eye(m)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_error_stats_invariants(seed):
    rng, m, W, mean0, cov0 = _random_instance(seed)
    T = int(rng.integers(1, 6))
    D = DistortionSchedule.variable(rng.uniform(0.01, 1, (T, m)))
    for e in error_trajectory(W, mean0, cov0, D, T):
        assert e.network_mse == pytest.approx(e.node_mse.mean(), abs=1e-12)
        tr = np.trace(e.cov_e + np.outer(e.mean_e, e.mean_e)) / m
        assert e.network_mse == pytest.approx(tr, rel=1e-12)
        assert np.all(e.node_mse >= 0)
    cov = evolve_covariance(W, cov0, D, T)
    assert np.allclose(cov, cov.T, atol=1e-10)
    assert np.linalg.eigvalsh(cov).min() >= -1e-10


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_mse_monotone_and_affine_in_distortion(seed):
    rng, m, W, mean0, cov0 = _random_instance(seed)
    T = int(rng.integers(1, 5))
    D1 = rng.uniform(0.01, 1, (T, m))
    D2 = D1 + rng.uniform(0, 1, (T, m))
    mse = lambda D: error_stats(W, mean0, cov0, DistortionSchedule.variable(D), T).node_mse
    assert np.all(mse(D2) >= mse(D1) - 1e-12)
    # affine along any coordinate, with nonnegative slope
    s, k = int(rng.integers(T)), int(rng.integers(m))
    E = np.zeros((T, m))
    E[s, k] = 1.0
    a, b, c = mse(D1), mse(D1 + E), mse(D1 + 2 * E)
    np.testing.assert_allclose(c - b, b - a, atol=1e-10)
    assert np.all(b - a >= -1e-12)
