import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lossy_consensus.graph import (
    GraphError,
    Topology,
    generate_rgg_torus,
    is_connected,
    max_degree_weights,
    metropolis_weights,
    pairwise_torus_distances,
    torus_distance,
)

from conftest import path3


def test_single_node_has_no_edges():
    t = generate_rgg_torus(1, 0.3, 0)
    assert t.edges == [] and t.degrees.tolist() == [0]
    assert is_connected(t)


def test_diameter_radius_gives_complete_graph():
    t = generate_rgg_torus(5, np.sqrt(2) / 2, 3)
    assert t.degrees.tolist() == [4] * 5
    assert is_connected(t)


def test_zero_nodes_rejected():
    with pytest.raises(GraphError):
        generate_rgg_torus(0, 0.3, 0)


def test_mean_degree_matches_disc_area():
    # oracle: (m-1) * pi * rho^2 for a disc on the torus, averaged over seeds
    degs = [generate_rgg_torus(100, 0.2, s).degrees.mean() for s in range(1000)]
    assert abs(np.mean(degs) - 99 * np.pi * 0.04) < 0.5


def test_adjacency_matches_torus_distance():
    t = generate_rgg_torus(30, 0.3, 11)
    d = pairwise_torus_distances(t.positions)
    expect = d <= 0.3
    np.fill_diagonal(expect, False)
    assert np.array_equal(t.adjacency, expect)
    assert np.array_equal(t.adjacency, t.adjacency.T)
    assert np.array_equal(t.degrees, t.adjacency.sum(axis=1))


def test_same_seed_is_bit_identical():
    a = generate_rgg_torus(20, 0.35, 42, require_connected=True)
    b = generate_rgg_torus(20, 0.35, 42, require_connected=True)
    assert a.positions.tobytes() == b.positions.tobytes()
    assert np.array_equal(a.adjacency, b.adjacency)


def test_require_connected_redraws():
    seeds = [s for s in range(200) if not is_connected(generate_rgg_torus(20, 0.25, s))]
    assert seeds, "expected some disconnected draws at this radius"
    assert is_connected(generate_rgg_torus(20, 0.25, seeds[0], require_connected=True))


def test_disconnected_pair():
    t = Topology.from_edges(2, [])
    assert not is_connected(t)
    with pytest.raises(GraphError):
        max_degree_weights(t)
    with pytest.raises(GraphError):
        metropolis_weights(t)


def test_max_degree_path():
    w = max_degree_weights(path3())
    assert w.alpha == pytest.approx(0.45)
    np.testing.assert_allclose(w.W, [[0.55, 0.45, 0], [0.45, 0.10, 0.45], [0, 0.45, 0.55]], atol=1e-15)


def test_max_degree_pair():
    w = max_degree_weights(Topology.from_edges(2, [(0, 1)]))
    np.testing.assert_allclose(w.W, [[0.1, 0.9], [0.9, 0.1]], atol=1e-15)


def test_metropolis_examples():
    np.testing.assert_allclose(metropolis_weights(Topology.from_edges(2, [(0, 1)])).W, [[0.5, 0.5], [0.5, 0.5]])
    W = metropolis_weights(path3()).W
    assert W[0, 1] == pytest.approx(1 / 3) and W[1, 2] == pytest.approx(1 / 3)
    assert W[0, 0] == pytest.approx(2 / 3) and W[1, 1] == pytest.approx(1 / 3)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 30), st.floats(0.25, 0.7), st.integers(0, 10_000), st.sampled_from(["max-degree", "metropolis"]))
def test_weights_doubly_stochastic_and_contracting(m, rho, seed, scheme):
    t = generate_rgg_torus(m, rho, seed, require_connected=True)
    wm = max_degree_weights(t) if scheme == "max-degree" else metropolis_weights(t)
    W = wm.W
    one = np.ones(m)
    assert np.max(np.abs(W @ one - one)) < 1e-12
    assert np.max(np.abs(one @ W - one)) < 1e-12
    assert np.allclose(W, W.T, atol=1e-12)
    assert wm.second_largest_modulus() < 1


@settings(max_examples=100)
@given(*[st.tuples(st.floats(0, 1, exclude_max=True), st.floats(0, 1, exclude_max=True)) for _ in range(3)])
def test_torus_distance_is_metric(u, v, w):
    u, v, w = map(np.array, (u, v, w))
    assert torus_distance(u, u) == 0
    assert torus_distance(u, v) == pytest.approx(torus_distance(v, u))
    assert torus_distance(u, w) <= torus_distance(u, v) + torus_distance(v, w) + 1e-12
    assert torus_distance(u, v) <= np.sqrt(2) / 2 + 1e-12
