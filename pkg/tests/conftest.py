import numpy as np
import pytest

from lossy_consensus.graph import Topology, generate_rgg_torus, max_degree_weights
from lossy_consensus.state_evolution import signal_plus_noise_cov


@pytest.fixture
def pair():
    """Complete graph on two nodes with sigma_x^2 = 1, sigma_n^2 = 0.5."""
    topo = Topology.from_edges(2, [(0, 1)])
    W = max_degree_weights(topo).W
    return W, np.zeros(2), signal_plus_noise_cov(2, 1.0, 0.5)


@pytest.fixture(scope="session")
def rgg20():
    topo = generate_rgg_torus(20, 0.35, 0, require_connected=True)
    W = max_degree_weights(topo).W
    return topo, W, np.zeros(20), signal_plus_noise_cov(20, 1.0, 0.5)


def path3():
    return Topology.from_edges(3, [(0, 1), (1, 2)])
