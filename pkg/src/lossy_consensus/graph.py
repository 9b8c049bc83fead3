"""Random geometric graphs on the unit torus and consensus weight matrices."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng

TORUS_DIAMETER = np.sqrt(2.0) / 2.0
MAX_REGENERATIONS = 1000


class GraphError(ValueError):
    """Invalid topology parameters or a graph unfit for consensus."""


@dataclass(frozen=True, eq=False)
class Topology:
    m: int
    rho_c: float
    positions: np.ndarray
    adjacency: np.ndarray
    seed: int | None = None

    @property
    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1).astype(int)

    @property
    def edges(self) -> list[tuple[int, int]]:
        i, j = np.nonzero(np.triu(self.adjacency, k=1))
        return [(int(a), int(b)) for a, b in zip(i, j)]

    @property
    def laplacian(self) -> np.ndarray:
        a = self.adjacency.astype(float)
        return np.diag(a.sum(axis=1)) - a

    @classmethod
    def from_edges(cls, m: int, edges, positions=None, rho_c: float = float("nan"), seed=None):
        if m < 1:
            raise GraphError("node count must be positive")
        adj = np.zeros((m, m), dtype=bool)
        for i, j in edges:
            if i == j:
                raise GraphError(f"self-loop at node {i}")
            adj[i, j] = adj[j, i] = True
        if positions is None:
            positions = np.full((m, 2), np.nan)
        return cls(m=m, rho_c=rho_c, positions=np.asarray(positions, dtype=float), adjacency=adj, seed=seed)


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    W: np.ndarray
    alpha: float = float("nan")
    scheme: str = field(default="custom")

    @property
    def m(self) -> int:
        return self.W.shape[0]

    def second_largest_modulus(self) -> float:
        """Largest eigenvalue modulus after removing the consensus eigenvalue 1."""
        ev = np.linalg.eigvalsh(self.W)
        ev = np.sort(ev)
        # the eigenvalue closest to 1 belongs to the constant eigenvector
        idx = int(np.argmin(np.abs(ev - 1.0)))
        rest = np.delete(ev, idx)
        return float(np.max(np.abs(rest))) if rest.size else 0.0


def torus_distance(u, v) -> np.ndarray:
    """Euclidean distance on the unit torus with per-coordinate wrap."""
    d = np.abs(np.asarray(u, dtype=float) - np.asarray(v, dtype=float))
    d = np.minimum(d, 1.0 - d)
    return np.sqrt(np.sum(d * d, axis=-1))


def pairwise_torus_distances(positions: np.ndarray) -> np.ndarray:
    return torus_distance(positions[:, None, :], positions[None, :, :])


def _draw(m: int, rho_c: float, seed: int, attempt: int) -> Topology:
    positions = _rng.stream(seed, _rng.ROLE_POSITIONS, attempt).random((m, 2))
    if rho_c >= TORUS_DIAMETER:
        adj = ~np.eye(m, dtype=bool)
    else:
        adj = pairwise_torus_distances(positions) <= rho_c
        np.fill_diagonal(adj, False)
    return Topology(m=m, rho_c=float(rho_c), positions=positions, adjacency=adj, seed=seed)


def generate_rgg_torus(m: int, rho_c: float, seed: int, *, require_connected: bool = False) -> Topology:
    """Random geometric graph with ``m`` uniform nodes on the unit torus.

    With ``require_connected`` a disconnected draw is rejected and redrawn on
    the next sub-stream of ``seed``, up to ``MAX_REGENERATIONS`` attempts.
    """
    if not isinstance(m, (int, np.integer)) or m < 1:
        raise GraphError(f"node count must be a positive integer, got {m!r}")
    if rho_c < 0:
        raise GraphError(f"connectivity radius must be nonnegative, got {rho_c}")
    if not require_connected:
        return _draw(int(m), rho_c, seed, 0)
    for attempt in range(MAX_REGENERATIONS):
        topo = _draw(int(m), rho_c, seed, attempt)
        if is_connected(topo):
            return topo
    raise GraphError(f"no connected graph with m={m}, rho_c={rho_c} after {MAX_REGENERATIONS} draws")


def is_connected(topo: Topology) -> bool:
    seen = np.zeros(topo.m, dtype=bool)
    seen[0] = True
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for j in np.nonzero(topo.adjacency[i] & ~seen)[0]:
            seen[j] = True
            queue.append(int(j))
    return bool(seen.all())


def _check_usable(topo: Topology) -> None:
    if topo.m > 1 and not topo.adjacency.any():
        raise GraphError("graph has no edges; consensus cannot converge")
    if not is_connected(topo):
        raise GraphError("graph is disconnected; consensus cannot converge")


def max_degree_weights(topo: Topology, factor: float = 0.9) -> WeightMatrix:
    """W = I - alpha L with alpha = factor / max degree."""
    _check_usable(topo)
    if topo.m == 1:
        return WeightMatrix(W=np.ones((1, 1)), alpha=0.0, scheme="max-degree")
    alpha = factor / topo.degrees.max()
    W = np.eye(topo.m) - alpha * topo.laplacian
    return WeightMatrix(W=W, alpha=float(alpha), scheme="max-degree")


def metropolis_weights(topo: Topology) -> WeightMatrix:
    _check_usable(topo)
    deg = topo.degrees
    W = np.zeros((topo.m, topo.m))
    i, j = np.nonzero(topo.adjacency)
    W[i, j] = 1.0 / (1.0 + np.maximum(deg[i], deg[j]))
    W[np.diag_indices(topo.m)] = 1.0 - W.sum(axis=1)
    return WeightMatrix(W=W, scheme="metropolis")
