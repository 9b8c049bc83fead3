"""Integer, node-constant rate schedules for fixed-rate uniform quantizers.

The relaxed optimum from the GGP is averaged over nodes and a small trellis
of integer sequences around it is searched.  ``exhaustive_search`` enumerates
every sequence under a per-node budget and serves as the reference.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .ggp import OPTIMAL, RateAllocation
from .rd_models import RdModel
from .state_evolution import InfeasibleError, _W

MAX_SEQUENCES = 10_000_000
_BATCH = 4096


@dataclass(frozen=True, eq=False)
class IntegerSchedule:
    rates: np.ndarray  # R(t), shared by all nodes
    m: int
    predicted_mse: float
    distortions: np.ndarray | None = None  # (T, m) induced distortions

    def __post_init__(self):
        r = np.asarray(self.rates, dtype=int)
        if r.ndim != 1:
            raise ValueError("integer schedules are one rate per iteration")
        if np.any(r < 1):
            raise ValueError("fixed rates must be at least one bit per symbol")
        object.__setattr__(self, "rates", r)

    @property
    def T(self) -> int:
        return self.rates.shape[0]

    @property
    def aggregate(self) -> int:
        return int(self.m * self.rates.sum())

    def to_dict(self) -> dict:
        return {
            "rates": self.rates.tolist(),
            "aggregate_rate": self.aggregate,
            "predicted_mse": self.predicted_mse,
            "m": self.m,
        }


def average_ggp_rates(alloc: RateAllocation) -> np.ndarray:
    """Node-averaged rate sequence R_GGP(t) of a relaxed allocation."""
    if alloc.solver_status != OPTIMAL:
        raise ValueError(f"allocation is not optimal (status {alloc.solver_status!r})")
    return np.maximum(np.asarray(alloc.rates, dtype=float).mean(axis=1), 0.0)


def build_trellis(rggp) -> list[tuple[int, ...]]:
    """Integer neighbours of ``rggp``: every +-1 offset, clamped to one bit,
    then every floor/ceil pattern, without duplicates (order of discovery)."""
    r = np.asarray(rggp, dtype=float).ravel()
    T = r.size
    if T < 1:
        raise ValueError("need at least one iteration")
    seen: dict[tuple[int, ...], None] = {}
    for offs in itertools.product((-1.0, 1.0), repeat=T):
        shifted = np.maximum(r + np.array(offs), 1.0)
        choices = [sorted({math.floor(v), math.ceil(v)}) for v in shifted]
        for seq in itertools.product(*choices):
            seen.setdefault(tuple(int(v) for v in seq), None)
    return list(seen)


def _batch_mse(W, mean0, cov0, model: RdModel, R: np.ndarray):
    """Final network MSE for a batch of node-constant rate sequences.

    The distortion at each step follows from the predicted variance at that
    step, so the covariance recursion is run forward per candidate.
    """
    B, T = R.shape
    m = W.shape[0]
    WmI = W - np.eye(m)
    cov = np.broadcast_to(cov0, (B, m, m)).copy()
    Ds = np.empty((B, T, m))
    k = 2.0 ** (-2.0 * (R - model.r_c))  # (B, T)
    cap = 1.0 / model.floor
    for t in range(T):
        var = np.einsum("bii->bi", cov)
        D = var * np.minimum(k[:, t : t + 1], cap)
        Ds[:, t] = D
        cov = W @ cov @ W.T + (WmI[None] * D[:, None, :]) @ WmI.T
    C = np.eye(m) - 1.0 / m
    mean_e = C @ np.linalg.matrix_power(W, T) @ mean0
    var_e = np.einsum("ij,bjk,ki->b", C, cov, C)
    return (var_e + mean_e @ mean_e) / m, Ds


def evaluate(rates, W, mean0, cov0, model: RdModel | None = None) -> IntegerSchedule:
    """Predicted final MSE of one integer schedule."""
    W = _W(W)
    model = model or RdModel.dithered_uniform()
    r = np.asarray(rates, dtype=int)
    mse, Ds = _batch_mse(W, np.asarray(mean0, float), np.asarray(cov0, float), model, r[None, :])
    return IntegerSchedule(r, W.shape[0], float(mse[0]), Ds[0])


def _pick(cands: np.ndarray, mse: np.ndarray, target: float):
    """Index of the feasible minimum-aggregate, lowest-MSE candidate, or None."""
    ok = mse <= target
    if not ok.any():
        return None
    idx = np.nonzero(ok)[0]
    # lexsort: last key is primary
    order = np.lexsort((mse[idx], cands[idx].sum(axis=1)))
    return idx[order[0]]


def search(candidates, W, mean0, cov0, model: RdModel | None, mse_target: float) -> IntegerSchedule:
    """Best feasible candidate: minimum aggregate rate, then lowest MSE."""
    W = _W(W)
    model = model or RdModel.dithered_uniform()
    cands = np.array([tuple(c) for c in candidates], dtype=int)
    if cands.size == 0:
        raise ValueError("empty candidate set")
    if cands.ndim == 1:
        cands = cands[:, None]
    mean0 = np.asarray(mean0, float)
    cov0 = np.asarray(cov0, float)
    mse = np.concatenate(
        [_batch_mse(W, mean0, cov0, model, cands[i : i + _BATCH])[0] for i in range(0, len(cands), _BATCH)]
    )
    j = _pick(cands, mse, mse_target)
    if j is None:
        b = int(np.argmin(mse))
        best = evaluate(cands[b], W, mean0, cov0, model)
        raise InfeasibleError(
            f"no candidate meets MSE target {mse_target:.6g}; best reaches {mse[b]:.6g}",
            floor=float(mse[b]),
            best=best,
        )
    return evaluate(cands[j], W, mean0, cov0, model)


def heuristic(alloc: RateAllocation, W, mean0, cov0, mse_target: float, model: RdModel | None = None) -> IntegerSchedule:
    return search(build_trellis(average_ggp_rates(alloc)), W, mean0, cov0, model, mse_target)


def _compositions(total: int, parts: int):
    """All sequences of ``parts`` positive integers summing to ``total``."""
    for cuts in itertools.combinations(range(1, total), parts - 1):
        edges = (0,) + cuts + (total,)
        yield tuple(edges[i + 1] - edges[i] for i in range(parts))


def exhaustive_search(T: int, budget: int, W, mean0, cov0, model: RdModel | None, mse_target: float) -> IntegerSchedule:
    """True optimum over integer sequences with R(t) >= 1 and sum R(t) <= ``budget``.

    Sequences are visited in increasing total rate, so the first level with a
    feasible member holds the optimum.
    """
    if T < 1:
        raise ValueError("need at least one iteration")
    budget = int(budget)
    if budget < T:
        raise InfeasibleError(f"budget {budget} cannot give each of {T} iterations one bit")
    count = math.comb(budget, T)
    if count > MAX_SEQUENCES:
        raise ValueError(f"{count} sequences exceed the enumeration guard of {MAX_SEQUENCES}")
    W = _W(W)
    model = model or RdModel.dithered_uniform()
    mean0 = np.asarray(mean0, float)
    cov0 = np.asarray(cov0, float)
    best_mse, best_seq = math.inf, None
    for total in range(T, budget + 1):
        level = np.array(list(_compositions(total, T)), dtype=int).reshape(-1, T)
        for i in range(0, len(level), _BATCH):
            chunk = level[i : i + _BATCH]
            mse = _batch_mse(W, mean0, cov0, model, chunk)[0]
            j = _pick(chunk, mse, mse_target)
            if j is not None and mse[j] < best_mse:
                best_mse, best_seq = mse[j], chunk[j]
        if best_seq is not None:
            return evaluate(best_seq, W, mean0, cov0, model)
    raise InfeasibleError(f"no sequence with per-node budget {budget} meets MSE target {mse_target:.6g}")


def default_budget(rggp) -> int:
    return int(math.ceil(float(np.sum(rggp)) - 1e-9))
