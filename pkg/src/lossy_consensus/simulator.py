"""Monte Carlo runs of quantized consensus with real quantizers.

Each trial draws ``z_i(0) = x + n_i`` as ``L`` i.i.d. columns, then applies
``z(t+1) = z(t) + (W - I) Q(z(t))`` with one quantizer per (node, iteration)
designed from the predicted variance of that node's state.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import rng as rngmod
from .graph import Topology, generate_rgg_torus, max_degree_weights
from .ggp import optimize
from .heuristic import IntegerSchedule, heuristic
from .quantizers import UniformQuantizer, dithered_quantize, ecsq_quantizer_for, empirical_entropy_rate, fixed_rate_quantizer_for
from .rd_models import DEFAULT_RANGE, RdModel, rate_for_distortion
from .state_evolution import (
    DistortionSchedule,
    InfeasibleError,
    _W,
    covariance_trajectory,
    error_trajectory,
    lossless_mse_trajectory,
    signal_plus_noise_cov,
)

log = logging.getLogger(__name__)

SCHEMES = ("lossless", "dithered-uniform", "ecsq")


@dataclass
class SimConfig:
    T: int
    m: int = 20
    rho_c: float = 0.35
    topology_seed: int = 0
    topology: Topology | None = None
    L: int = 10_000
    sigma_x2: float = 1.0
    sigma_n2: float = 0.5
    trials: int = 100
    scheme: str = "lossless"
    seed: int = 0
    dithered: bool = True  # only consulted for ECSQ
    span: float = DEFAULT_RANGE
    threads: int = 1

    def __post_init__(self):
        if self.T < 0:
            raise ValueError("T must be nonnegative")
        if self.L < 1 or self.trials < 1:
            raise ValueError("L and trials must be at least one")
        if self.sigma_x2 < 0 or self.sigma_n2 < 0 or (self.sigma_x2 == 0 and self.sigma_n2 == 0):
            raise ValueError("variances must be nonnegative and not both zero")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if self.topology is not None:
            self.m = self.topology.m

    def get_topology(self) -> Topology:
        if self.topology is None:
            self.topology = generate_rgg_torus(self.m, self.rho_c, self.topology_seed, require_connected=True)
        return self.topology

    @property
    def cov0(self) -> np.ndarray:
        return signal_plus_noise_cov(self.m, self.sigma_x2, self.sigma_n2)

    @property
    def mean0(self) -> np.ndarray:
        return np.zeros(self.m)


@dataclass(eq=False)
class SimResult:
    node_mse: np.ndarray  # (trials, T+1, m)
    network_mse: np.ndarray  # (trials, T+1)
    aggregate_rate: np.ndarray  # (trials,)
    mean_drift: np.ndarray  # (trials, T) relative per-step change of the column means
    predicted_mse: np.ndarray | None = None
    lossless_mse: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    @property
    def mean_mse(self) -> np.ndarray:
        return self.network_mse.mean(axis=0)

    @property
    def stderr(self) -> np.ndarray:
        n = self.network_mse.shape[0]
        if n < 2:
            return np.full(self.network_mse.shape[1], np.nan)
        return self.network_mse.std(axis=0, ddof=1) / math.sqrt(n)

    @property
    def final_mse(self) -> float:
        return float(self.mean_mse[-1])

    @property
    def emse(self) -> float:
        return emse(self.final_mse, float(self.lossless_mse[-1]))

    def trajectory_rows(self) -> list[dict]:
        rows = []
        for t, (mm, se) in enumerate(zip(self.mean_mse, self.stderr)):
            row = {"t": t, "mse": float(mm), "stderr": float(se)}
            if self.predicted_mse is not None:
                row["predicted_mse"] = float(self.predicted_mse[t])
            row["lossless_mse"] = float(self.lossless_mse[t])
            row["emse_db"] = emse(float(mm), float(self.lossless_mse[t]))
            rows.append(row)
        return rows

    def trial_rows(self) -> list[dict]:
        return [
            {"trial": k, "t": t, "mse": float(self.network_mse[k, t])}
            for k in range(self.network_mse.shape[0])
            for t in range(self.network_mse.shape[1])
        ]


def emse(mse: float, lossless: float) -> float:
    """Excess MSE over lossless consensus in dB."""
    if not (mse > 0 and lossless > 0):
        raise ValueError("MSE values must be positive")
    return 10.0 * math.log10(mse / lossless)


def init_states(config: SimConfig, trial: int) -> np.ndarray:
    """``z_i(0) = x + n_i`` with a shared signal and private noise, shape (m, L)."""
    x = rngmod.stream(config.seed, trial, rngmod.ROLE_SIGNAL).normal(0.0, math.sqrt(config.sigma_x2), config.L)
    z = np.empty((config.m, config.L))
    for i in range(config.m):
        n = rngmod.stream(config.seed, trial, i, rngmod.ROLE_NOISE).normal(0.0, math.sqrt(config.sigma_n2), config.L)
        z[i] = x + n
    return z


def consensus_step(states, W, quantizers, dithers=None):
    """One step ``z + (W - I) Q(z)``.

    ``quantizers[i]`` is ``None`` for an identity map or a UniformQuantizer;
    dithered quantizers draw from ``dithers[i]``.  Returns the new states and
    the per-node cell indices (``None`` where nothing was quantized).
    """
    z = np.asarray(states, dtype=float)
    W = _W(W)
    m = W.shape[0]
    if z.ndim != 2 or z.shape[0] != m:
        raise ValueError(f"states must be ({m}, L), got {z.shape}")
    if len(quantizers) != m:
        raise ValueError("need one quantizer per node")
    q = np.empty_like(z)
    idx = [None] * m
    for i, Q in enumerate(quantizers):
        if Q is None:
            q[i] = z[i]
        elif Q.dithered:
            q[i], _, idx[i] = dithered_quantize(Q, z[i], dithers[i], return_index=True)
        else:
            idx[i] = Q.index(z[i])
            q[i] = Q.reconstruct(idx[i])
    return z + (W - np.eye(m)) @ q, idx


def _distortion_quantizer(distortion: float, variance: float, span: float) -> UniformQuantizer:
    # error variance b^2/12 = D; enough mid-rise levels to cover the span
    b = math.sqrt(12.0 * distortion)
    half = max(1, math.ceil(span * math.sqrt(variance) / (2 * b)))
    return UniformQuantizer(bin_size=b, levels=2 * half, dithered=True, style="mid-rise")


@dataclass
class _Plan:
    quantizers: list[list]  # [t][i]
    rate: float | None  # fixed rates are known in advance
    predicted: np.ndarray | None


def plan(config: SimConfig, W, schedule=None, model: RdModel | None = None) -> _Plan:
    """Quantizers for every (t, i) from the predicted state variances."""
    m, T = config.m, config.T
    if config.scheme == "lossless":
        return _Plan([[None] * m for _ in range(T)], 0.0, lossless_mse_trajectory(W, config.mean0, config.cov0, T))
    if schedule is None:
        raise ValueError(f"scheme {config.scheme!r} needs a schedule")
    if schedule.T != T:
        raise ValueError(f"schedule horizon {schedule.T} does not match T={T}")
    if isinstance(schedule, IntegerSchedule):
        if config.scheme != "dithered-uniform":
            raise ValueError("integer schedules are for fixed-rate dithered-uniform quantizers")
        D = schedule.distortions
        sched = DistortionSchedule.variable(D)
    elif isinstance(schedule, DistortionSchedule):
        sched = schedule
        D = schedule.as_matrix(m)
    else:
        raise TypeError(f"unsupported schedule type {type(schedule).__name__}")
    var = np.array([np.diag(c) for c in covariance_trajectory(W, config.cov0, sched, T)])
    predicted = np.array([e.network_mse for e in error_trajectory(W, config.mean0, config.cov0, sched, T)])
    qs = []
    for t in range(T):
        row = []
        for i in range(m):
            if isinstance(schedule, IntegerSchedule):
                row.append(fixed_rate_quantizer_for(var[t, i], int(schedule.rates[t]), config.span))
            elif config.scheme == "ecsq":
                row.append(ecsq_quantizer_for(D[t, i], dithered=config.dithered))
            else:
                row.append(_distortion_quantizer(D[t, i], var[t, i], config.span))
        qs.append(row)
    if isinstance(schedule, IntegerSchedule):
        rate = float(schedule.aggregate)
    elif config.scheme == "dithered-uniform":
        model = model or RdModel.dithered_uniform(config.span)
        rate = float(np.sum(rate_for_distortion(model, var[:T], D)))
    else:
        rate = None  # measured from the symbols
    return _Plan(qs, rate, predicted)


def _trial(config: SimConfig, W: np.ndarray, p: _Plan, trial: int):
    z = init_states(config, trial)
    truth = z.mean(axis=0)
    m, T = config.m, config.T
    node_mse = np.empty((T + 1, m))
    drift = np.empty(T)
    node_mse[0] = np.mean((z - truth) ** 2, axis=1)
    bits = 0.0
    for t in range(T):
        dith = [rngmod.stream(config.seed, trial, i, t, rngmod.ROLE_DITHER) for i in range(m)]
        before = z.mean(axis=0)
        z, idx = consensus_step(z, W, p.quantizers[t], dith)
        scale = max(np.max(np.abs(z)), 1e-300)
        drift[t] = np.max(np.abs(z.mean(axis=0) - before)) / scale
        node_mse[t + 1] = np.mean((z - truth) ** 2, axis=1)
        if p.rate is None:
            bits += sum(empirical_entropy_rate(ix) for ix in idx if ix is not None)
    rate = p.rate if p.rate is not None else bits
    return node_mse, rate, drift


def run(config: SimConfig, schedule=None, model: RdModel | None = None, W=None) -> SimResult:
    """Run ``config.trials`` independent trials; deterministic for a fixed seed."""
    if W is None:
        W = max_degree_weights(config.get_topology()).W
    W = _W(W)
    if W.shape[0] != config.m:
        raise ValueError("weight matrix size does not match the configuration")
    p = plan(config, W, schedule, model)
    workers = max(1, int(config.threads))
    if workers == 1:
        out = [_trial(config, W, p, k) for k in range(config.trials)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            out = list(ex.map(lambda k: _trial(config, W, p, k), range(config.trials)))
    node_mse = np.stack([o[0] for o in out])
    return SimResult(
        node_mse=node_mse,
        network_mse=node_mse.mean(axis=2),
        aggregate_rate=np.array([o[1] for o in out], dtype=float),
        mean_drift=np.stack([o[2] for o in out]).reshape(config.trials, config.T),
        predicted_mse=p.predicted,
        lossless_mse=lossless_mse_trajectory(W, config.mean0, config.cov0, config.T),
    )


def rd_curve(base: SimConfig, emse_grid, schemes=("ecsq", "dithered-uniform"), topology_seeds=(0,), mode: str = "constant", simulate: bool = True) -> list[dict]:
    """Rate versus EMSE rows averaged over topology seeds.

    ``dithered-uniform`` uses the relaxed GGP schedule; ``fixed-rate`` uses the
    integer heuristic on top of it.  Infeasible targets are skipped.
    """
    grid = [float(e) for e in emse_grid]
    if not grid:
        raise ValueError("empty EMSE grid")
    rows = []
    for scheme in schemes:
        model = RdModel.from_name("ecsq" if scheme == "ecsq" else "dithered-uniform")
        sim_scheme = "ecsq" if scheme == "ecsq" else "dithered-uniform"
        for e in grid:
            if e <= 0:
                log.warning("EMSE target %g dB is lossless; skipped", e)
                continue
            acc = {"rate": [], "pred": [], "sim_rate": [], "sim": []}
            for ts in topology_seeds:
                cfg = replace(base, topology=None, topology_seed=ts, scheme=sim_scheme)
                W = max_degree_weights(cfg.get_topology()).W
                floor = lossless_mse_trajectory(W, cfg.mean0, cfg.cov0, cfg.T)[-1]
                target = floor * 10 ** (e / 10)
                try:
                    alloc = optimize(W, cfg.mean0, cfg.cov0, cfg.T, target, model, mode)
                    if scheme == "fixed-rate":
                        sched = heuristic(alloc, W, cfg.mean0, cfg.cov0, target, model)
                        rate, pred = float(sched.aggregate), sched.predicted_mse
                    else:
                        sched = alloc.distortions
                        rate, pred = alloc.aggregate_rate, alloc.final_mse
                except InfeasibleError as exc:
                    log.warning("%s at %g dB infeasible on topology %d: %s", scheme, e, ts, exc)
                    continue
                acc["rate"].append(rate)
                acc["pred"].append(emse(pred, floor))
                if simulate:
                    res = run(cfg, sched, model, W)
                    acc["sim_rate"].append(float(res.aggregate_rate.mean()))
                    acc["sim"].append(emse(res.final_mse, floor))
            if not acc["rate"]:
                continue
            rows.append(
                {
                    "scheme": scheme,
                    "emse_target_db": e,
                    "aggregate_rate": float(np.mean(acc["rate"])),
                    "emse_predicted_db": float(np.mean(acc["pred"])),
                    "aggregate_rate_simulated": float(np.mean(acc["sim_rate"])) if acc["sim_rate"] else None,
                    "emse_simulated_db": float(np.mean(acc["sim"])) if acc["sim"] else None,
                    "instances": len(acc["rate"]),
                }
            )
    return rows
