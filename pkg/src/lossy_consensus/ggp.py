"""Aggregate-rate minimization as a generalized geometric program.

With ``y = ln D`` every posynomial becomes a log-sum-exp of affine functions,
and each rate factor ``max{sigma_i^2(D, t) / D_i(t), floor}`` is handled with
an epigraph variable ``u_it`` bounded below by both branches.  The resulting
smooth convex program

    minimize    sum u_it
    subject to  lse_it(y) - u_it <= 0,   ln(floor) - u_it <= 0,
                lse_mse(y) - ln(MSE*) <= 0

is solved with a log-barrier interior-point method and damped Newton steps.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .posynomial import Posynomial, VariableMap, mse_coefficients, variance_coefficients, _accumulate
from .rd_models import RdModel, rate_for_distortion
from .state_evolution import (
    DistortionSchedule,
    InfeasibleError,
    _W,
    error_trajectory,
    lossless_mse,
    variance_trajectory,
)

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
MAX_ITERATIONS = "max-iterations"
INFEASIBLE = "infeasible"
CENTERING_TOL = 1e-8
EPS = np.finfo(float).eps


@dataclass(eq=False)
class GgpProblem:
    W: np.ndarray
    mean0: np.ndarray
    cov0: np.ndarray
    T: int
    mse_target: float
    model: RdModel
    vmap: VariableMap
    factors: list[Posynomial]  # sigma_i^2(D,t) / D_i(t), ordered (t, i)
    variances: list[Posynomial]  # sigma_i^2(D,t), ordered (t, i)
    mse: Posynomial  # network MSE(D, T)
    lossless_floor: float

    @property
    def mode(self) -> str:
        return self.vmap.mode

    @property
    def m(self) -> int:
        return self.vmap.m

    @property
    def n_vars(self) -> int:
        return self.vmap.n

    def objective(self, D) -> float:
        """prod max{sigma^2 / D, floor} evaluated at variable vector ``D``."""
        return float(np.prod([max(f(D), self.model.floor) for f in self.factors]))

    def log_objective(self, y) -> float:
        """Convex transformed objective sum ln max{., floor} at ``y = ln D``."""
        lf = math.log(self.model.floor)
        return float(sum(max(f.log_eval(y), lf) for f in self.factors))

    def aggregate_rate(self, D) -> float:
        """R_agg in bits implied by variable vector ``D`` through the posynomials."""
        return self.log_objective(np.log(D)) / (2 * math.log(2)) + len(self.factors) * self.model.r_c

    def is_generalized_posynomial(self) -> bool:
        return all(f.is_generalized() for f in self.factors) and self.mse.is_generalized() and self.model.floor > 0


@dataclass(eq=False)
class RateAllocation:
    distortions: DistortionSchedule
    rates: np.ndarray  # (T, m) bits per symbol
    aggregate_rate: float
    predicted_mse: np.ndarray  # network MSE for t = 0..T
    variances: np.ndarray  # (T, m) predicted source variances
    solver_status: str
    mse_target: float
    model: RdModel
    iterations: int = 0
    gap: float = float("nan")
    solve_time: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def T(self) -> int:
        return self.rates.shape[0]

    @property
    def final_mse(self) -> float:
        return float(self.predicted_mse[-1])

    def node_aggregate_rates(self) -> np.ndarray:
        return self.rates.sum(axis=0)


def build_problem(W, mean0, cov0, T: int, mse_target: float, model: RdModel, mode: str = "variable") -> GgpProblem:
    W = _W(W)
    m = W.shape[0]
    mean0 = np.asarray(mean0, dtype=float)
    cov0 = np.asarray(cov0, dtype=float)
    if T < 1:
        raise ValueError("horizon must be at least one iteration")
    if mode not in ("variable", "constant"):
        raise ValueError(f"unknown mode {mode!r}")
    floor = lossless_mse(W, mean0, cov0, T)
    if not mse_target > floor:
        raise InfeasibleError(
            f"MSE target {mse_target:.6g} is not above the lossless MSE {floor:.6g} at T={T}", floor=floor
        )
    vmap = VariableMap(m, T, mode)
    factors, variances = [], []
    for t in range(T):
        const, coefs = variance_coefficients(W, cov0, t)
        for i in range(m):
            lin = _accumulate(vmap, {s: c[i] for s, c in enumerate(coefs)})
            v = Posynomial.affine(float(const[i]), lin)
            variances.append(v)
            factors.append(v.divide_by(vmap.index(i, t)))
    const, coefs = mse_coefficients(W, mean0, cov0, T)
    mse = Posynomial.affine(const, _accumulate(vmap, dict(enumerate(coefs))))
    return GgpProblem(W, mean0, cov0, T, float(mse_target), model, vmap, factors, variances, mse, floor)


class _Stacked:
    """Log-sum-exp blocks padded to a common term count for batched evaluation."""

    def __init__(self, posys: list[Posynomial], n: int):
        K = max(p.n_terms for p in posys)
        self.logc = np.full((len(posys), K), -np.inf)
        self.E = np.zeros((len(posys), K, n))
        for j, p in enumerate(posys):
            self.logc[j, : p.n_terms] = np.log(p.coeffs)
            self.E[j, : p.n_terms] = p.exponents

    def eval(self, y):
        z = self.logc + self.E @ y
        zmax = z.max(axis=1, keepdims=True)
        ez = np.exp(z - zmax)
        s = ez.sum(axis=1, keepdims=True)
        return (zmax + np.log(s))[:, 0], ez / s

    def grads(self, p):
        return np.einsum("jk,jkn->jn", p, self.E)

    def hessians_weighted(self, p, w):
        """sum_j w_j * E_j^T (diag p_j - p_j p_j^T) E_j."""
        g = self.grads(p)
        H = np.einsum("jkn,jk,jkl->nl", self.E, p * w[:, None], self.E, optimize=True)
        H -= np.einsum("jn,j,jl->nl", g, w, g, optimize=True)
        return H


def _initial_point(prob: GgpProblem) -> np.ndarray:
    """Equal distortions that use half of the MSE slack."""
    slack = prob.mse_target - prob.lossless_floor
    mass = float(prob.mse(np.ones(prob.n_vars)) - prob.mse.constant)
    d = 0.5 * slack / mass if mass > 0 else 1.0
    return np.full(prob.n_vars, math.log(d))


def solve(prob: GgpProblem, tol: float = 1e-8, max_iters: int = 500, mu: float = 10.0) -> RateAllocation:
    """Globally optimal distortions for ``prob`` via a log-barrier method.

    ``tol`` bounds the relative duality gap (constraint count over barrier
    weight, relative to the objective); ``max_iters`` caps the total number of
    Newton steps.
    """
    start = time.perf_counter()
    n = prob.n_vars
    J = len(prob.factors)
    lnfloor = math.log(prob.model.floor)
    lntarget = math.log(prob.mse_target)
    F = _Stacked(prob.factors, n)
    M = _Stacked([prob.mse], n)
    ncons = 2 * J + 1

    y = _initial_point(prob)
    lse0, _ = F.eval(y)
    u = np.maximum(lse0, lnfloor) + 1.0

    def barrier(y, u, tau):
        lse, _ = F.eval(y)
        g = lse - u
        h = lnfloor - u
        f = M.eval(y)[0][0] - lntarget
        if np.any(g >= 0) or np.any(h >= 0) or f >= 0:
            return math.inf
        return tau * u.sum() - np.log(-g).sum() - np.log(-h).sum() - math.log(-f)

    def newton_step(y, u, tau):
        lse, pF = F.eval(y)
        g = lse - u  # < 0
        h = lnfloor - u  # < 0
        fl, pM = M.eval(y)
        f = fl[0] - lntarget
        gy = F.grads(pF)  # (J, n)
        gm = M.grads(pM)[0]
        a = 1.0 / -g
        b = 1.0 / -h
        c = 1.0 / -f
        grad_y = gy.T @ a + c * gm
        grad_u = tau - a - b
        Hyy = F.hessians_weighted(pF, a) + np.einsum("jn,j,jl->nl", gy, a * a, gy, optimize=True)
        Hyy += c * M.hessians_weighted(pM, np.ones(1)) + c * c * np.outer(gm, gm)
        Hyu = -(gy * (a * a)[:, None]).T  # (n, J)
        Huu = a * a + b * b  # diagonal
        # eliminate the diagonal u-block
        S = Hyy - (Hyu / Huu) @ Hyu.T
        rhs = -grad_y + (Hyu / Huu) @ grad_u
        try:
            dy = np.linalg.solve(S, rhs)
        except np.linalg.LinAlgError:
            dy = np.linalg.lstsq(S, rhs, rcond=None)[0]
        du = (-grad_u - Hyu.T @ dy) / Huu
        dec2 = -(grad_y @ dy + grad_u @ du)
        return dy, du, dec2

    tau = max(1.0, ncons / max(1.0, abs(u.sum())))
    iters = 0
    status = OPTIMAL
    dec2 = math.inf
    while True:
        # centering
        while True:
            dy, du, dec2 = newton_step(y, u, tau)
            phi0 = barrier(y, u, tau)
            # below the rounding level of phi the line search cannot make progress
            if dec2 / 2 <= max(CENTERING_TOL, 100 * EPS * abs(phi0)):
                break
            if iters >= max_iters:
                status = MAX_ITERATIONS
                break
            step = 1.0
            while step > 1e-12:
                phi = barrier(y + step * dy, u + step * du, tau)
                if phi <= phi0 - 0.25 * step * dec2:
                    break
                step *= 0.5
            else:
                break  # centered to working precision
            y = y + step * dy
            u = u + step * du
            iters += 1
        gap = ncons / tau
        if status != OPTIMAL or gap <= tol * max(1.0, abs(u.sum())):
            break
        tau *= mu

    # the epigraph variables sit on max(lse, ln floor) at the optimum
    D = np.exp(y)
    alloc = allocation_from_distortions(prob, D, status)
    alloc.iterations = iters
    alloc.gap = float(gap)
    alloc.solve_time = time.perf_counter() - start
    alloc.extra["newton_decrement"] = float(max(dec2, 0.0))
    if status == OPTIMAL and alloc.final_mse > prob.mse_target * (1 + 1e-6):
        log.warning("solution violates the MSE target: %.6g > %.6g", alloc.final_mse, prob.mse_target)
    return alloc


def allocation_from_distortions(prob: GgpProblem, D, status: str = OPTIMAL) -> RateAllocation:
    """Evaluate rates and MSE trajectory for a variable vector ``D``."""
    Dm = prob.vmap.expand(D)
    if prob.mode == "constant":
        sched = DistortionSchedule.constant(np.asarray(D, dtype=float))
    else:
        sched = DistortionSchedule.variable(Dm)
    var = variance_trajectory(prob.W, prob.cov0, sched, prob.T)[: prob.T]
    rates = rate_for_distortion(prob.model, var, Dm)
    mse = np.array([e.network_mse for e in error_trajectory(prob.W, prob.mean0, prob.cov0, sched, prob.T)])
    return RateAllocation(
        distortions=sched,
        rates=np.asarray(rates).reshape(prob.T, prob.m),
        aggregate_rate=float(np.sum(rates)),
        predicted_mse=mse,
        variances=var,
        solver_status=status,
        mse_target=prob.mse_target,
        model=prob.model,
    )


def optimize(W, mean0, cov0, T: int, mse_target: float, model: RdModel, mode: str = "variable", **kw) -> RateAllocation:
    return solve(build_problem(W, mean0, cov0, T, mse_target, model, mode), **kw)


@dataclass
class SweepResult:
    T: int
    allocation: RateAllocation
    cost: float
    table: list[dict]  # one row per T, including skipped ones


def sweep_total_cost(W, mean0, cov0, model: RdModel, mse_target: float, K1: float, K2: float, T_range, mode: str = "constant", **kw) -> SweepResult:
    """Minimize K1 * R_agg(T) + K2 * T over the horizons in ``T_range``."""
    T_range = list(T_range)
    if not T_range:
        raise ValueError("empty horizon range")
    if K1 < 0 or K2 < 0:
        raise ValueError("cost weights must be nonnegative")
    table, best = [], None
    for T in T_range:
        try:
            alloc = optimize(W, mean0, cov0, T, mse_target, model, mode, **kw)
        except InfeasibleError as exc:
            table.append({"T": T, "feasible": False, "aggregate_rate": None, "cost": None, "floor": exc.floor})
            continue
        cost = K1 * alloc.aggregate_rate + K2 * T
        table.append({"T": T, "feasible": True, "aggregate_rate": alloc.aggregate_rate, "cost": cost, "status": alloc.solver_status})
        # ties go to the shorter horizon
        if best is None or cost < best.cost - 1e-12 * max(1.0, abs(cost)):
            best = SweepResult(T, alloc, cost, table)
    if best is None:
        floors = [r["floor"] for r in table]
        raise InfeasibleError(f"MSE target {mse_target:g} infeasible for every T in range", floor=min(floors))
    best.table = table
    return best
