"""Mean and covariance propagation for quantized consensus.

The network state follows ``z(t+1) = W z(t) + (W - I) eps(t)`` where the
quantization error ``eps(t)`` is zero-mean, white, uncorrelated with the
state, and has per-node variance ``D_i(t)``.  Only first and second moments
are tracked.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class InfeasibleError(Exception):
    """No schedule can meet the requested MSE target."""

    def __init__(self, message: str, floor: float | None = None, best=None):
        super().__init__(message)
        self.floor = floor
        self.best = best


@dataclass(frozen=True, eq=False)
class DistortionSchedule:
    """Quantization distortions per iteration, either node-constant or per node.

    ``values`` has shape ``(T,)`` in constant mode and ``(T, m)`` in variable
    mode.
    """

    values: np.ndarray
    mode: str = "variable"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if self.mode not in ("variable", "constant"):
            raise ValueError(f"unknown schedule mode {self.mode!r}")
        if self.mode == "constant" and v.ndim != 1:
            raise ValueError("constant schedules are one value per iteration")
        if self.mode == "variable" and v.ndim != 2:
            raise ValueError("variable schedules are shaped (T, m)")
        if v.size and not np.all(v > 0):
            raise ValueError("distortions must be strictly positive")
        object.__setattr__(self, "values", v)

    @property
    def T(self) -> int:
        return self.values.shape[0]

    def at(self, t: int, m: int) -> np.ndarray:
        """Per-node distortions at iteration ``t``."""
        if self.mode == "constant":
            return np.full(m, self.values[t])
        if self.values.shape[1] != m:
            raise ValueError(f"schedule has {self.values.shape[1]} nodes, network has {m}")
        return self.values[t]

    def as_matrix(self, m: int) -> np.ndarray:
        return np.array([self.at(t, m) for t in range(self.T)]).reshape(self.T, m)

    @classmethod
    def constant(cls, values) -> "DistortionSchedule":
        return cls(np.atleast_1d(np.asarray(values, dtype=float)), mode="constant")

    @classmethod
    def variable(cls, values) -> "DistortionSchedule":
        return cls(np.atleast_2d(np.asarray(values, dtype=float)), mode="variable")


@dataclass(frozen=True, eq=False)
class StateStats:
    t: int
    mean: np.ndarray
    cov: np.ndarray


@dataclass(frozen=True, eq=False)
class ErrorStats:
    t: int
    mean_e: np.ndarray
    cov_e: np.ndarray
    node_mse: np.ndarray
    network_mse: float


def _W(W) -> np.ndarray:
    return np.asarray(getattr(W, "W", W), dtype=float)


def _check_dims(W: np.ndarray, mean0=None, cov0=None) -> None:
    m = W.shape[0]
    if W.shape != (m, m):
        raise ValueError(f"weight matrix must be square, got {W.shape}")
    if mean0 is not None and np.shape(mean0) != (m,):
        raise ValueError(f"mean has shape {np.shape(mean0)}, expected ({m},)")
    if cov0 is not None and np.shape(cov0) != (m, m):
        raise ValueError(f"covariance has shape {np.shape(cov0)}, expected ({m}, {m})")


def centering(m: int) -> np.ndarray:
    """The projector I - (1/m) 1 1^T onto the disagreement subspace."""
    return np.eye(m) - np.full((m, m), 1.0 / m)


def signal_plus_noise_cov(m: int, sigma_x2: float, sigma_n2: float) -> np.ndarray:
    """Covariance of z_i(0) = x + n_i with a shared signal and private noise."""
    return sigma_x2 * np.ones((m, m)) + sigma_n2 * np.eye(m)


def evolve_mean(W, mean0, t: int) -> np.ndarray:
    W = _W(W)
    mean0 = np.asarray(mean0, dtype=float)
    _check_dims(W, mean0=mean0)
    if t < 0:
        raise ValueError("iteration index must be nonnegative")
    return np.linalg.matrix_power(W, t) @ mean0


def _distortions(D, t: int, m: int) -> np.ndarray:
    if D is None:
        return np.zeros(m)
    return D.at(t, m)


def covariance_trajectory(W, cov0, D: DistortionSchedule | None, t: int) -> list[np.ndarray]:
    """Covariances ``[Sigma_z(0), ..., Sigma_z(t)]`` by forward recursion.

    ``D=None`` is the lossless (zero-distortion) limit.
    """
    W = _W(W)
    cov = np.asarray(cov0, dtype=float)
    _check_dims(W, cov0=cov)
    m = W.shape[0]
    if t < 0:
        raise ValueError("iteration index must be nonnegative")
    if D is not None and t > D.T:
        raise ValueError(f"iteration {t} exceeds schedule horizon {D.T}")
    WmI = W - np.eye(m)
    out = [cov]
    for s in range(t):
        d = _distortions(D, s, m)
        cov = W @ cov @ W.T + (WmI * d) @ WmI.T
        cov = 0.5 * (cov + cov.T)
        out.append(cov)
    return out


def evolve_covariance(W, cov0, D: DistortionSchedule | None, t: int) -> np.ndarray:
    return covariance_trajectory(W, cov0, D, t)[-1]


def state_stats(W, mean0, cov0, D, t: int) -> StateStats:
    return StateStats(t=t, mean=evolve_mean(W, mean0, t), cov=evolve_covariance(W, cov0, D, t))


def _error_from_state(mean_z: np.ndarray, cov_z: np.ndarray, t: int) -> ErrorStats:
    P = centering(mean_z.shape[0])
    mean_e = P @ mean_z
    cov_e = P @ cov_z @ P
    cov_e = 0.5 * (cov_e + cov_e.T)
    node_mse = np.diag(cov_e) + mean_e**2
    return ErrorStats(t=t, mean_e=mean_e, cov_e=cov_e, node_mse=node_mse, network_mse=float(node_mse.mean()))


def error_stats(W, mean0, cov0, D, t: int) -> ErrorStats:
    """Error statistics relative to the true initial average at iteration ``t``."""
    st = state_stats(W, mean0, cov0, D, t)
    return _error_from_state(st.mean, st.cov, t)


def error_trajectory(W, mean0, cov0, D, T: int) -> list[ErrorStats]:
    W = _W(W)
    mean0 = np.asarray(mean0, dtype=float)
    _check_dims(W, mean0=mean0)
    covs = covariance_trajectory(W, cov0, D, T)
    out = []
    mean = mean0
    for t, cov in enumerate(covs):
        out.append(_error_from_state(mean, cov, t))
        mean = W @ mean
    return out


def node_variance(stats: StateStats, i: int) -> float:
    m = stats.cov.shape[0]
    if not 0 <= i < m:
        raise IndexError(f"node index {i} out of range for {m} nodes")
    return float(stats.cov[i, i])


def lossless_mse(W, mean0, cov0, t: int) -> float:
    return error_stats(W, mean0, cov0, None, t).network_mse


def lossless_mse_trajectory(W, mean0, cov0, T: int) -> np.ndarray:
    return np.array([e.network_mse for e in error_trajectory(W, mean0, cov0, None, T)])


def min_iterations(W, mean0, cov0, mse_target: float, t_max: int) -> int:
    """Smallest T <= t_max whose lossless MSE is below ``mse_target``.

    Raises InfeasibleError carrying the best lossless MSE reached when no such
    T exists.
    """
    if mse_target <= 0:
        raise ValueError("MSE target must be positive")
    traj = lossless_mse_trajectory(W, mean0, cov0, t_max)
    if mse_target >= traj[0]:
        return 0
    hits = np.nonzero(traj < mse_target)[0]
    if hits.size == 0:
        raise InfeasibleError(
            f"lossless MSE stays above {mse_target:g} for T <= {t_max} (reaches {traj.min():.6g})",
            floor=float(traj.min()),
        )
    return int(hits[0])


def variance_trajectory(W, cov0, D, T: int) -> np.ndarray:
    """Per-node variances sigma_i^2(D, t) for t = 0..T, shape (T+1, m)."""
    return np.array([np.diag(c) for c in covariance_trajectory(W, cov0, D, T)])
