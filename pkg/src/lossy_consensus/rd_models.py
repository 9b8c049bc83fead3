"""Operational rate-distortion relationships for Gaussian sources.

All models share the high-rate template

    R(D) = 1/2 log2(max{sigma^2 / D, floor}) + R_c

with ``floor = max(k, 1 / D_max)`` and ``k = 2**(-2 R_c)``.  With the default
``D_max = 1 / k`` the floor is ``k`` and the rate reaches exactly zero at
``D = sigma^2 D_max``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, stats

KINDS = ("gaussian-vq", "ecsq", "dithered-uniform")
ALIASES = {"gauss-vq": "gaussian-vq", "gaussian-vq": "gaussian-vq", "ecsq": "ecsq", "dithered-uniform": "dithered-uniform"}

ECSQ_RATE_OFFSET = 0.255
DEFAULT_RANGE = 12.0


@dataclass(frozen=True)
class RdModel:
    kind: str
    r_c: float
    d_max: float
    delta: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown RD model {self.kind!r}")
        if not self.d_max > 0:
            raise ValueError("D_max must be positive")

    @property
    def k(self) -> float:
        return 2.0 ** (-2.0 * self.r_c)

    @property
    def floor(self) -> float:
        return max(self.k, 1.0 / self.d_max)

    @property
    def min_rate(self) -> float:
        """Rate charged once the distortion reaches its cap."""
        return 0.5 * math.log2(self.floor) + self.r_c

    @classmethod
    def gaussian_vq(cls) -> "RdModel":
        return cls("gaussian-vq", r_c=0.0, d_max=1.0)

    @classmethod
    def ecsq(cls, r_c: float = ECSQ_RATE_OFFSET, d_max: float | None = None) -> "RdModel":
        return cls("ecsq", r_c=r_c, d_max=2.0 ** (2.0 * r_c) if d_max is None else d_max)

    @classmethod
    def dithered_uniform(cls, delta: float = DEFAULT_RANGE) -> "RdModel":
        # D(R) = delta^2 sigma^2 / 12 * 2^(-2R)  <=>  R_c = 1/2 log2(delta^2 / 12)
        r_c = 0.5 * math.log2(delta**2 / 12.0)
        return cls("dithered-uniform", r_c=r_c, d_max=delta**2 / 12.0, delta=delta)

    @classmethod
    def from_name(cls, name: str, rc: float | None = None, dmax: float | None = None, delta: float | None = None):
        kind = ALIASES.get(name)
        if kind is None:
            raise ValueError(f"unknown RD model {name!r}; choose from {sorted(ALIASES)}")
        if kind == "dithered-uniform":
            model = cls.dithered_uniform(DEFAULT_RANGE if delta is None else delta)
        elif kind == "ecsq":
            model = cls.ecsq(ECSQ_RATE_OFFSET if rc is None else rc)
        else:
            model = cls.gaussian_vq()
        if rc is None and dmax is None:
            return model
        r_c = model.r_c if rc is None else rc
        return cls(kind, r_c=r_c, d_max=2.0 ** (2.0 * r_c) if dmax is None else dmax, delta=model.delta)


def rate_for_distortion(model: RdModel, variance, distortion):
    """Bits per symbol needed to code a variance-``variance`` source at ``distortion``."""
    variance = np.asarray(variance, dtype=float)
    distortion = np.asarray(distortion, dtype=float)
    if np.any(variance <= 0) or np.any(distortion <= 0):
        raise ValueError("variance and distortion must be positive")
    r = 0.5 * np.log2(np.maximum(variance / distortion, model.floor)) + model.r_c
    return float(r) if r.ndim == 0 else r


def distortion_for_rate(model: RdModel, variance, rate):
    """Inverse of :func:`rate_for_distortion` on its decreasing branch.

    Rates at or below the floor rate map to the distortion cap
    ``variance / floor``.
    """
    variance = np.asarray(variance, dtype=float)
    rate = np.asarray(rate, dtype=float)
    if np.any(variance <= 0):
        raise ValueError("variance must be positive")
    if np.any(rate < 0):
        raise ValueError("rate must be nonnegative")
    d = variance * np.minimum(2.0 ** (-2.0 * (rate - model.r_c)), 1.0 / model.floor)
    return float(d) if d.ndim == 0 else d


def dithered_uniform_distortion(variance, rate, delta: float = DEFAULT_RANGE):
    """Exact distortion of a subtractively dithered fixed-rate uniform quantizer."""
    return delta**2 * np.asarray(variance, dtype=float) / 12.0 * 2.0 ** (-2.0 * np.asarray(rate, dtype=float))


def ecsq_high_rate_distortion(variance, rate):
    """High-rate ECSQ distortion (1/12) 2^(2 h) 2^(-2R) for a Gaussian source."""
    h = 0.5 * np.log2(2 * np.pi * np.e * np.asarray(variance, dtype=float))
    return 2.0 ** (2 * h) / 12.0 * 2.0 ** (-2.0 * np.asarray(rate, dtype=float))


def midtread_distortion(variance: float, bin_size: float) -> float:
    """MSE of an unbounded mid-tread uniform quantizer on N(0, variance)."""
    sigma = math.sqrt(variance)
    b = bin_size
    total = 0.0
    n = 0
    while True:
        lo, hi = (n - 0.5) * b, (n + 0.5) * b
        if n == 0:
            lo = 0.0
        piece, _ = integrate.quad(lambda x, c=n * b: (x - c) ** 2 * stats.norm.pdf(x, scale=sigma), lo, hi)
        total += piece
        if lo > 12 * sigma:
            break
        n += 1
    return 2.0 * total


def ecsq_dmax_for_activity(variance: float, nonzero_fraction: float) -> float:
    """Distortion of the mid-tread quantizer whose zero bin holds all but
    ``nonzero_fraction`` of the Gaussian mass."""
    if not 0.0 < nonzero_fraction < 1.0:
        raise ValueError("nonzero fraction must lie in (0, 1)")
    if variance <= 0:
        raise ValueError("variance must be positive")
    half_width = math.sqrt(variance) * stats.norm.ppf(1.0 - nonzero_fraction / 2.0)
    return midtread_distortion(variance, 2.0 * half_width)
