"""Uniform scalar quantizers with optional subtractive dither."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rd_models import DEFAULT_RANGE


@dataclass(frozen=True)
class UniformQuantizer:
    """Uniform quantizer with step ``bin_size``.

    ``levels=None`` means unbounded.  Mid-tread places a level at zero;
    mid-rise places thresholds at the multiples of ``bin_size``.
    """

    bin_size: float
    levels: int | None = None
    dithered: bool = False
    style: str = "mid-tread"

    def __post_init__(self):
        if not self.bin_size > 0:
            raise ValueError("bin size must be positive")
        if self.style not in ("mid-tread", "mid-rise"):
            raise ValueError(f"unknown quantizer style {self.style!r}")
        if self.levels is not None:
            if self.levels < 1:
                raise ValueError("a bounded quantizer needs at least one level")
            if self.style == "mid-rise" and self.levels % 2:
                raise ValueError("mid-rise quantizers have an even number of levels")
            if self.style == "mid-tread" and not self.levels % 2:
                raise ValueError("mid-tread quantizers have an odd number of levels")

    @property
    def max_level(self) -> float:
        if self.levels is None:
            return math.inf
        if self.style == "mid-rise":
            return (self.levels / 2 - 0.5) * self.bin_size
        return (self.levels - 1) / 2 * self.bin_size

    def index(self, x):
        """Integer cell index of each input; ties go away from zero."""
        u = np.asarray(x, dtype=float) / self.bin_size
        if self.style == "mid-tread":
            idx = np.sign(u) * np.floor(np.abs(u) + 0.5)
            if self.levels is not None:
                half = (self.levels - 1) // 2
                idx = np.clip(idx, -half, half)
        else:
            idx = np.where(u < 0, np.ceil(u) - 1, np.floor(u))
            if self.levels is not None:
                half = self.levels // 2
                idx = np.clip(idx, -half, half - 1)
        return idx

    def reconstruct(self, idx):
        idx = np.asarray(idx, dtype=float)
        if self.style == "mid-rise":
            return (idx + 0.5) * self.bin_size
        return idx * self.bin_size

    def __call__(self, x):
        return quantize(self, x)


def quantize(q: UniformQuantizer, x):
    """Nearest representation level of ``x`` (saturating when bounded)."""
    out = q.reconstruct(q.index(x))
    return float(out) if np.ndim(out) == 0 else out


def dithered_quantize(q: UniformQuantizer, x, rng: np.random.Generator, return_index: bool = False):
    """Subtractively dithered quantization.

    Returns ``(reconstruction, dither)``; the reconstruction is
    ``Q(x + w) - w`` with ``w ~ U(-b/2, b/2)`` shared by encoder and decoder.
    With ``return_index`` the transmitted cell indices are appended.
    """
    x = np.asarray(x, dtype=float)
    b = q.bin_size
    w = rng.uniform(-b / 2, b / 2, size=x.shape)
    idx = q.index(x + w)
    rec = q.reconstruct(idx) - w
    if x.ndim == 0:
        rec, w = float(rec), float(w)
    if return_index:
        return rec, w, idx
    return rec, w


def fixed_rate_quantizer_for(variance: float, rate: int, span: float = DEFAULT_RANGE) -> UniformQuantizer:
    """Dithered mid-rise quantizer with 2**rate levels covering ``span`` standard deviations."""
    if rate < 1 or int(rate) != rate:
        raise ValueError("fixed rate must be an integer of at least one bit")
    if variance <= 0:
        raise ValueError("variance must be positive")
    n = 2 ** int(rate)
    return UniformQuantizer(bin_size=span * math.sqrt(variance) / n, levels=n, dithered=True, style="mid-rise")


def ecsq_quantizer_for(distortion: float, dithered: bool = True) -> UniformQuantizer:
    """Unbounded mid-tread quantizer whose dithered error variance is ``distortion``."""
    if distortion <= 0:
        raise ValueError("distortion must be positive")
    return UniformQuantizer(bin_size=math.sqrt(12.0 * distortion), levels=None, dithered=dithered, style="mid-tread")


def empirical_entropy_rate(samples) -> float:
    """Plug-in entropy, in bits per symbol, of the observed symbol frequencies."""
    samples = np.asarray(samples).ravel()
    if samples.size == 0:
        raise ValueError("cannot estimate entropy from no samples")
    _, counts = np.unique(samples, return_counts=True)
    p = counts / samples.size
    return float(max(0.0, -np.sum(p * np.log2(p))))
