"""Posynomials in the quantization distortions.

Node variances and MSEs under the additive noise model are affine in the
distortions with nonnegative coefficients, so each one is a posynomial: a
constant monomial plus one monomial per distortion variable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .state_evolution import _W, centering, evolve_mean

PRUNE_RELATIVE = 1e-14


@dataclass(frozen=True)
class VariableMap:
    """Maps distortion D_k(s) to a variable index.

    Variable mode has one variable per (node, iteration) ordered iteration
    major, matching [D_1(0), ..., D_m(0), ..., D_m(T-1)]; constant mode has
    one variable per iteration.
    """

    m: int
    T: int
    mode: str = "variable"

    @property
    def n(self) -> int:
        return self.m * self.T if self.mode == "variable" else self.T

    def index(self, k: int, s: int) -> int:
        return s * self.m + k if self.mode == "variable" else s

    def indices(self, s: int) -> np.ndarray:
        if self.mode == "variable":
            return s * self.m + np.arange(self.m)
        return np.full(self.m, s)

    def expand(self, x: np.ndarray) -> np.ndarray:
        """Variable vector to a (T, m) array of per-node distortions."""
        x = np.asarray(x, dtype=float)
        if self.mode == "variable":
            return x.reshape(self.T, self.m)
        return np.repeat(x[:, None], self.m, axis=1)


@dataclass(frozen=True, eq=False)
class Posynomial:
    """Sum of monomials ``c_j prod_v D_v ** a_jv`` with every ``c_j > 0``."""

    coeffs: np.ndarray
    exponents: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        a = np.asarray(self.exponents, dtype=float)
        if a.ndim != 2 or a.shape[0] != c.shape[0]:
            raise ValueError("exponents must be (terms, variables)")
        if np.any(c <= 0):
            raise ValueError("posynomial coefficients must be strictly positive")
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "exponents", a)

    @property
    def n_vars(self) -> int:
        return self.exponents.shape[1]

    @property
    def n_terms(self) -> int:
        return self.coeffs.shape[0]

    @property
    def constant(self) -> float:
        mask = ~self.exponents.any(axis=1)
        return float(self.coeffs[mask].sum())

    def __call__(self, D) -> float:
        D = np.asarray(D, dtype=float)
        return float(np.sum(self.coeffs * np.prod(D ** self.exponents, axis=1)))

    def log_eval(self, y) -> float:
        """ln P(exp(y)) as a log-sum-exp of affine functions of ``y``."""
        z = np.log(self.coeffs) + self.exponents @ np.asarray(y, dtype=float)
        zmax = z.max()
        return float(zmax + np.log(np.sum(np.exp(z - zmax))))

    def divide_by(self, var: int) -> "Posynomial":
        """This posynomial divided by the monomial D_var."""
        a = self.exponents.copy()
        a[:, var] -= 1.0
        return Posynomial(self.coeffs, a)

    @classmethod
    def affine(cls, constant: float, linear: np.ndarray) -> "Posynomial":
        """``constant + sum_v linear[v] D_v`` keeping only significant terms."""
        linear = np.asarray(linear, dtype=float)
        n = linear.shape[0]
        scale = max(abs(constant), float(np.max(np.abs(linear), initial=0.0)))
        keep = linear > PRUNE_RELATIVE * scale
        coeffs, rows = [], []
        if constant > PRUNE_RELATIVE * scale:
            coeffs.append(constant)
            rows.append(np.zeros(n))
        for v in np.nonzero(keep)[0]:
            coeffs.append(linear[v])
            e = np.zeros(n)
            e[v] = 1.0
            rows.append(e)
        return cls(np.array(coeffs), np.array(rows).reshape(len(rows), n))

    def is_generalized(self) -> bool:
        """Structural check: positive coefficients and real exponents."""
        return bool(np.all(self.coeffs > 0) and np.all(np.isfinite(self.exponents)))


def _powers(W: np.ndarray, n: int) -> list[np.ndarray]:
    out = [np.eye(W.shape[0])]
    for _ in range(n):
        out.append(out[-1] @ W)
    return out


def _accumulate(vmap: VariableMap, per_s: dict[int, np.ndarray]) -> np.ndarray:
    lin = np.zeros(vmap.n)
    for s, coef in per_s.items():
        np.add.at(lin, vmap.indices(s), coef)
    return lin


def variance_coefficients(W, cov0, t: int) -> tuple[np.ndarray, list[np.ndarray]]:
    """Constant diag(W^t S W^t) and, for each s < t, the matrix of
    coefficients [i, k] of D_k(s) in the variance of node i."""
    W = _W(W)
    m = W.shape[0]
    P = _powers(W, t)
    const = np.diag(P[t] @ np.asarray(cov0, dtype=float) @ P[t].T)
    WmI = W - np.eye(m)
    coefs = [(P[t - s - 1] @ WmI) ** 2 for s in range(t)]
    return const, coefs


def build_variance_posynomial(W, cov0, i: int, t: int, vmap: VariableMap | None = None) -> Posynomial:
    """sigma_i^2(D, t) as a posynomial over the variables of ``vmap``."""
    W = _W(W)
    m = W.shape[0]
    if not 0 <= i < m:
        raise IndexError(f"node index {i} out of range")
    if vmap is None:
        vmap = VariableMap(m, max(t, 1))
    if t > vmap.T:
        raise ValueError("iteration beyond the variable horizon")
    const, coefs = variance_coefficients(W, cov0, t)
    lin = _accumulate(vmap, {s: c[i] for s, c in enumerate(coefs)})
    return Posynomial.affine(float(const[i]), lin)


def mse_coefficients(W, mean0, cov0, t: int) -> tuple[float, list[np.ndarray]]:
    """Lossless network MSE at ``t`` and per-s vectors of D_k(s) coefficients."""
    W = _W(W)
    m = W.shape[0]
    C = centering(m)
    P = _powers(W, t)
    mean_e = C @ evolve_mean(W, mean0, t)
    cov_e = C @ P[t] @ np.asarray(cov0, dtype=float) @ P[t].T @ C
    const = float((np.trace(cov_e) + mean_e @ mean_e) / m)
    WmI = W - np.eye(m)
    coefs = [np.sum((C @ P[t - s - 1] @ WmI) ** 2, axis=0) / m for s in range(t)]
    return const, coefs


def build_mse_posynomial(W, mean0, cov0, t: int, vmap: VariableMap | None = None) -> Posynomial:
    """Network MSE(D, t) as a posynomial over the variables of ``vmap``."""
    W = _W(W)
    if vmap is None:
        vmap = VariableMap(W.shape[0], max(t, 1))
    if t > vmap.T:
        raise ValueError("iteration beyond the variable horizon")
    const, coefs = mse_coefficients(W, mean0, cov0, t)
    lin = _accumulate(vmap, dict(enumerate(coefs)))
    return Posynomial.affine(const, lin)


def build_node_mse_posynomial(W, mean0, cov0, i: int, t: int, vmap: VariableMap | None = None) -> Posynomial:
    W = _W(W)
    m = W.shape[0]
    if vmap is None:
        vmap = VariableMap(m, max(t, 1))
    C = centering(m)
    P = _powers(W, t)
    mean_e = C @ evolve_mean(W, mean0, t)
    cov_e = C @ P[t] @ np.asarray(cov0, dtype=float) @ P[t].T @ C
    WmI = W - np.eye(m)
    per_s = {s: (C @ P[t - s - 1] @ WmI)[i] ** 2 for s in range(t)}
    return Posynomial.affine(float(cov_e[i, i] + mean_e[i] ** 2), _accumulate(vmap, per_s))
