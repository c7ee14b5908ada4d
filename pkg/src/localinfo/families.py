"""Parametric families (product Bernoulli, spherical Gaussian, discrete pmf)
and lp loss evaluation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import BudgetError, InvalidParameterError

_ENUM_DIM_CAP = 20  # 2^d support enumeration guard


@dataclass(frozen=True, eq=False)
class ProductBernoulli:
    """Product distribution on {-1,+1}^d with mean vector mu in [-1,1]^d.

    Coordinate j takes +1 with probability (1 + mu_j) / 2. The optional
    sparsity bound is metadata only, validated at construction.
    """

    mean: np.ndarray
    sparsity: int | None = None

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        if mean.ndim != 1 or mean.size == 0:
            raise InvalidParameterError("mean must be a nonempty vector")
        if np.max(np.abs(mean)) > 1.0 + 1e-12:
            raise InvalidParameterError("mean must lie in [-1, 1]^d")
        if self.sparsity is not None and int(np.count_nonzero(mean)) > self.sparsity:
            raise InvalidParameterError("mean violates the declared sparsity bound")
        mean.setflags(write=False)
        object.__setattr__(self, "mean", mean)

    @property
    def dim(self) -> int:
        return self.mean.size

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """n i.i.d. samples as an (n, d) array of +-1."""
        u = rng.random((n, self.dim))
        return np.where(u < (1.0 + self.mean) / 2.0, 1, -1)

    def support(self) -> tuple:
        if self.dim > _ENUM_DIM_CAP:
            raise BudgetError(f"cannot enumerate {{-1,+1}}^{self.dim}")
        return tuple(itertools.product((-1, 1), repeat=self.dim))

    def pmf(self, support: tuple | None = None) -> np.ndarray:
        """Probability vector over the (enumerated) support."""
        support = support or self.support()
        xs = np.array(support, dtype=float)
        return np.prod((1.0 + xs * self.mean) / 2.0, axis=1)


@dataclass(frozen=True, eq=False)
class SphericalGaussian:
    """N(mu, I_d) with mu in [-1,1]^d."""

    mean: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        if mean.ndim != 1 or mean.size == 0:
            raise InvalidParameterError("mean must be a nonempty vector")
        if np.max(np.abs(mean)) > 1.0 + 1e-12:
            raise InvalidParameterError("mean must lie in [-1, 1]^d")
        mean.setflags(write=False)
        object.__setattr__(self, "mean", mean)

    @property
    def dim(self) -> int:
        return self.mean.size

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.normal(size=(n, self.dim)) + self.mean


@dataclass(frozen=True, eq=False)
class DiscretePmf:
    """Probability mass function over symbols 0..D-1."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 1 or probs.size == 0:
            raise InvalidParameterError("probs must be a nonempty vector")
        if np.any(probs < -1e-15):
            raise InvalidParameterError("probabilities must be nonnegative")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise InvalidParameterError("probabilities must sum to 1 within 1e-12")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def n_symbols(self) -> int:
        return self.probs.size

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.choice(self.n_symbols, size=n, p=self.probs)

    def support(self) -> tuple:
        return tuple(range(self.n_symbols))

    def pmf(self, support: tuple | None = None) -> np.ndarray:
        return np.array(self.probs)


def lp_loss(u, v, p: float) -> float:
    """lp distance (sum |u_i - v_i|^p)^(1/p); max coordinate gap for p = inf."""
    if p != math.inf and p < 1:
        raise InvalidParameterError(f"lp loss needs p >= 1, got {p}")
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise InvalidParameterError("vectors must have equal length")
    gaps = np.abs(u - v)
    if p == math.inf:
        return float(gaps.max()) if gaps.size else 0.0
    return float(np.sum(gaps ** p) ** (1.0 / p))


def linf_surrogate_exponent(s: int) -> int:
    """The finite exponent ceil(2 log2 s) used to route l-infinity estimation."""
    if s < 2:
        return 2
    return max(1, math.ceil(2 * math.log2(s)))
