"""Sign-indexed hard-instance families {P_z} with score decompositions.

Each construction provides, for every z in {-1,+1}^k and direction i, a
coefficient a_{z,i} and a score phi_{z,i} with

    dP_{z^i} / dP_z = 1 + a_{z,i} * phi_{z,i}      (pointwise),

where z^i flips coordinate i. Scores are mean zero and orthonormal in
L2(P_z), and |a_{z,i}| <= alpha uniformly. Coefficients are kept
nonnegative; phi carries whatever sign makes the density identity exact.
"""

from __future__ import annotations

import itertools
import json
import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import BudgetError, InvalidParameterError, UnsupportedOperationError
from .families import DiscretePmf, ProductBernoulli, SphericalGaussian, lp_loss
from .quadrature import DEFAULT_NODES, gh_rule

Z_ENUM_CAP = 24  # exact max-over-z computations enumerate 2^k sign vectors


def flip(z: tuple, i: int) -> tuple:
    """z with coordinate i negated (0-based). An involution."""
    if not 0 <= i < len(z):
        raise InvalidParameterError(f"flip index {i} out of range for k={len(z)}")
    return z[:i] + (-z[i],) + z[i + 1:]


def enumerate_z(k: int) -> list[tuple]:
    if k > Z_ENUM_CAP:
        raise BudgetError(f"refusing to enumerate 2^{k} sign vectors")
    return list(itertools.product((-1, 1), repeat=k))


@dataclass(frozen=True, eq=False)
class PerturbedFamily:
    """A {P_z} collection plus its score system. Immutable and pure."""

    kind: str          # "bernoulli" | "gaussian" | "discrete"
    k: int             # perturbation dimension
    dim: int           # parameter dimension (d, or D for discrete)
    gamma: float
    tau: float
    alpha: float       # uniform bound on |a_{z,i}|
    n_nodes: int = DEFAULT_NODES  # quadrature size, Gaussian kind only

    # -- distributions ------------------------------------------------

    def dist(self, z: tuple):
        if self.kind == "bernoulli":
            return ProductBernoulli(self.theta(z))
        if self.kind == "gaussian":
            return SphericalGaussian(self.theta(z))
        return DiscretePmf(self.theta(z))

    def theta(self, z: tuple) -> np.ndarray:
        """Parameter vector of P_z (mean vector, or the pmf itself)."""
        zv = np.asarray(z, dtype=float)
        if self.kind == "bernoulli":
            return (self.gamma / 2.0) * (zv + 1.0)
        if self.kind == "gaussian":
            return self.gamma * (zv + 1.0)
        out = np.empty(self.dim)
        out[0::2] = 1.0 / self.dim - self.gamma * zv
        out[1::2] = 1.0 / self.dim + self.gamma * zv
        return out

    @cached_property
    def support(self) -> tuple:
        """Ordered finite support (not defined for the Gaussian kind)."""
        if self.kind == "bernoulli":
            return tuple(itertools.product((-1, 1), repeat=self.dim))
        if self.kind == "discrete":
            return tuple(range(self.dim))
        raise UnsupportedOperationError("Gaussian construction has no finite support")

    @cached_property
    def _support_array(self) -> np.ndarray:
        return np.array(self.support, dtype=float)

    def pmf(self, z: tuple) -> np.ndarray:
        """Probability vector of P_z over `support`."""
        if self.kind == "bernoulli":
            mu = self.theta(z)
            return np.prod((1.0 + self._support_array * mu) / 2.0, axis=1)
        if self.kind == "discrete":
            return self.theta(z)
        raise UnsupportedOperationError("Gaussian construction has no finite pmf")

    # -- score system ---------------------------------------------------

    def alpha_zi(self, z: tuple, i: int) -> float:
        if self.kind == "bernoulli":
            return self.gamma / math.sqrt(1.0 - self.gamma ** 2 * (1 + z[i]) / 2.0)
        return self.alpha  # gaussian and discrete use the uniform value

    def phi(self, z: tuple, i: int, x) -> float:
        """Score phi_{z,i}(x); x is a support symbol (or vector, Gaussian)."""
        if self.kind == "gaussian":
            xi = float(np.asarray(x, dtype=float).reshape(-1)[i])
            return float(self._phi1(z[i], np.array([xi]))[0])
        if self.kind == "bernoulli":
            xi = x[i]
            g, zi = self.gamma, z[i]
            return -zi * xi * math.sqrt(1.0 - g * g * (1 + zi) / 2.0) / (1.0 + (g / 2.0) * (1 + zi) * xi)
        g, zi, D = self.gamma, z[i], self.dim
        c = math.sqrt(2.0 * (1.0 - D * D * g * g))
        if x == 2 * i:
            return zi * math.sqrt(D) * (1.0 + D * g * zi) / c
        if x == 2 * i + 1:
            return -zi * math.sqrt(D) * (1.0 - D * g * zi) / c
        return 0.0

    def score_table(self, z: tuple) -> np.ndarray:
        """(k, |support|) table of phi_{z,i}(x) for finite kinds."""
        if self.kind == "bernoulli":
            X = self._support_array  # (N, d)
            zv = np.asarray(z, dtype=float)
            g = self.gamma
            scale = np.sqrt(1.0 - g * g * (1.0 + zv) / 2.0)  # (d,)
            num = -zv * X * scale
            den = 1.0 + (g / 2.0) * (1.0 + zv) * X
            return (num / den).T
        if self.kind == "discrete":
            table = np.zeros((self.k, self.dim))
            for i in range(self.k):
                for x in (2 * i, 2 * i + 1):
                    table[i, x] = self.phi(z, i, x)
            return table
        raise UnsupportedOperationError("Gaussian construction has no score table")

    def _phi1(self, zi: int, t: np.ndarray) -> np.ndarray:
        """Gaussian score as a function of the perturbed coordinate value."""
        g = self.gamma
        return (np.exp(-2.0 * g * t * zi + 2.0 * g * g * zi) - 1.0) / self.alpha

    def density_ratio_1d(self, zi: int, t: np.ndarray) -> np.ndarray:
        """dP_{z^i}/dP_z for the Gaussian kind, as a function of x_i."""
        g = self.gamma
        return np.exp(-2.0 * g * t * zi + 2.0 * g * g * zi)


@dataclass(frozen=True)
class GaussianScoreSplit:
    """Decomposition a*phi = c_lin * xi + c_rem * psi of the Gaussian score
    into a linear (subgaussian) part and an orthonormal remainder.
    """

    gamma: float
    alpha: float
    n_nodes: int = DEFAULT_NODES

    @property
    def coef_linear(self) -> float:
        return 2.0 * self.gamma

    @property
    def coef_remainder(self) -> float:
        g = self.gamma
        return math.sqrt(math.exp(4.0 * g * g) - 4.0 * g * g - 1.0)

    def xi_coord(self, zi: int, t: np.ndarray) -> np.ndarray:
        g = self.gamma
        return -zi * (np.asarray(t, dtype=float) - g * (zi + 1.0))

    def psi_coord(self, zi: int, t: np.ndarray) -> np.ndarray:
        g = self.gamma
        t = np.asarray(t, dtype=float)
        aphi = np.exp(-2.0 * g * t * zi + 2.0 * g * g * zi) - 1.0
        return (aphi - self.coef_linear * self.xi_coord(zi, t)) / self.coef_remainder

    def xi(self, z: tuple, i: int, x) -> float:
        t = float(np.asarray(x, dtype=float).reshape(-1)[i])
        return float(self.xi_coord(z[i], np.array([t]))[0])

    def psi(self, z: tuple, i: int, x) -> float:
        t = float(np.asarray(x, dtype=float).reshape(-1)[i])
        return float(self.psi_coord(z[i], np.array([t]))[0])


def bernoulli_perturbation(d: int, gamma: float, tau: float = 0.5) -> PerturbedFamily:
    """Product Bernoulli construction: mean (gamma/2)(z + 1), k = d."""
    _check_gamma_tau(gamma, tau)
    if d < 1:
        raise InvalidParameterError("dimension must be >= 1")
    return PerturbedFamily(kind="bernoulli", k=d, dim=d, gamma=gamma, tau=tau,
                           alpha=2.0 * gamma)


def gaussian_perturbation(d: int, gamma: float, tau: float = 0.5,
                          n_nodes: int = DEFAULT_NODES) -> tuple[PerturbedFamily, GaussianScoreSplit]:
    """Spherical Gaussian construction: mean gamma(z + 1), k = d.

    Also returns the linear/remainder split of the score used to recover
    bit-linear communication bounds.
    """
    _check_gamma_tau(gamma, tau)
    if d < 1:
        raise InvalidParameterError("dimension must be >= 1")
    alpha = math.sqrt(math.exp(4.0 * gamma * gamma) - 1.0)
    fam = PerturbedFamily(kind="gaussian", k=d, dim=d, gamma=gamma, tau=tau,
                          alpha=alpha, n_nodes=n_nodes)
    return fam, GaussianScoreSplit(gamma=gamma, alpha=alpha, n_nodes=n_nodes)


def discrete_perturbation(D: int, gamma: float, tau: float = 0.5) -> PerturbedFamily:
    """Paired-symbol pmf construction on [D]: k = D/2 perturbed pairs."""
    if D < 2 or D % 2 != 0:
        raise InvalidParameterError(f"D must be even and >= 2, got {D}")
    if abs(gamma) > 1.0 / (2 * D) + 1e-15:
        raise InvalidParameterError(f"|gamma| must be <= 1/(2D) = {1.0 / (2 * D)}, got {gamma}")
    if not 0 < tau <= 0.5:
        raise InvalidParameterError(f"tau must lie in (0, 1/2], got {tau}")
    alpha = 2.0 * math.sqrt(2.0 * D) * abs(gamma) / math.sqrt(1.0 - D * D * gamma * gamma)
    return PerturbedFamily(kind="discrete", k=D // 2, dim=D, gamma=gamma, tau=tau,
                           alpha=alpha)


def _check_gamma_tau(gamma: float, tau: float) -> None:
    if not 0 < gamma <= 0.5:
        raise InvalidParameterError(f"gamma must lie in (0, 1/2], got {gamma}")
    if not 0 < tau <= 0.5:
        raise InvalidParameterError(f"tau must lie in (0, 1/2], got {tau}")


# -- assumption validation ---------------------------------------------

PROXY_LAMBDA_GRID = tuple(np.linspace(-3.0, 3.0, 25))
PROXY_EXTRA_DIRECTIONS = 5  # random unit vectors added to the basis directions


@dataclass(frozen=True)
class AssumptionReport:
    construction: str
    gamma: float
    tol: float
    max_violations: dict
    passed: bool
    details: dict

    def to_json(self) -> str:
        doc = {
            "construction": self.construction,
            "gamma": self.gamma,
            "tol": self.tol,
            "max_violations": self.max_violations,
            "pass": self.passed,
            "details": self.details,
        }
        return json.dumps(doc, sort_keys=True)


def validate_assumptions(fam: PerturbedFamily, z_list: list[tuple] | None = None,
                         tol: float = 1e-10) -> AssumptionReport:
    """Numerically certify the density identity, orthonormality, the
    coefficient bound, and (Bernoulli) a subgaussianity proxy.

    Violations are reported, never raised. Finite kinds are checked by
    exact summation; the Gaussian kind by per-coordinate quadrature.
    """
    if fam.kind == "gaussian":
        return _validate_gaussian(fam, tol)

    if z_list is None:
        z_list = enumerate_z(fam.k)
    v_ident = v_mid = v_gram = v_alpha = 0.0
    for z in z_list:
        p = fam.pmf(z)
        table = fam.score_table(z)
        for i in range(fam.k):
            a = fam.alpha_zi(z, i)
            ratio = fam.pmf(flip(z, i)) / p
            v_ident = max(v_ident, float(np.max(np.abs(ratio - (1.0 + a * table[i])))))
            v_alpha = max(v_alpha, abs(a) - fam.alpha)
        v_mid = max(v_mid, float(np.max(np.abs(table @ p))))
        gram = (table * p) @ table.T
        v_gram = max(v_gram, float(np.max(np.abs(gram - np.eye(fam.k)))))

    violations = {
        "density_identity": v_ident,
        "mean_zero": v_mid,
        "gram_identity": v_gram,
        "alpha_bound": max(v_alpha, 0.0),
    }
    details: dict = {}
    if fam.kind == "bernoulli":
        sigma_sq = (1.0 + fam.gamma) / (1.0 - fam.gamma)
        proxy = _subgaussian_proxy(fam)
        violations["subgaussian_excess"] = max(proxy - sigma_sq, 0.0)
        details["subgaussian_proxy"] = proxy
        details["subgaussian_bound"] = sigma_sq
        details["proxy_grid"] = {
            "lambda": [PROXY_LAMBDA_GRID[0], PROXY_LAMBDA_GRID[-1], len(PROXY_LAMBDA_GRID)],
            "directions": f"{fam.k} basis + diagonal + {PROXY_EXTRA_DIRECTIONS} random (seed 0)",
        }
    passed = all(v <= tol for key, v in violations.items() if key != "subgaussian_excess")
    if "subgaussian_excess" in violations:
        passed = passed and violations["subgaussian_excess"] <= 1e-9
    return AssumptionReport(fam.kind, fam.gamma, tol, violations, passed, details)


def _subgaussian_proxy(fam: PerturbedFamily) -> float:
    """max over test directions v and a lambda grid of log MGF / (lambda^2/2)
    for <phi_z(X), v> under P_z.

    By coordinate symmetry of the construction, one representative z per
    count of +1 entries covers all sign vectors.
    """
    rng = np.random.default_rng(0)
    k = fam.k
    dirs = [np.eye(k)[i] for i in range(k)] + [np.ones(k) / math.sqrt(k)]
    for _ in range(PROXY_EXTRA_DIRECTIONS):
        v = rng.normal(size=k)
        dirs.append(v / np.linalg.norm(v))
    reps = [tuple([1] * m + [-1] * (k - m)) for m in range(k + 1)]
    worst = 0.0
    for z in reps:
        p = fam.pmf(z)
        table = fam.score_table(z)
        for v in dirs:
            proj = v @ table
            for lam in PROXY_LAMBDA_GRID:
                if lam == 0.0:
                    continue
                mgf = float(p @ np.exp(lam * proj))
                worst = max(worst, math.log(mgf) / (lam * lam / 2.0))
    return worst


def _validate_gaussian(fam: PerturbedFamily, tol: float) -> AssumptionReport:
    x, w = gh_rule(fam.n_nodes)
    split = GaussianScoreSplit(gamma=fam.gamma, alpha=fam.alpha, n_nodes=fam.n_nodes)
    v_ident = v_mid = v_gram = v_split = 0.0
    moments = {}
    means = {}
    for zi in (-1, 1):
        m = fam.gamma * (zi + 1.0)
        t = x + m
        phi = fam._phi1(zi, t)
        ratio = fam.density_ratio_1d(zi, t)
        v_ident = max(v_ident, float(np.max(np.abs(ratio - (1.0 + fam.alpha * phi)))))
        e1 = float(np.dot(w, phi))
        e2 = float(np.dot(w, phi * phi))
        v_mid = max(v_mid, abs(e1))
        v_gram = max(v_gram, abs(e2 - 1.0))
        means[zi] = e1
        # xi/psi: pointwise identity plus standardization of both parts
        xi = split.xi_coord(zi, t)
        psi = split.psi_coord(zi, t)
        resid = fam.alpha * phi - split.coef_linear * xi - split.coef_remainder * psi
        v_split = max(v_split, float(np.max(np.abs(resid))))
        moments[f"xi_mean[{zi:+d}]"] = float(np.dot(w, xi))
        moments[f"xi_second[{zi:+d}]"] = float(np.dot(w, xi * xi))
        moments[f"psi_mean[{zi:+d}]"] = float(np.dot(w, psi))
        moments[f"psi_second[{zi:+d}]"] = float(np.dot(w, psi * psi))
    # cross-coordinate orthogonality factorizes over independent coordinates
    v_gram = max(v_gram, abs(means[-1] * means[1]))
    v_split_moments = max(
        max(abs(moments[f"xi_mean[{s:+d}]"]) for s in (-1, 1)),
        max(abs(moments[f"xi_second[{s:+d}]"] - 1.0) for s in (-1, 1)),
        max(abs(moments[f"psi_mean[{s:+d}]"]) for s in (-1, 1)),
        max(abs(moments[f"psi_second[{s:+d}]"] - 1.0) for s in (-1, 1)),
    )
    violations = {
        "density_identity": v_ident,
        "mean_zero": v_mid,
        "gram_identity": v_gram,
        "alpha_bound": 0.0,
        "split_identity": v_split,
        "split_moments": v_split_moments,
    }
    passed = (v_ident <= tol and v_mid <= tol and v_gram <= tol
              and v_split <= 1e-10 and v_split_moments <= tol)
    details = {"n_nodes": fam.n_nodes, "split_moments": moments}
    return AssumptionReport(fam.kind, fam.gamma, tol, violations, passed, details)


# -- sparsity of the prior ----------------------------------------------

def binomial_cdf(n: int, q: float, cut: int) -> float:
    """P[Bin(n, q) <= cut] by direct pmf summation."""
    if cut < 0:
        return 0.0
    if cut >= n:
        return 1.0
    if q <= 0.0:
        return 1.0
    if q >= 1.0:
        return 0.0
    term = (1.0 - q) ** n
    total = term
    for j in range(1, cut + 1):
        term *= (n - j + 1) / j * (q / (1.0 - q))
        total += term
    return min(total, 1.0)


def sparsity_prior_prob(d: int, tau: float, s: int) -> float:
    """Exact P[#{i : Z_i = +1} <= 2 tau d] for Z ~ Rademacher(tau)^d.

    With tau = s/(2d) this is the probability that the drawn mean vector
    is s-sparse; in the regime tau d >= 4 log2 d it is at least 1 - tau/4.
    """
    if abs(tau - s / (2.0 * d)) > 1e-12:
        warnings.warn(f"tau={tau} differs from s/(2d)={s / (2 * d)}", stacklevel=2)
    if tau * d < 4 * math.log2(d):
        warnings.warn(
            f"tau*d = {tau * d:.3g} < 4 log2 d = {4 * math.log2(d):.3g}: "
            "outside the high-probability-sparsity regime", stacklevel=2)
    return binomial_cdf(d, tau, int(math.floor(2.0 * tau * d)))


def pairwise_distance_law(fam: PerturbedFamily, z: tuple, z2: tuple, p: float) -> float:
    """Exact lp(theta_z, theta_z2) predicted from the Hamming distance.

    Per flipped coordinate the parameter gap is gamma (Bernoulli),
    2 gamma (Gaussian), or 2 gamma on each of two pmf entries (discrete).
    """
    ham = sum(1 for a, b in zip(z, z2) if a != b)
    if ham == 0:
        return 0.0
    g = abs(fam.gamma)
    if fam.kind == "bernoulli":
        return g * ham ** (1.0 / p) if p != math.inf else g
    if fam.kind == "gaussian":
        return 2.0 * g * ham ** (1.0 / p) if p != math.inf else 2.0 * g
    if p == math.inf:
        return 2.0 * g
    return 2.0 * g * (2.0 * ham) ** (1.0 / p)


def check_distance_law(fam: PerturbedFamily, z: tuple, z2: tuple, p: float) -> float:
    """|lp(theta_z, theta_z2) - predicted|; zero when the law holds."""
    actual = lp_loss(fam.theta(z), fam.theta(z2), p)
    return abs(actual - pairwise_distance_law(fam, z, z2, p))
