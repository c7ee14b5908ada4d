"""Exact transcript-distribution engine for small sequentially interactive
protocols, the channel information functionals, and the inequality
certifiers built on them.

Everything here is exact up to float summation: transcript distributions
are enumerated in full product form, mixtures and divergences are computed
on the resulting tables, and each certifier reports the slack it observed.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .channels import Channel, ConstraintSpec, satisfies_constraint
from .errors import BudgetError, InvalidParameterError
from .families import lp_loss
from .perturbations import PerturbedFamily, enumerate_z, flip

TRANSCRIPT_LOG2_BUDGET = 24   # product transcript space capped at 2^24
THEOREM_Z_CAP = 8             # full 2^k enumeration in the theorem RHS
MIXTURE_Z_CAP = 12
CUT_PASTE_CONSTANT = 7.0
THEOREM_CONSTANT = 7.0
SUBGAUSSIAN_CONSTANT = 14.0 * math.log(2.0)  # mutual information in bits
INEQ_TOL = 1e-9


@dataclass(frozen=True)
class Protocol:
    """A sequentially interactive protocol: player t's channel may depend on
    the public message prefix y^{t-1} (and an optional public seed).
    """

    n: int
    rule: Callable  # (t, prefix, public_seed) -> Channel, t 0-based
    constraint_specs: tuple[ConstraintSpec, ...] | None = None
    public_seed: int | None = None

    def channel_at(self, t: int, prefix: tuple) -> Channel:
        return self.rule(t, tuple(prefix), self.public_seed)

    @classmethod
    def from_channel_tree(cls, tree: dict, n: int,
                          constraint_specs: Sequence[ConstraintSpec] | None = None) -> "Protocol":
        """Protocol backed by an explicit {(t, prefix): Channel} table."""

        def rule(t, prefix, _seed):
            return tree[(t, prefix)]

        specs = tuple(constraint_specs) if constraint_specs is not None else None
        return cls(n=n, rule=rule, constraint_specs=specs)

    @classmethod
    def uniform(cls, channel: Channel, n: int,
                constraint_specs: Sequence[ConstraintSpec] | None = None) -> "Protocol":
        """Every player applies the same channel, independent of messages."""
        specs = tuple(constraint_specs) if constraint_specs is not None else None
        return cls(n=n, rule=lambda t, prefix, _seed: channel, constraint_specs=specs)

    def round_alphabets(self) -> tuple[tuple, ...]:
        """Output alphabet per round, probed along the first-symbol prefix."""
        alphabets = []
        prefix: tuple = ()
        for t in range(self.n):
            ch = self.channel_at(t, prefix)
            alphabets.append(tuple(ch.outputs))
            prefix = prefix + (ch.outputs[0],)
        return tuple(alphabets)

    def validate(self) -> None:
        """Check every reachable channel against its round's constraint."""
        if self.constraint_specs is None:
            return
        if len(self.constraint_specs) != self.n:
            raise InvalidParameterError("need one ConstraintSpec per player")
        alphabets = self.round_alphabets()
        _budget_check([len(a) for a in alphabets])
        for t in range(self.n):
            for prefix in itertools.product(*alphabets[:t]):
                ch = self.channel_at(t, prefix)
                if not satisfies_constraint(ch, self.constraint_specs[t]):
                    raise InvalidParameterError(
                        f"channel at round {t}, prefix {prefix} violates {self.constraint_specs[t]}")


@dataclass(frozen=True, eq=False)
class TranscriptDist:
    """Exact probability table over message tuples, stored flat in C order
    over the per-round alphabets.
    """

    alphabets: tuple[tuple, ...]
    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if abs(probs.sum() - 1.0) > 1e-10:
            raise InvalidParameterError("transcript probabilities must sum to 1 within 1e-10")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def n_rounds(self) -> int:
        return len(self.alphabets)

    def outcomes(self):
        return itertools.product(*self.alphabets)

    def prob(self, y: tuple) -> float:
        idx = 0
        for t, (sym, alpha) in enumerate(zip(y, self.alphabets)):
            idx = idx * len(alpha) + alpha.index(sym)
        return float(self.probs[idx])

    @property
    def table(self) -> dict:
        """Dict view with zero-probability transcripts pruned."""
        return {y: float(p) for y, p in zip(self.outcomes(), self.probs) if p > 0.0}


def _budget_check(sizes: Sequence[int]) -> None:
    if sum(math.log2(s) for s in sizes) > TRANSCRIPT_LOG2_BUDGET:
        raise BudgetError(f"transcript space of {np.prod(sizes)} outcomes exceeds 2^{TRANSCRIPT_LOG2_BUDGET}")


def tv(p: np.ndarray | TranscriptDist, q: np.ndarray | TranscriptDist) -> float:
    """Total variation distance, half the l1 gap."""
    p = p.probs if isinstance(p, TranscriptDist) else np.asarray(p, dtype=float)
    q = q.probs if isinstance(q, TranscriptDist) else np.asarray(q, dtype=float)
    return 0.5 * float(np.abs(p - q).sum())


def hellinger_sq(p: np.ndarray | TranscriptDist, q: np.ndarray | TranscriptDist) -> float:
    """Squared Hellinger distance, (1/2) sum (sqrt p - sqrt q)^2."""
    p = p.probs if isinstance(p, TranscriptDist) else np.asarray(p, dtype=float)
    q = q.probs if isinstance(q, TranscriptDist) else np.asarray(q, dtype=float)
    return 0.5 * float(((np.sqrt(p) - np.sqrt(q)) ** 2).sum())


def _tv_h2_checked(p: np.ndarray, q: np.ndarray) -> tuple[float, float]:
    """TV and H^2 together, asserting TV^2 <= 2 H^2 <= 2 TV on the pair."""
    t = tv(p, q)
    h2 = hellinger_sq(p, q)
    assert t * t <= 2.0 * h2 + 1e-12 and h2 <= t + 1e-12, (t, h2)
    return t, h2


# -- transcript enumeration ----------------------------------------------

def _table_from_round_pmfs(proto: Protocol, inputs: tuple,
                           round_pmfs: Sequence[np.ndarray]) -> TranscriptDist:
    """Exact transcript table when player t's sample has pmf round_pmfs[t]
    over `inputs`. Channels are message-dependent via the protocol rule.
    """
    n = proto.n
    alphabets = proto.round_alphabets()
    sizes = [len(a) for a in alphabets]
    _budget_check(sizes)
    strides = [int(np.prod(sizes[t + 1:], dtype=object)) for t in range(n)]
    probs = np.zeros(int(np.prod(sizes, dtype=object)))

    def walk(t: int, prefix: tuple, weight: float, idx: int) -> None:
        if weight == 0.0:
            return  # zero-probability branch: pruned
        if t == n:
            probs[idx] = weight
            return
        ch = proto.channel_at(t, prefix)
        if tuple(ch.outputs) != alphabets[t]:
            raise InvalidParameterError(f"round {t} channels disagree on the output alphabet")
        if ch.inputs != inputs:
            raise InvalidParameterError("channel input space does not match the family support")
        dist = round_pmfs[t] @ ch.kernel
        for iy, y in enumerate(alphabets[t]):
            walk(t + 1, prefix + (y,), weight * dist[iy], idx + strides[t] * iy)

    walk(0, (), 1.0, 0)
    return TranscriptDist(alphabets, probs)


def transcript_dist(proto: Protocol, fam: PerturbedFamily, z: tuple,
                    n: int | None = None) -> TranscriptDist:
    """Distribution of the transcript when all players sample from P_z."""
    proto = _with_rounds(proto, n)
    pmf = fam.pmf(z)
    return _table_from_round_pmfs(proto, fam.support, [pmf] * proto.n)


def _with_rounds(proto: Protocol, n: int | None) -> Protocol:
    if n is None or n == proto.n:
        return proto
    return Protocol(n=n, rule=proto.rule, constraint_specs=None, public_seed=proto.public_seed)


def transcript_tables_all(proto: Protocol, fam: PerturbedFamily,
                          n: int | None = None) -> dict[tuple, np.ndarray]:
    """Flat transcript tables for every z at once (vectorized over z)."""
    proto = _with_rounds(proto, n)
    zs = enumerate_z(fam.k)
    pmfs = np.stack([fam.pmf(z) for z in zs])  # (Z, X)
    alphabets = proto.round_alphabets()
    sizes = [len(a) for a in alphabets]
    _budget_check(sizes)
    strides = [int(np.prod(sizes[t + 1:], dtype=object)) for t in range(proto.n)]
    out = np.zeros((len(zs), int(np.prod(sizes, dtype=object))))

    def walk(t: int, prefix: tuple, weights: np.ndarray, idx: int) -> None:
        if not np.any(weights):
            return
        if t == proto.n:
            out[:, idx] = weights
            return
        ch = proto.channel_at(t, prefix)
        if tuple(ch.outputs) != alphabets[t]:
            raise InvalidParameterError(f"round {t} channels disagree on the output alphabet")
        if ch.inputs != fam.support:
            raise InvalidParameterError("channel input space does not match the family support")
        dists = pmfs @ ch.kernel  # (Z, Y)
        for iy, y in enumerate(alphabets[t]):
            walk(t + 1, prefix + (y,), weights * dists[:, iy], idx + strides[t] * iy)

    walk(0, (), np.ones(len(zs)), 0)
    return {z: out[j] for j, z in enumerate(zs)}


def _prior_weight(z: tuple, tau: float, skip: int | None = None) -> float:
    w = 1.0
    for j, zj in enumerate(z):
        if j == skip:
            continue
        w *= tau if zj == 1 else (1.0 - tau)
    return w


def mixture_pm(proto: Protocol, fam: PerturbedFamily, tau: float, i: int,
               sign: int, n: int | None = None) -> TranscriptDist:
    """E_Z[p_Z^{Y^n} | Z_i = sign] under Z ~ Rademacher(tau)^k."""
    if fam.k > MIXTURE_Z_CAP:
        raise BudgetError(f"mixture over 2^{fam.k - 1} terms exceeds the cap k <= {MIXTURE_Z_CAP}")
    if sign not in (-1, 1):
        raise InvalidParameterError("sign must be -1 or +1")
    tables = transcript_tables_all(proto, fam, n)
    alphabets = _with_rounds(proto, n).round_alphabets()
    acc = None
    for z, tab in tables.items():
        if z[i] != sign:
            continue
        w = _prior_weight(z, tau, skip=i)
        acc = w * tab if acc is None else acc + w * tab
    return TranscriptDist(alphabets, acc)


def _mixture_tvs(tables: dict[tuple, np.ndarray], tau: float, k: int) -> list[float]:
    tvs = []
    for i in range(k):
        plus = sum(_prior_weight(z, tau, i) * tab for z, tab in tables.items() if z[i] == 1)
        minus = sum(_prior_weight(z, tau, i) * tab for z, tab in tables.items() if z[i] == -1)
        t, _ = _tv_h2_checked(plus, minus)
        tvs.append(t)
    return tvs


def avg_discrepancy(proto: Protocol, fam: PerturbedFamily, tau: float,
                    n: int | None = None) -> float:
    """(1/k) sum_i TV(p_{+i}, p_{-i}) over the conditional transcript mixtures."""
    tables = transcript_tables_all(proto, fam, n)
    return float(np.mean(_mixture_tvs(tables, tau, fam.k)))


# -- channel information functionals --------------------------------------

def _align_dist(ch: Channel, p) -> np.ndarray:
    vec = np.asarray(p, dtype=float)
    if vec.shape != (len(ch.inputs),):
        raise InvalidParameterError("distribution does not match the channel input space")
    return vec


def info_functional(ch: Channel, fam: PerturbedFamily, z: tuple) -> float:
    """sum_i sum_y E_Pz[phi_{z,i} W(y|X)]^2 / E_Pz[W(y|X)].

    The trace-of-Fisher-style channel functional appearing on the
    contraction bound's right-hand side; 0/0 terms contribute 0.
    """
    if fam.kind == "gaussian":
        return _info_functional_gaussian(ch, fam, z)
    p = fam.pmf(z)
    scores = fam.score_table(z)
    vals = _info_values(ch.kernel, p[None, :], scores[None, :, :])
    return float(vals[0])


def _info_values(kernel: np.ndarray, pmfs: np.ndarray, scores: np.ndarray) -> np.ndarray:
    """Batched info functional: pmfs (Z, X), scores (Z, k, X) -> (Z,)."""
    den = pmfs @ kernel                                       # (Z, Y)
    num = np.einsum("zkx,zx,xy->zky", scores, pmfs, kernel)   # (Z, k, Y)
    mask = den > 0.0
    # Cauchy-Schwarz: zero denominator forces a zero numerator
    dead = ~mask
    if np.any(dead):
        assert np.max(np.abs(num[np.broadcast_to(dead[:, None, :], num.shape)])) <= 1e-12
    safe_den = np.where(mask, den, 1.0)
    terms = np.where(mask[:, None, :], num * num / safe_den[:, None, :], 0.0)
    return terms.sum(axis=(1, 2))


def _info_functional_gaussian(ch: Channel, fam: PerturbedFamily, z: tuple) -> float:
    # Coordinatewise channel: scores of other coordinates are mean zero and
    # independent of the message, so only the read coordinate contributes.
    from .quadrature import gh_rule

    if ch.is_finite:
        raise InvalidParameterError("Gaussian info functional needs a coordinate channel")
    c = ch.coordinate
    x, w = gh_rule(fam.n_nodes)
    t = x + fam.gamma * (z[c] + 1.0)
    phi = fam._phi1(z[c], t)
    rows = np.stack([np.asarray(ch.kernel(ti), dtype=float) for ti in t])  # (nodes, Y)
    den = w @ rows
    num = (w * phi) @ rows
    total = 0.0
    for y in range(ch.n_outputs):
        if den[y] > 0.0:
            total += num[y] ** 2 / den[y]
        else:
            assert abs(num[y]) <= 1e-12
    return float(total)


def var_functional(ch: Channel, p) -> float:
    """sum_y Var_P[W(y|X)] / E_P[W(y|X)], the orthonormal-case bound."""
    vec = _align_dist(ch, p)
    return float(_var_values(ch.kernel, vec[None, :])[0])


def _var_values(kernel: np.ndarray, pmfs: np.ndarray) -> np.ndarray:
    den = pmfs @ kernel
    second = pmfs @ (kernel * kernel)
    var = second - den * den
    mask = den > 0.0
    safe = np.where(mask, den, 1.0)
    return np.where(mask, var / safe, 0.0).sum(axis=1)


def mutual_info_bits(ch: Channel, p) -> float:
    """I(X; Y) in bits between the channel input X ~ P and output Y."""
    vec = _align_dist(ch, p)
    return float(_mi_values(ch.kernel, vec[None, :])[0])


def _mi_values(kernel: np.ndarray, pmfs: np.ndarray) -> np.ndarray:
    out = pmfs @ kernel  # (Z, Y)
    live = (pmfs[:, :, None] > 0.0) & (kernel[None, :, :] > 0.0)  # (Z, X, Y)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = kernel[None, :, :] / out[:, None, :]
        logs = np.where(live, np.log2(np.where(live, ratio, 1.0)), 0.0)
    vals = np.einsum("zx,xy,zxy->z", pmfs, kernel, logs)
    return np.maximum(vals, 0.0)


# -- certifiers -----------------------------------------------------------

@dataclass(frozen=True)
class TheoremCertificate:
    """Record of one contraction-bound check (plus its two variants)."""

    k: int
    n: int
    tau: float
    alpha: float
    lhs: float               # average discrepancy
    rhs_main: float          # (7/k) alpha^2 sum_t max_{z,W} info functional
    rhs_var: float
    rhs_subgaussian: float | None
    sigma_sq: float | None
    rhs_grid: float | None   # max extended over a caller-supplied channel grid
    tol: float = INEQ_TOL

    @property
    def lhs_sq(self) -> float:
        return self.lhs * self.lhs

    @property
    def slack_main(self) -> float:
        return self.rhs_main - self.lhs_sq

    @property
    def achieved_ratio(self) -> float:
        """lhs^2 / rhs: how much of the stated constant the instance uses."""
        if self.rhs_main > 0.0:
            return self.lhs_sq / self.rhs_main
        return 0.0 if self.lhs_sq == 0.0 else math.inf

    @property
    def pass_main(self) -> bool:
        return self.lhs_sq <= self.rhs_main + self.tol

    @property
    def pass_var(self) -> bool:
        return self.lhs_sq <= self.rhs_var + self.tol

    @property
    def pass_subgaussian(self) -> bool:
        if self.rhs_subgaussian is None:
            return True
        return self.lhs_sq <= self.rhs_subgaussian + self.tol

    @property
    def passed(self) -> bool:
        return self.pass_main and self.pass_var and self.pass_subgaussian

    def to_dict(self) -> dict:
        return {
            "k": self.k, "n": self.n, "tau": self.tau, "alpha": self.alpha,
            "lhs": self.lhs, "lhs_sq": self.lhs_sq,
            "rhs_main": self.rhs_main, "rhs_var": self.rhs_var,
            "rhs_subgaussian": self.rhs_subgaussian, "sigma_sq": self.sigma_sq,
            "rhs_grid": self.rhs_grid, "achieved_ratio": self.achieved_ratio,
            "pass": self.passed,
        }


def check_theorem_main(proto: Protocol, fam: PerturbedFamily, tau: float,
                       n: int | None = None,
                       channel_grid: Sequence[Channel] | None = None,
                       sigma_sq: float | None = None) -> TheoremCertificate:
    """Certify the contraction bound on an exactly enumerable instance.

    The max over channels ranges over every channel the protocol rule can
    select (all message prefixes, reachable with any probability), which is
    the set the bound's proof actually maximizes over; a caller-supplied
    grid can extend it, and that larger value is reported separately.
    """
    proto = _with_rounds(proto, n)
    if fam.k > THEOREM_Z_CAP:
        raise BudgetError(f"theorem check enumerates 2^k channels maxima; k <= {THEOREM_Z_CAP}")
    zs = enumerate_z(fam.k)
    tables = transcript_tables_all(proto, fam)
    lhs = float(np.mean(_mixture_tvs(tables, tau, fam.k)))

    pmfs = np.stack([fam.pmf(z) for z in zs])
    scores = np.stack([fam.score_table(z) for z in zs])
    alphabets = proto.round_alphabets()

    def channel_maxima(kernel: np.ndarray) -> tuple[float, float, float]:
        info = _info_values(kernel, pmfs, scores)
        var = _var_values(kernel, pmfs)
        mi = _mi_values(kernel, pmfs)
        # Bessel step and the finite-alphabet bound, asserted opportunistically
        assert np.all(info <= var + INEQ_TOL), "info functional exceeded its variance bound"
        assert np.all(var <= kernel.shape[1] + INEQ_TOL), "variance functional exceeded |Y|"
        return float(info.max()), float(var.max()), float(mi.max())

    sum_info = sum_var = sum_mi = 0.0
    grid_info = 0.0
    for t in range(proto.n):
        best_info = best_var = best_mi = 0.0
        for prefix in itertools.product(*alphabets[:t]):
            ch = proto.channel_at(t, prefix)
            i_, v_, m_ = channel_maxima(ch.kernel)
            best_info = max(best_info, i_)
            best_var = max(best_var, v_)
            best_mi = max(best_mi, m_)
        grid_best = best_info
        if channel_grid is not None:
            for ch in channel_grid:
                if ch.inputs != fam.support:
                    raise InvalidParameterError("grid channel input space does not match the family")
                grid_best = max(grid_best, channel_maxima(ch.kernel)[0])
        sum_info += best_info
        sum_var += best_var
        sum_mi += best_mi
        grid_info += grid_best

    scale = THEOREM_CONSTANT / fam.k * fam.alpha ** 2
    rhs_main = scale * sum_info
    rhs_var = scale * sum_var
    if sigma_sq is None and fam.kind == "bernoulli":
        sigma_sq = (1.0 + fam.gamma) / (1.0 - fam.gamma)
    rhs_sub = None
    if sigma_sq is not None:
        rhs_sub = SUBGAUSSIAN_CONSTANT / fam.k * fam.alpha ** 2 * sigma_sq * sum_mi
    rhs_grid = scale * grid_info if channel_grid is not None else None
    return TheoremCertificate(k=fam.k, n=proto.n, tau=tau, alpha=fam.alpha,
                              lhs=lhs, rhs_main=rhs_main, rhs_var=rhs_var,
                              rhs_subgaussian=rhs_sub, sigma_sq=sigma_sq,
                              rhs_grid=rhs_grid)


@dataclass(frozen=True)
class CutPasteCertificate:
    lhs_h2: float
    per_player_h2: tuple[float, ...]
    constant: float = CUT_PASTE_CONSTANT
    tol: float = INEQ_TOL

    @property
    def rhs(self) -> float:
        return self.constant * sum(self.per_player_h2)

    @property
    def ratio(self) -> float:
        s = sum(self.per_player_h2)
        if s > 0.0:
            return self.lhs_h2 / s
        return 0.0 if self.lhs_h2 == 0.0 else math.inf

    @property
    def passed(self) -> bool:
        return self.lhs_h2 <= self.rhs + self.tol

    def to_dict(self) -> dict:
        return {"lhs_h2": self.lhs_h2, "per_player_h2": list(self.per_player_h2),
                "rhs": self.rhs, "ratio": self.ratio, "pass": self.passed}


def check_cut_paste(proto: Protocol, fam: PerturbedFamily, z: tuple, i: int,
                    n: int | None = None) -> CutPasteCertificate:
    """Certify H^2(p_z, p_{z^i}) <= 7 sum_t H^2(p_z, p with player t swapped)."""
    proto = _with_rounds(proto, n)
    p_z = fam.pmf(z)
    p_zi = fam.pmf(flip(z, i))
    tab_z = _table_from_round_pmfs(proto, fam.support, [p_z] * proto.n)
    tab_zi = _table_from_round_pmfs(proto, fam.support, [p_zi] * proto.n)
    _tv_h2_checked(tab_z.probs, tab_zi.probs)
    lhs = hellinger_sq(tab_z, tab_zi)
    per_player = []
    for t in range(proto.n):
        pmfs = [p_z] * proto.n
        pmfs[t] = p_zi
        swapped = _table_from_round_pmfs(proto, fam.support, pmfs)
        per_player.append(hellinger_sq(tab_z, swapped))
    return CutPasteCertificate(lhs_h2=lhs, per_player_h2=tuple(per_player))


@dataclass(frozen=True)
class MeasureChangeCertificate:
    lhs: float
    rhs: float
    sigma_sq: float
    tol: float = INEQ_TOL

    @property
    def passed(self) -> bool:
        return self.lhs <= self.rhs + self.tol

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "sigma_sq": self.sigma_sq, "pass": self.passed}


def measure_change_check(p, phi_table, a, sigma_sq: float) -> MeasureChangeCertificate:
    """Certify ||E[Phi a]||^2 / E[a]^2 <= 2 s^2 (E[a ln a]/E[a] + ln(1/E[a])).

    Natural logarithms throughout. Phi must have mean-zero coordinates
    under p (independence and the MGF bound sigma_sq are the caller's
    responsibility; for +-1 coordinates sigma_sq = 1 by Hoeffding).
    """
    p = np.asarray(p, dtype=float)
    phi = np.asarray(phi_table, dtype=float)
    a = np.asarray(a, dtype=float)
    if np.any(a < 0):
        raise InvalidParameterError("the reweighting a must be nonnegative")
    e_a = float(p @ a)
    if e_a <= 0.0:
        raise InvalidParameterError("E[a] must be positive")
    if float(np.max(np.abs(phi @ p))) > 1e-9:
        raise InvalidParameterError("Phi coordinates must be mean zero under p")
    lhs = float(np.sum((phi @ (p * a)) ** 2)) / e_a ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        a_ln_a = np.where(a > 0.0, a * np.log(np.where(a > 0.0, a, 1.0)), 0.0)
    rhs = 2.0 * sigma_sq * (float(p @ a_ln_a) / e_a + math.log(1.0 / e_a))
    return MeasureChangeCertificate(lhs=lhs, rhs=rhs, sigma_sq=sigma_sq)


@dataclass(frozen=True)
class AssouadCertificate:
    tau: float
    per_coordinate_error: tuple[float, ...]
    per_coordinate_tv: tuple[float, ...]
    tol: float = INEQ_TOL

    @property
    def bounds(self) -> tuple[float, ...]:
        return tuple(self.tau * (1.0 - t) for t in self.per_coordinate_tv)

    @property
    def passed(self) -> bool:
        return all(e >= b - self.tol for e, b in zip(self.per_coordinate_error, self.bounds))

    @property
    def scaled_total_error(self) -> float:
        """(1/(tau k)) sum_i Pr[Z_i != Zhat_i], the Assouad chain's middle term."""
        k = len(self.per_coordinate_error)
        return float(sum(self.per_coordinate_error)) / (self.tau * k)

    @property
    def avg_tv(self) -> float:
        return float(np.mean(self.per_coordinate_tv))

    def to_dict(self) -> dict:
        return {"tau": self.tau, "per_coordinate_error": list(self.per_coordinate_error),
                "per_coordinate_tv": list(self.per_coordinate_tv),
                "bounds": list(self.bounds), "scaled_total_error": self.scaled_total_error,
                "avg_tv": self.avg_tv, "pass": self.passed}


def assouad_inequality_check(proto: Protocol, fam: PerturbedFamily, tau: float,
                             decoder: Callable[[tuple], tuple],
                             n: int | None = None) -> AssouadCertificate:
    """Certify Pr[Z_i != Zhat_i] >= tau (1 - TV(p_{+i}, p_{-i})) for each i,
    with the error probability computed exactly from the joint table.
    """
    proto = _with_rounds(proto, n)
    tables = transcript_tables_all(proto, fam)
    alphabets = proto.round_alphabets()
    outcomes = list(itertools.product(*alphabets))
    zhat = np.array([decoder(y) for y in outcomes])  # (ny, k)
    errors = np.zeros(fam.k)
    for z, tab in tables.items():
        w = _prior_weight(z, tau)
        mism = (zhat != np.asarray(z)[None, :])
        errors += w * (tab @ mism)
    tvs = _mixture_tvs(tables, tau, fam.k)
    return AssouadCertificate(tau=tau,
                              per_coordinate_error=tuple(float(e) for e in errors),
                              per_coordinate_tv=tuple(tvs))


# -- decoders -------------------------------------------------------------

def make_bayes_decoder(proto: Protocol, fam: PerturbedFamily, tau: float,
                       n: int | None = None) -> Callable[[tuple], tuple]:
    """Per-coordinate MAP decoder from the exact joint (Z, transcript) table."""
    proto = _with_rounds(proto, n)
    tables = transcript_tables_all(proto, fam)
    alphabets = proto.round_alphabets()
    ny = int(np.prod([len(a) for a in alphabets], dtype=object))
    post_plus = np.zeros((fam.k, ny))
    total = np.zeros(ny)
    for z, tab in tables.items():
        w = _prior_weight(z, tau)
        total += w * tab
        for i in range(fam.k):
            if z[i] == 1:
                post_plus[i] += w * tab
    # ties (posterior exactly 1/2) break toward -1, the majority class
    zhat = np.where(post_plus > 0.5 * total[None, :], 1, -1)
    index = {y: j for j, y in enumerate(itertools.product(*alphabets))}

    def decoder(y: tuple) -> tuple:
        return tuple(int(v) for v in zhat[:, index[tuple(y)]])

    return decoder


def nearest_z(fam: PerturbedFamily, theta_hat: np.ndarray, p: float) -> tuple:
    """argmin_z lp(theta_z, theta_hat), ties to the lexicographically
    smallest z (with -1 ordered before +1)."""
    best = None
    best_loss = math.inf
    for z in enumerate_z(fam.k):
        loss = lp_loss(fam.theta(z), theta_hat, p)
        if loss < best_loss - 1e-15:
            best, best_loss = z, loss
    return best


def make_lp_decoder(fam: PerturbedFamily, p: float,
                    theta_estimator: Callable[[tuple], np.ndarray]) -> Callable[[tuple], tuple]:
    """Decoder projecting a transcript-based estimate onto the nearest theta_z."""

    def decoder(y: tuple) -> tuple:
        return nearest_z(fam, theta_estimator(tuple(y)), p)

    return decoder


def make_posterior_mean_estimator(proto: Protocol, fam: PerturbedFamily, tau: float,
                                  n: int | None = None) -> Callable[[tuple], np.ndarray]:
    """theta_hat(y) = E[theta_Z | transcript = y], a natural plug-in estimate."""
    proto = _with_rounds(proto, n)
    tables = transcript_tables_all(proto, fam)
    alphabets = proto.round_alphabets()
    ny = int(np.prod([len(a) for a in alphabets], dtype=object))
    num = np.zeros((ny, fam.dim))
    den = np.zeros(ny)
    for z, tab in tables.items():
        w = _prior_weight(z, tau)
        den += w * tab
        num += (w * tab)[:, None] * fam.theta(z)[None, :]
    safe = np.where(den > 0.0, den, 1.0)
    means = num / safe[:, None]
    index = {y: j for j, y in enumerate(itertools.product(*alphabets))}

    def estimator(y: tuple) -> np.ndarray:
        return means[index[tuple(y)]]

    return estimator


# -- Monte Carlo consistency ----------------------------------------------

def simulate_transcripts(proto: Protocol, fam: PerturbedFamily, z: tuple,
                         runs: int, rng: np.random.Generator,
                         n: int | None = None) -> np.ndarray:
    """Simulate `runs` protocol executions; returns counts over the flat
    transcript index (same layout as TranscriptDist.probs).
    """
    proto = _with_rounds(proto, n)
    alphabets = proto.round_alphabets()
    sizes = [len(a) for a in alphabets]
    _budget_check(sizes)
    pmf = fam.pmf(z)
    nx = len(fam.support)
    groups: dict[tuple, np.ndarray] = {(): np.arange(runs)}
    idx = np.zeros(runs, dtype=np.int64)
    for t in range(proto.n):
        stride = int(np.prod(sizes[t + 1:], dtype=object))
        new_groups: dict[tuple, np.ndarray] = {}
        for prefix, members in groups.items():
            ch = proto.channel_at(t, prefix)
            xs = rng.choice(nx, size=members.size, p=pmf)
            rows = ch.kernel[xs]  # (m, Y)
            u = rng.random(members.size)
            ys = (u[:, None] > np.cumsum(rows, axis=1)).sum(axis=1)
            ys = np.minimum(ys, sizes[t] - 1)
            idx[members] += stride * ys
            for iy in range(sizes[t]):
                sub = members[ys == iy]
                if sub.size:
                    new_groups[prefix + (alphabets[t][iy],)] = sub
        groups = new_groups
    counts = np.bincount(idx, minlength=int(np.prod(sizes, dtype=object)))
    return counts
