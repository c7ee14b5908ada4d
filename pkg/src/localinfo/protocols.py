"""Matching upper-bound estimators: the 1-bit LDP pruning protocol, the
b-bit forwarding protocol, and the sign reduction from Gaussian to
Bernoulli mean estimation.

Each player is used once and contributes one message. Sources hand out
player samples; estimators track how many players they consume and never
exceed the budget n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channels import make_rr_channel, make_subset_forward_channel, rr_bias
from .errors import ConfigurationError, DomainError, InvalidParameterError
from .families import ProductBernoulli, SphericalGaussian

ETA = math.erf(1.0 / math.sqrt(2.0))  # reachable range of sign means, ~0.6827


# -- player data sources ----------------------------------------------------

class BernoulliPlayerSource:
    """Live sampling from a product Bernoulli population.

    Only the requested coordinates are drawn, which is distributionally
    identical to sampling the full vector since coordinates are independent.
    """

    def __init__(self, family: ProductBernoulli, rng: np.random.Generator):
        self.family = family
        self.rng = rng
        self.consumed = 0

    def take(self, coords, m: int) -> np.ndarray:
        """(m, len(coords)) array of +-1 from the next m players."""
        coords = np.asarray(coords, dtype=int)
        p = (1.0 + self.family.mean[coords]) / 2.0
        self.consumed += m
        return np.where(self.rng.random((m, coords.size)) < p[None, :], 1, -1)


class GaussianSignPlayerSource:
    """Players observe N(mu, I) samples and forward coordinate signs."""

    def __init__(self, family: SphericalGaussian, rng: np.random.Generator):
        self.family = family
        self.rng = rng
        self.consumed = 0

    def take(self, coords, m: int) -> np.ndarray:
        coords = np.asarray(coords, dtype=int)
        x = self.rng.normal(size=(m, coords.size)) + self.family.mean[coords]
        self.consumed += m
        return np.where(x >= 0.0, 1, -1)


class ReplayPlayerSource:
    """Replays recorded samples, one player per record, for regression tests."""

    def __init__(self, samples: np.ndarray):
        samples = np.asarray(samples)
        if samples.ndim != 2:
            raise InvalidParameterError("replay data must be (players, d)")
        self.samples = samples
        self.consumed = 0

    @classmethod
    def from_file(cls, path) -> "ReplayPlayerSource":
        return cls(np.load(path))

    def take(self, coords, m: int) -> np.ndarray:
        coords = np.asarray(coords, dtype=int)
        if self.consumed + m > self.samples.shape[0]:
            raise ConfigurationError(
                f"replay source exhausted: need {m} more players, "
                f"have {self.samples.shape[0] - self.consumed}")
        block = self.samples[self.consumed:self.consumed + m][:, coords]
        self.consumed += m
        return block


def save_replay(path, samples: np.ndarray) -> None:
    np.save(path, np.asarray(samples))


# -- shared pruning machinery ------------------------------------------------

@dataclass
class PruningState:
    """Trace of the iterative pruning schedule, for inspection and tests."""

    rounds: int
    surviving: list = field(default_factory=list)      # S_t per round, S_0 first
    group_sizes: list = field(default_factory=list)    # N_t per round
    final_groups: dict = field(default_factory=dict)   # coordinate -> final group size
    players_used: int = 0


def _floor_log3(ratio: float) -> int:
    """Largest T >= 0 with 3^T <= ratio."""
    t = 0
    while 3 ** (t + 1) <= ratio:
        t += 1
    return t


def _top_by_magnitude(candidates: list[int], sums: dict[int, float], keep: int) -> list[int]:
    """Stable top-k: |sum| descending, index ascending; returned sorted."""
    ranked = sorted(candidates, key=lambda j: (-abs(sums[j]), j))
    return sorted(ranked[:keep])


def _split_evenly(total: int, parts: int) -> list[int]:
    """total = sum of parts group sizes; remainder goes to the first groups."""
    base, extra = divmod(total, parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


# -- Algorithm: LDP mean estimation ------------------------------------------

def alg1_ldp_estimate(n: int, d: int, s: int, eps: float,
                      rng: np.random.Generator, source,
                      return_state: bool = False):
    """Iterative-pruning randomized-response estimator for s-sparse product
    Bernoulli means under eps-LDP; every message is one bit.

    Pruning halts after floor(log3(d/(3s))) rounds (skipped entirely when
    s >= d/3); the player budget left over after pruning is split evenly
    over the surviving coordinates for the final estimation stage.
    """
    if not eps > 0:
        raise InvalidParameterError(f"eps must be positive, got {eps}")
    if not 1 <= s <= d:
        raise InvalidParameterError(f"need 1 <= s <= d, got s={s}, d={d}")
    bias = rr_bias(eps)
    gap = 2.0 * bias - 1.0
    state = PruningState(rounds=0)
    remaining = n

    def rr_message_sum(j: int, m: int) -> float:
        x = source.take(np.array([j]), m)[:, 0]
        keep = rng.random(m) < bias
        return float(np.sum(np.where(keep, x, -x)))

    surviving = list(range(d))
    state.surviving.append(list(surviving))
    if 3 * s < d:
        rounds = _floor_log3(d / (3.0 * s))
        state.rounds = rounds
        n0 = n / (6.0 * d)
        for t in range(1, rounds + 1):
            group = int(n0 * 2 ** t)
            if group < 1:
                raise ConfigurationError(
                    f"round {t} group size floor(n/(6d) * 2^t) = {group} < 1 "
                    f"(n={n}, d={d}): not enough players")
            need = group * len(surviving)
            if need > remaining:
                raise ConfigurationError(
                    f"round {t} needs {need} players but only {remaining} remain (n={n})")
            sums = {j: rr_message_sum(j, group) for j in surviving}
            remaining -= need
            surviving = _top_by_magnitude(surviving, sums, math.ceil(len(surviving) / 3))
            state.surviving.append(list(surviving))
            state.group_sizes.append(group)

    final_sizes = _split_evenly(remaining, len(surviving))
    if min(final_sizes) < 1:
        raise ConfigurationError(
            f"final stage would give {min(final_sizes)} players per coordinate "
            f"({remaining} players over {len(surviving)} survivors)")
    mu_hat = np.zeros(d)
    for j, m in zip(surviving, final_sizes):
        state.final_groups[j] = m
        mu_hat[j] = rr_message_sum(j, m) / (gap * m)
        remaining -= m
    state.players_used = n - remaining
    np.clip(mu_hat, -1.0, 1.0, out=mu_hat)
    if return_state:
        return mu_hat, state
    return mu_hat


def alg1_channel(eps: float):
    """The channel every player of the LDP protocol applies (for validation)."""
    return make_rr_channel(eps)


# -- Algorithm: communication-limited mean estimation -------------------------

def alg2_comm_estimate(n: int, d: int, s: int, bits: int,
                       rng: np.random.Generator, source,
                       return_state: bool = False):
    """b-bit coordinate-forwarding estimator for s-sparse product Bernoulli
    means: prune to a small survivor set, then estimate survivors in blocks
    of b raw coordinates per player.

    In the wide regime b > 3s the final stage additionally keeps only the
    3s largest sums. Final groups split the leftover player budget evenly
    over blocks (covers schedules where rounding leaves |S_T| above the
    nominal target), and estimates divide by the actual group size.
    """
    if not 1 <= bits <= d:
        raise InvalidParameterError(f"need 1 <= bits <= d, got bits={bits}, d={d}")
    if not 1 <= s <= d:
        raise InvalidParameterError(f"need 1 <= s <= d, got s={s}, d={d}")
    state = PruningState(rounds=0)
    remaining = n

    def block_sums(block: list[int], m: int) -> np.ndarray:
        return source.take(np.array(block), m).sum(axis=0).astype(float)

    surviving = list(range(d))
    state.surviving.append(list(surviving))
    target = max(3 * s, bits)
    if d >= 3 * target:
        rounds = _floor_log3(d / target)
        state.rounds = rounds
        n0 = n * bits / (18.0 * d)
        for t in range(1, rounds + 1):
            group = int(n0 * 2 ** t)
            if group < 1:
                raise ConfigurationError(
                    f"round {t} group size floor(nb/(18d) * 2^t) = {group} < 1: not enough players")
            blocks = [surviving[i:i + bits] for i in range(0, len(surviving), bits)]
            need = group * len(blocks)
            if need > remaining:
                raise ConfigurationError(
                    f"round {t} needs {need} players but only {remaining} remain (n={n})")
            sums: dict[int, float] = {}
            for block in blocks:
                vals = block_sums(block, group)
                sums.update(dict(zip(block, vals)))
            remaining -= need
            surviving = _top_by_magnitude(surviving, sums, math.ceil(len(surviving) / 3))
            state.surviving.append(list(surviving))
            state.group_sizes.append(group)

    blocks = [surviving[i:i + bits] for i in range(0, len(surviving), bits)]
    sizes = _split_evenly(remaining, len(blocks))
    if min(sizes) < 1:
        raise ConfigurationError(
            f"final stage would give {min(sizes)} players per block "
            f"({remaining} players over {len(blocks)} blocks)")
    sums = {}
    group_of: dict[int, int] = {}
    for block, m in zip(blocks, sizes):
        vals = block_sums(block, m)
        remaining -= m
        for j, v in zip(block, vals):
            sums[j] = v
            group_of[j] = m
    if bits > 3 * s:
        keep = _top_by_magnitude(surviving, sums, 3 * s)
    else:
        keep = surviving
    mu_hat = np.zeros(d)
    for j in keep:
        state.final_groups[j] = group_of[j]
        mu_hat[j] = sums[j] / group_of[j]
    state.players_used = n - remaining
    if return_state:
        return mu_hat, state
    return mu_hat


def alg2_channel(block: list[int], d: int):
    """The forwarding channel used for one block (for validation)."""
    return make_subset_forward_channel(block, d)


# -- Gaussian reduction -------------------------------------------------------

def erf_inv(y: float) -> float:
    """Inverse error function by bracketed Newton iteration on erf.

    Converges to |erf(x) - y| below 1e-15 for |y| < 1; raises outside.
    """
    if not -1.0 < y < 1.0:
        raise DomainError(f"erf_inv needs |y| < 1, got {y}")
    if y == 0.0:
        return 0.0
    # monotone initial guess and expanding bracket
    lo, hi = 0.0, 1.0
    target = abs(y)
    while math.erf(hi) < target:
        lo, hi = hi, hi * 2.0
    x = min(max(target, lo), hi)  # erf(x) ~ x near zero keeps the start inside
    for _ in range(100):
        fx = math.erf(x) - target
        if fx > 0:
            hi = x
        else:
            lo = x
        if abs(fx) < 1e-16:
            break
        step = fx / (2.0 / math.sqrt(math.pi) * math.exp(-x * x))
        nxt = x - step
        if not lo <= nxt <= hi:
            nxt = 0.5 * (lo + hi)
        if nxt == x:
            break
        x = nxt
    return math.copysign(x, y)


def gaussian_reduce_estimate(n: int, d: int, s: int, rng: np.random.Generator,
                             source: GaussianSignPlayerSource,
                             eps: float | None = None, bits: int | None = None) -> np.ndarray:
    """Estimate a bounded s-sparse Gaussian mean via coordinate signs.

    Signs are Bernoulli with mean erf(mu_j / sqrt 2); the chosen Bernoulli
    backend estimates that vector, the estimate is clamped to the reachable
    range [-eta, eta], and the mean reconstruction applies sqrt(2) erf_inv.
    """
    if (eps is None) == (bits is None):
        raise InvalidParameterError("choose exactly one backend: eps (LDP) or bits (comm)")
    if eps is not None:
        nu_hat = alg1_ldp_estimate(n, d, s, eps, rng, source)
    else:
        nu_hat = alg2_comm_estimate(n, d, s, bits, rng, source)
    nu_hat = np.clip(nu_hat, -ETA, ETA)
    return np.array([math.sqrt(2.0) * erf_inv(v) for v in nu_hat])


# -- binomial moment fact -----------------------------------------------------

@dataclass(frozen=True)
class BinomialMomentRecord:
    m_max: int
    q_grid: tuple[float, ...]
    p_grid: tuple[float, ...]
    max_ratio: float
    failures: tuple = ()

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {"m_max": self.m_max, "q_grid": list(self.q_grid), "p_grid": list(self.p_grid),
                "max_ratio": self.max_ratio, "failures": list(self.failures), "pass": self.passed}


def binomial_central_moment(m: int, q: float, p: float) -> float:
    """E|N - mq|^p for N ~ Bin(m, q), by exact pmf summation."""
    total = 0.0
    for j in range(m + 1):
        total += math.comb(m, j) * q ** j * (1.0 - q) ** (m - j) * abs(j - m * q) ** p
    return total


def binomial_moment_check(m_max: int = 20,
                          q_grid=tuple(0.1 * t for t in range(1, 10)),
                          p_grid=(1, 2, 4, 8)) -> BinomialMomentRecord:
    """Certify E|N - mq|^p <= (m p / 2)^(p/2) exhaustively over the grids."""
    worst = 0.0
    failures = []
    for m in range(1, m_max + 1):
        for q in q_grid:
            for p in p_grid:
                lhs = binomial_central_moment(m, q, p)
                rhs = 2.0 ** (-p / 2.0) * m ** (p / 2.0) * p ** (p / 2.0)
                worst = max(worst, lhs / rhs)
                if lhs > rhs + 1e-12:
                    failures.append({"m": m, "q": q, "p": p, "lhs": lhs, "rhs": rhs})
    return BinomialMomentRecord(m_max=m_max, q_grid=tuple(q_grid), p_grid=tuple(p_grid),
                                max_ratio=worst, failures=tuple(failures))
