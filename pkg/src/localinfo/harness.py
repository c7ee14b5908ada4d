"""Monte Carlo risk measurement and rate fitting.

Risk follows the minimax definition E[lp^p]^(1/p) (plain mean for p = inf).
Seeding is counter-based: every (experiment, grid point, trial) gets its own
stream derived from the master seed, so reports are bitwise reproducible
regardless of execution order or parallelism.
"""

from __future__ import annotations

import json
import math
import time
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InvalidParameterError
from .families import ProductBernoulli, SphericalGaussian, linf_surrogate_exponent, lp_loss
from .protocols import (BernoulliPlayerSource, GaussianSignPlayerSource,
                        alg1_ldp_estimate, alg2_comm_estimate, gaussian_reduce_estimate)
from .suites import run_verification_suite  # re-exported orchestration entry point

__all__ = [
    "ExperimentConfig", "RiskPoint", "RiskReport", "RateFit",
    "monte_carlo_risk", "rate_fit", "load_config", "run_verification_suite",
]

BOOTSTRAP_RESAMPLES = 200

ESTIMATORS = ("alg1", "alg2", "oracle")
FAMILIES = ("bernoulli", "gaussian")


@dataclass(frozen=True)
class ExperimentConfig:
    family: str                 # "bernoulli" | "gaussian"
    estimator: str              # "alg1" | "alg2" | "oracle"
    d: int
    s: int
    n_grid: tuple[int, ...]
    trials: int
    seed: int
    p: float = 2.0              # loss exponent; math.inf accepted (or "inf" in files)
    eps: float | None = None    # LDP budget (alg1)
    bits: int | None = None     # communication budget (alg2)
    mean: tuple[float, ...] | float = 0.5  # full vector, or value for the first s coords
    label: str = ""

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidParameterError(f"family must be one of {FAMILIES}")
        if self.estimator not in ESTIMATORS:
            raise InvalidParameterError(f"estimator must be one of {ESTIMATORS}")
        if len(self.n_grid) == 0 or self.trials < 1:
            raise InvalidParameterError("n_grid must be nonempty and trials >= 1")
        if self.estimator == "alg1" and self.eps is None:
            raise InvalidParameterError("alg1 needs eps")
        if self.estimator == "alg2" and self.bits is None:
            raise InvalidParameterError("alg2 needs bits")
        p = self.p
        if p != math.inf and p < 1:
            raise InvalidParameterError("p must be >= 1 (or inf)")

    @property
    def constraint_kind(self) -> str:
        if self.eps is not None:
            return "ldp"
        if self.bits is not None:
            return "comm"
        return "unconstrained"

    @property
    def constraint_value(self) -> float | int | None:
        return self.eps if self.eps is not None else self.bits

    def true_mean(self) -> np.ndarray:
        if isinstance(self.mean, (int, float)):
            mu = np.zeros(self.d)
            mu[: self.s] = float(self.mean)
            return mu
        mu = np.asarray(self.mean, dtype=float)
        if mu.shape != (self.d,):
            raise InvalidParameterError("mean vector length must equal d")
        return mu

    def to_mapping(self) -> dict:
        return {
            "family": self.family, "estimator": self.estimator,
            "d": self.d, "s": self.s, "n_grid": list(self.n_grid),
            "trials": self.trials, "seed": self.seed,
            "p": "inf" if self.p == math.inf else self.p,
            "eps": self.eps, "bits": self.bits,
            "mean": list(self.mean) if isinstance(self.mean, tuple) else self.mean,
            "label": self.label,
        }

    @classmethod
    def from_mapping(cls, m: dict) -> "ExperimentConfig":
        m = dict(m)
        p = m.get("p", 2.0)
        if isinstance(p, str):
            if p.lower() not in ("inf", "infinity"):
                raise InvalidParameterError(f"unrecognized p {p!r}")
            p = math.inf
        mean = m.get("mean", 0.5)
        if isinstance(mean, list):
            mean = tuple(float(v) for v in mean)
        return cls(
            family=m["family"], estimator=m["estimator"], d=int(m["d"]), s=int(m["s"]),
            n_grid=tuple(int(v) for v in m["n_grid"]), trials=int(m["trials"]),
            seed=int(m["seed"]), p=p, eps=m.get("eps"), bits=m.get("bits"),
            mean=mean, label=m.get("label", ""),
        )

    def uid(self) -> int:
        """Stable 32-bit id for seed derivation, from the canonical mapping."""
        blob = json.dumps(self.to_mapping(), sort_keys=True).encode()
        return zlib.crc32(blob) & 0xFFFFFFFF


def load_config(path) -> ExperimentConfig:
    """Read an experiment config from a TOML or JSON file."""
    text = open(path, "rb").read()
    name = str(path)
    if name.endswith(".json"):
        return ExperimentConfig.from_mapping(json.loads(text.decode()))
    try:
        import tomllib  # Python >= 3.11
    except ModuleNotFoundError:
        import tomli as tomllib
    return ExperimentConfig.from_mapping(tomllib.loads(text.decode()))


@dataclass(frozen=True)
class RiskPoint:
    n: int
    risk: float
    stderr: float
    trials: int
    surrogate_risk: float | None = None  # finite-p surrogate, p = inf runs only


@dataclass
class RiskReport:
    config: ExperimentConfig
    points: list[RiskPoint] = field(default_factory=list)
    elapsed: float = 0.0

    def rows(self) -> list[dict]:
        """Fixed-column rows for CSV emission."""
        cfg = self.config
        return [
            {
                "family": cfg.family,
                "constraint_kind": cfg.constraint_kind,
                "constraint_value": cfg.constraint_value,
                "n": pt.n, "d": cfg.d, "s": cfg.s,
                "p": "inf" if cfg.p == math.inf else cfg.p,
                "trials": pt.trials, "risk": pt.risk, "stderr": pt.stderr,
                "seed": cfg.seed,
            }
            for pt in self.points
        ]

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_mapping(),
            "points": [
                {"n": p.n, "risk": p.risk, "stderr": p.stderr, "trials": p.trials,
                 "surrogate_risk": p.surrogate_risk}
                for p in self.points
            ],
        }


def _trial_stream(cfg: ExperimentConfig, n_index: int, trial: int) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=cfg.seed, spawn_key=(cfg.uid(), n_index, trial))
    return np.random.default_rng(seq)


def _run_trial(cfg: ExperimentConfig, n: int, n_index: int, trial: int) -> np.ndarray:
    rng = _trial_stream(cfg, n_index, trial)
    mu = cfg.true_mean()
    if cfg.estimator == "oracle":
        return mu
    if cfg.family == "bernoulli":
        source = BernoulliPlayerSource(ProductBernoulli(mu), rng)
        if cfg.estimator == "alg1":
            est = alg1_ldp_estimate(n, cfg.d, cfg.s, cfg.eps, rng, source)
        else:
            est = alg2_comm_estimate(n, cfg.d, cfg.s, cfg.bits, rng, source)
    else:
        source = GaussianSignPlayerSource(SphericalGaussian(mu), rng)
        est = gaussian_reduce_estimate(n, cfg.d, cfg.s, rng, source,
                                       eps=cfg.eps, bits=cfg.bits)
    if source.consumed > n:
        raise ConfigurationError(f"estimator consumed {source.consumed} > n = {n} players")
    return est


def _aggregate(losses: np.ndarray, p: float) -> float:
    if p == math.inf:
        return float(losses.mean())
    return float(losses.mean() ** (1.0 / p))


def monte_carlo_risk(cfg: ExperimentConfig, mapper=map) -> RiskReport:
    """Empirical minimax risk over the n grid.

    `mapper` may be any order-preserving map (e.g. a thread pool's);
    results are bitwise identical for any choice because every trial owns
    a counter-derived stream.
    """
    t0 = time.time()
    report = RiskReport(config=cfg)
    mu = cfg.true_mean()
    p = cfg.p
    surrogate_p = linf_surrogate_exponent(cfg.s) if p == math.inf else None
    for n_index, n in enumerate(cfg.n_grid):
        estimates = list(mapper(
            lambda trial: _run_trial(cfg, n, n_index, trial), range(cfg.trials)))
        if p == math.inf:
            losses = np.array([lp_loss(mu, est, math.inf) for est in estimates])
            surr = np.array([lp_loss(mu, est, surrogate_p) ** surrogate_p for est in estimates])
            surrogate_risk = float(surr.mean() ** (1.0 / surrogate_p))
        else:
            losses = np.array([lp_loss(mu, est, p) ** p for est in estimates])
            surrogate_risk = None
        risk = _aggregate(losses, p)
        boot = np.random.default_rng(
            np.random.SeedSequence(entropy=cfg.seed, spawn_key=(cfg.uid(), n_index, 1 << 30)))
        idx = boot.integers(0, cfg.trials, size=(BOOTSTRAP_RESAMPLES, cfg.trials))
        resampled = np.array([_aggregate(losses[row], p) for row in idx])
        stderr = float(resampled.std(ddof=1))
        report.points.append(RiskPoint(n=n, risk=risk, stderr=stderr,
                                       trials=cfg.trials, surrogate_risk=surrogate_risk))
    report.elapsed = time.time() - t0
    return report


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    residuals: tuple[float, ...]
    r_squared: float

    def to_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept,
                "residuals": list(self.residuals), "r_squared": self.r_squared}


def rate_fit(report: RiskReport | list[RiskPoint]) -> RateFit:
    """Least-squares slope of log risk against log n."""
    points = report.points if isinstance(report, RiskReport) else list(report)
    if len(points) < 3:
        raise InvalidParameterError("rate fit needs at least 3 grid points")
    x = np.log([pt.n for pt in points])
    y = np.log([pt.risk for pt in points])
    if np.ptp(x) == 0.0:
        raise InvalidParameterError("degenerate n grid")
    slope, intercept = np.polyfit(x, y, 1)
    fitted = slope * x + intercept
    resid = y - fitted
    ss_res = float(np.sum(resid ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return RateFit(slope=float(slope), intercept=float(intercept),
                   residuals=tuple(float(r) for r in resid), r_squared=r2)
