"""Randomized certification suites: each one hammers a module-level
inequality or identity with randomized exactly-enumerable instances and
reports pass/fail plus the worst slack consumed.
"""

from __future__ import annotations

import itertools
import json
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .channels import Channel, ldp_ratio, make_rr_channel
from .contraction import (Protocol, assouad_inequality_check, check_cut_paste,
                          check_theorem_main, make_bayes_decoder, make_lp_decoder,
                          make_posterior_mean_estimator, measure_change_check,
                          mutual_info_bits, var_functional)
from .errors import InvalidParameterError
from .families import lp_loss
from .perturbations import (PerturbedFamily, bernoulli_perturbation,
                            discrete_perturbation, gaussian_perturbation,
                            sparsity_prior_prob, validate_assumptions)
from .protocols import ETA, binomial_moment_check, erf_inv

GAMMA_GRID = (0.05, 0.2, 0.4)


@dataclass
class SuiteReport:
    suite: str
    trials: int
    failures: list = field(default_factory=list)
    max_slack_used: float = 0.0
    elapsed: float = 0.0
    extras: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {"suite": self.suite, "trials": self.trials, "failures": self.failures,
                "max_slack_used": self.max_slack_used, "elapsed": self.elapsed,
                "pass": self.passed, **({"extras": self.extras} if self.extras else {})}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, default=float)


# -- randomized building blocks -------------------------------------------

def random_row_stochastic(rng: np.random.Generator, nx: int, ny: int) -> np.ndarray:
    kern = rng.random((nx, ny)) + 1e-9
    return kern / kern.sum(axis=1, keepdims=True)


def random_ldp_kernel(rng: np.random.Generator, nx: int, ny: int, eps: float) -> np.ndarray:
    """A random kernel mixed toward uniform just enough to be eps-LDP.

    With mixing weight lam >= ny / (ny + e^eps - 1) the likelihood ratio is
    at most e^eps for any base kernel; lam at the lower end gives channels
    that sit on the privacy boundary.
    """
    base = rng.random((nx, ny))
    base /= base.sum(axis=1, keepdims=True)
    lam_min = ny / (ny + math.expm1(eps))
    lam = lam_min + rng.random() * (1.0 - lam_min)
    return (1.0 - lam) * base + lam / ny


def random_input_dist(rng: np.random.Generator, nx: int) -> np.ndarray:
    p = rng.random(nx) + 1e-9
    return p / p.sum()


def random_perturbed_family(rng: np.random.Generator, k: int,
                            gamma: float, tau: float) -> PerturbedFamily:
    """Bernoulli or discrete hard family; discrete clips gamma into range."""
    if rng.random() < 0.5:
        return bernoulli_perturbation(k, gamma, tau)
    D = 2 * k
    return discrete_perturbation(D, min(gamma, 1.0 / (2 * D)), tau)


def random_protocol(rng: np.random.Generator, fam: PerturbedFamily, n: int,
                    max_out: int = 3) -> Protocol:
    """Message-dependent protocol: an independent random kernel per prefix."""
    inputs = fam.support
    nx = len(inputs)
    sizes = [int(rng.integers(2, max_out + 1)) for _ in range(n)]
    tree: dict = {}

    def build(t: int, prefix: tuple) -> None:
        if t == n:
            return
        kern = random_row_stochastic(rng, nx, sizes[t])
        tree[(t, prefix)] = Channel(outputs=tuple(range(sizes[t])), inputs=inputs, kernel=kern)
        for y in range(sizes[t]):
            build(t + 1, prefix + (y,))

    build(0, ())
    return Protocol.from_channel_tree(tree, n)


def _instance_descriptor(seed: int, fam: PerturbedFamily, n: int, **extra) -> dict:
    return {"seed": seed, "kind": fam.kind, "k": fam.k, "gamma": fam.gamma,
            "tau": fam.tau, "n": n, **extra}


# -- suites -----------------------------------------------------------------

def suite_assumptions(seed: int = 0, budget: int | None = None) -> SuiteReport:
    """Assumption checks for all three constructions, plus the prior-sparsity
    binomial bound; finite kinds are summed exactly, Gaussian is quadrature.
    """
    t0 = time.time()
    report = SuiteReport(suite="assumptions", trials=0)
    rng = np.random.default_rng(seed)
    gammas = list(GAMMA_GRID)
    if budget:
        gammas += [float(g) for g in rng.uniform(0.01, 0.5, size=budget)]

    def record(rep, descriptor):
        report.trials += 1
        report.max_slack_used = max(report.max_slack_used, max(rep.max_violations.values()))
        if not rep.passed:
            report.failures.append({**descriptor, "violations": rep.max_violations})

    for g in gammas:
        for d in (3, 6, 10):
            record(validate_assumptions(bernoulli_perturbation(d, g), tol=1e-10),
                   {"construction": "bernoulli", "d": d, "gamma": g})
        for D in (4, 6, 12):
            gg = min(g, 1.0 / (2 * D))
            record(validate_assumptions(discrete_perturbation(D, gg), tol=1e-10),
                   {"construction": "discrete", "D": D, "gamma": gg})
        fam, _split = gaussian_perturbation(4, min(g, 0.5))
        record(validate_assumptions(fam, tol=1e-6),
               {"construction": "gaussian", "gamma": min(g, 0.5)})

    for d, s in ((64, 32), (256, 64), (1024, 64)):
        tau = s / (2.0 * d)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # canonical cases sit below the regime cutoff
            prob = sparsity_prior_prob(d, tau, s)
        report.trials += 1
        if prob < 1.0 - tau / 4.0:
            report.failures.append({"check": "prior_sparsity", "d": d, "s": s, "prob": prob})
    report.extras["prior_sparsity_cases"] = 3
    report.elapsed = time.time() - t0
    return report


def suite_contraction(seed: int = 0, budget: int | None = None) -> SuiteReport:
    """Randomized contraction-bound certification (plus its variance and
    subgaussian variants, and the per-channel privacy/alphabet bounds).
    """
    t0 = time.time()
    budget = budget or 1000
    report = SuiteReport(suite="contraction", trials=0)
    worst_ratio = 0.0
    for idx in range(budget):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0, idx)))
        k = int(rng.integers(1, 4))
        n = int(rng.integers(1, 6))
        gamma = float(rng.choice(GAMMA_GRID))
        tau = float(rng.choice([0.25, 0.5]))
        fam = random_perturbed_family(rng, k, gamma, tau)
        proto = random_protocol(rng, fam, n)
        cert = check_theorem_main(proto, fam, tau)
        report.trials += 1
        worst_ratio = max(worst_ratio, cert.achieved_ratio)
        slack_used = max(cert.lhs_sq - cert.rhs_main,
                         cert.lhs_sq - cert.rhs_var,
                         cert.lhs_sq - cert.rhs_subgaussian if cert.rhs_subgaussian is not None else -math.inf)
        report.max_slack_used = max(report.max_slack_used, slack_used, 0.0)
        if not cert.passed:
            report.failures.append(_instance_descriptor(idx, fam, n, certificate=cert.to_dict()))

    # channel-level bounds: LDP likelihood-ratio and finite-alphabet
    channel_count = 200 if budget >= 200 else max(10, budget)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(1,)))
    for idx in range(channel_count):
        eps = float(rng.choice([0.25, 0.5, 1.0, 2.0]))
        nx = int(rng.integers(2, 7))
        ny = int(rng.integers(2, 7))
        kern = random_ldp_kernel(rng, nx, ny, eps)
        ch = Channel(outputs=tuple(range(ny)), inputs=tuple(range(nx)), kernel=kern)
        p = random_input_dist(rng, nx)
        bound = min(math.expm1(eps) ** 2, math.exp(eps))
        val = var_functional(ch, p)
        report.trials += 1
        if val > bound + 1e-9 or ldp_ratio(ch) > math.exp(eps) * (1 + 1e-12):
            report.failures.append({"check": "ldp_channel_bound", "seed": idx, "eps": eps,
                                    "value": val, "bound": bound})
        report.max_slack_used = max(report.max_slack_used, val - bound, 0.0)
    for idx in range(channel_count):
        nx = int(rng.integers(2, 7))
        ny = int(rng.integers(2, 7))
        ch = Channel(outputs=tuple(range(ny)), inputs=tuple(range(nx)),
                     kernel=random_row_stochastic(rng, nx, ny))
        p = random_input_dist(rng, nx)
        val = var_functional(ch, p)
        mi = mutual_info_bits(ch, p)
        report.trials += 1
        if val > ny + 1e-9 or mi > math.log2(ny) + 1e-9:
            report.failures.append({"check": "finite_channel_bound", "seed": idx, "ny": ny,
                                    "var": val, "mi_bits": mi})
        report.max_slack_used = max(report.max_slack_used, val - ny, mi - math.log2(ny), 0.0)

    report.extras["max_achieved_ratio"] = worst_ratio
    report.elapsed = time.time() - t0
    return report


def suite_cut_paste(seed: int = 0, budget: int | None = None) -> SuiteReport:
    t0 = time.time()
    budget = budget or 200
    report = SuiteReport(suite="cut-paste", trials=0)
    worst_ratio = 0.0
    for idx in range(budget):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(idx,)))
        k = int(rng.integers(1, 4))
        n = int(rng.integers(2, 5))
        gamma = float(rng.choice(GAMMA_GRID))
        fam = random_perturbed_family(rng, k, gamma, 0.5)
        proto = random_protocol(rng, fam, n)
        z = tuple(int(v) for v in rng.choice([-1, 1], size=k))
        i = int(rng.integers(0, k))
        cert = check_cut_paste(proto, fam, z, i)
        report.trials += 1
        worst_ratio = max(worst_ratio, cert.ratio)
        report.max_slack_used = max(report.max_slack_used, cert.lhs_h2 - cert.rhs, 0.0)
        if not cert.passed:
            report.failures.append(_instance_descriptor(idx, fam, n, i=i, z=list(z),
                                                        certificate=cert.to_dict()))
    report.extras["max_single_swap_ratio"] = worst_ratio
    report.elapsed = time.time() - t0
    return report


def suite_assouad(seed: int = 0, budget: int | None = None) -> SuiteReport:
    t0 = time.time()
    budget = budget or 50
    report = SuiteReport(suite="assouad", trials=0)
    for idx in range(budget):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(idx,)))
        k = int(rng.integers(1, 3))
        n = int(rng.integers(1, 4))
        gamma = float(rng.choice(GAMMA_GRID))
        tau = float(rng.choice([0.25, 0.5]))
        fam = random_perturbed_family(rng, k, gamma, tau)
        proto = random_protocol(rng, fam, n)
        decoders = {
            "bayes": make_bayes_decoder(proto, fam, tau),
            "argmin_lp": make_lp_decoder(fam, 2.0, make_posterior_mean_estimator(proto, fam, tau)),
        }
        for name, dec in decoders.items():
            cert = assouad_inequality_check(proto, fam, tau, dec)
            report.trials += 1
            slack = max(b - e for e, b in zip(cert.per_coordinate_error, cert.bounds))
            report.max_slack_used = max(report.max_slack_used, slack, 0.0)
            if not cert.passed:
                report.failures.append(_instance_descriptor(idx, fam, n, decoder=name,
                                                            certificate=cert.to_dict()))
    report.elapsed = time.time() - t0
    return report


def suite_measure_change(seed: int = 0, budget: int | None = None) -> SuiteReport:
    t0 = time.time()
    budget = budget or 100
    report = SuiteReport(suite="measure-change", trials=0)
    for idx in range(budget):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(idx,)))
        m = int(rng.integers(1, 5))
        support = list(itertools.product((-1, 1), repeat=m))
        p = np.full(len(support), 1.0 / len(support))
        k = int(rng.integers(1, m + 1))
        coords = rng.permutation(m)[:k]
        signs = rng.choice([-1, 1], size=k)
        phi = np.array([[signs[a] * x[coords[a]] for x in support] for a in range(k)],
                       dtype=float)
        if rng.random() < 0.5:
            a = rng.random(len(support))
        else:
            # a(x) = W(y | x) for a randomized-response channel on coordinate 1
            ch = make_rr_channel(float(rng.choice([0.5, 1.0, 2.0])))
            y = int(rng.integers(0, 2))
            a = np.array([ch.kernel[ch.input_index(x[0]), y] for x in support])
        cert = measure_change_check(p, phi, a, sigma_sq=1.0)
        report.trials += 1
        report.max_slack_used = max(report.max_slack_used, cert.lhs - cert.rhs, 0.0)
        if not cert.passed:
            report.failures.append({"seed": idx, "m": m, "k": k, "certificate": cert.to_dict()})
    report.elapsed = time.time() - t0
    return report


def suite_binomial(seed: int = 0, budget: int | None = None) -> SuiteReport:
    t0 = time.time()
    record = binomial_moment_check(m_max=budget or 20)
    report = SuiteReport(suite="binomial", trials=(budget or 20) * 9 * 4,
                         failures=list(record.failures))
    report.extras["max_ratio"] = record.max_ratio
    report.elapsed = time.time() - t0
    return report


def suite_reduction(seed: int = 0, budget: int | None = None) -> SuiteReport:
    """Gaussian-to-Bernoulli reduction facts: the Lipschitz transfer bound,
    the erf_inv roundtrip, and the derivative bound on the clamped range.
    """
    t0 = time.time()
    budget = budget or 1000
    report = SuiteReport(suite="reduction", trials=0)
    rng = np.random.default_rng(seed)
    lip = math.sqrt(math.e * math.pi / 2.0)
    d = 8
    for idx in range(budget):
        nu = rng.uniform(-ETA, ETA, size=d)
        nu_hat = rng.uniform(-ETA, ETA, size=d)
        mu = np.array([math.sqrt(2.0) * erf_inv(v) for v in nu])
        mu_hat = np.array([math.sqrt(2.0) * erf_inv(v) for v in nu_hat])
        for p in (1.0, 2.0, math.inf):
            lhs = lp_loss(mu, mu_hat, p)
            rhs = lip * lp_loss(nu, nu_hat, p)
            report.trials += 1
            report.max_slack_used = max(report.max_slack_used, lhs - rhs, 0.0)
            if lhs > rhs + 1e-9:
                report.failures.append({"check": "lipschitz_transfer", "seed": idx, "p": p,
                                        "lhs": lhs, "rhs": rhs})
    ys = rng.uniform(-0.999999, 0.999999, size=1000)
    worst_rt = max(abs(math.erf(erf_inv(y)) - y) for y in ys)
    report.trials += 1000
    if worst_rt > 1e-12:
        report.failures.append({"check": "erf_inv_roundtrip", "max_error": worst_rt})
    grid = np.linspace(-ETA, ETA, 10_000)
    vals = np.array([erf_inv(y) for y in grid])
    slopes = np.abs(np.diff(vals) / np.diff(grid))
    max_slope = float(slopes.max())
    report.trials += 1
    deriv_bound = math.sqrt(math.e * math.pi) / 2.0
    if max_slope > deriv_bound + 1e-4:
        report.failures.append({"check": "erf_inv_lipschitz", "max_slope": max_slope,
                                "bound": deriv_bound})
    report.extras.update({"erf_inv_roundtrip_max": worst_rt, "erf_inv_max_slope": max_slope})
    report.elapsed = time.time() - t0
    return report


SUITES = {
    "assumptions": suite_assumptions,
    "contraction": suite_contraction,
    "cut-paste": suite_cut_paste,
    "assouad": suite_assouad,
    "measure-change": suite_measure_change,
    "binomial": suite_binomial,
    "reduction": suite_reduction,
}


def run_verification_suite(name: str, seed: int = 0, budget: int | None = None) -> SuiteReport:
    """Run one named certification suite with randomized instances."""
    try:
        fn = SUITES[name]
    except KeyError:
        raise InvalidParameterError(
            f"unknown suite {name!r}; valid names: {', '.join(sorted(SUITES))}") from None
    return fn(seed=seed, budget=budget)
