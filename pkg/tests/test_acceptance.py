"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL
line with its headline numbers. Tolerances are pinned in the assertions.

Run with `pytest -s tests/test_acceptance.py` to see the lines as they go.
"""

import functools
import math
import time
import warnings

import numpy as np
import pytest

from localinfo import (Channel, ExperimentConfig, assouad_inequality_check,
                       bernoulli_perturbation, check_cut_paste, check_theorem_main,
                       discrete_perturbation, erf_inv, gaussian_perturbation, ldp_ratio,
                       lp_loss, make_bayes_decoder, make_lp_decoder,
                       make_posterior_mean_estimator, measure_change_check,
                       binomial_moment_check, monte_carlo_risk, mutual_info_bits,
                       rate_fit, sparsity_prior_prob, validate_assumptions, var_functional)
from localinfo.protocols import ETA
from localinfo.suites import (GAMMA_GRID, random_input_dist, random_ldp_kernel,
                              random_perturbed_family, random_protocol,
                              random_row_stochastic)


def criterion(num, text):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            try:
                detail = fn(*args, **kwargs)
            except BaseException:
                print(f"ACCEPTANCE {num:2d} FAIL: {text}")
                raise
            print(f"ACCEPTANCE {num:2d} PASS: {text}" + (f" [{detail}]" if detail else ""))
        return run
    return wrap


@pytest.fixture(scope="module")
def theorem_instances():
    """1000 randomized sequentially interactive instances with
    message-dependent rules, certified once and shared by criteria 1-2."""
    t0 = time.time()
    certs = []
    for idx in range(1000):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=20240, spawn_key=(idx,)))
        k = int(rng.integers(1, 4))
        n = int(rng.integers(1, 6))
        gamma = float(rng.choice(GAMMA_GRID))
        tau = float(rng.choice([0.25, 0.5]))
        fam = random_perturbed_family(rng, k, gamma, tau)
        proto = random_protocol(rng, fam, n, max_out=3)
        certs.append((fam, check_theorem_main(proto, fam, tau)))
    return certs, time.time() - t0


@criterion(1, "contraction bound holds on 1000 randomized interactive instances")
def test_criterion_1_contraction(theorem_instances):
    certs, elapsed = theorem_instances
    assert len(certs) == 1000
    kinds = {fam.kind for fam, _ in certs}
    assert kinds == {"bernoulli", "discrete"}
    worst_slack = min(c.rhs_main - c.lhs_sq for _, c in certs)
    assert worst_slack >= -1e-9, f"worst slack {worst_slack}"
    assert all(c.pass_main for _, c in certs)
    assert elapsed < 120.0, f"certification took {elapsed:.1f}s (budget 120s)"
    return f"worst slack {worst_slack:.3e}, elapsed {elapsed:.1f}s"


@criterion(2, "variance and subgaussian variants hold on the same instances")
def test_criterion_2_variants(theorem_instances):
    certs, _ = theorem_instances
    assert all(c.pass_var for _, c in certs)
    bern = [(f, c) for f, c in certs if f.kind == "bernoulli"]
    assert bern, "generator produced no Bernoulli instances"
    for fam, c in bern:
        assert c.sigma_sq == pytest.approx((1 + fam.gamma) / (1 - fam.gamma))
        assert c.rhs_subgaussian is not None and c.pass_subgaussian
    return f"{len(bern)} Bernoulli instances carried the subgaussian variant"


@criterion(3, "LDP channels: sum_y Var/E <= (e^eps - 1)^2 ^ e^eps")
def test_criterion_3_cor_ldp():
    rng = np.random.default_rng(42)
    count = 0
    worst_margin = math.inf
    for eps in (0.25, 0.5, 1.0, 2.0):
        for _ in range(50):
            nx, ny = int(rng.integers(2, 7)), int(rng.integers(2, 7))
            kern = random_ldp_kernel(rng, nx, ny, eps)
            ch = Channel(outputs=tuple(range(ny)), inputs=tuple(range(nx)), kernel=kern)
            assert ldp_ratio(ch) <= math.exp(eps) * (1 + 1e-12)
            val = var_functional(ch, random_input_dist(rng, nx))
            bound = min(math.expm1(eps) ** 2, math.exp(eps))
            assert val <= bound + 1e-9
            worst_margin = min(worst_margin, bound - val)
            count += 1
    assert count == 200
    return f"200 channels, min margin {worst_margin:.3e}"


@criterion(4, "finite channels: sum_y Var/E <= |Y| and I <= log2 |Y|")
def test_criterion_4_cor_comm():
    rng = np.random.default_rng(43)
    for _ in range(200):
        nx, ny = int(rng.integers(2, 7)), int(rng.integers(2, 7))
        ch = Channel(outputs=tuple(range(ny)), inputs=tuple(range(nx)),
                     kernel=random_row_stochastic(rng, nx, ny))
        p = random_input_dist(rng, nx)
        assert var_functional(ch, p) <= ny + 1e-9
        assert mutual_info_bits(ch, p) <= math.log2(ny) + 1e-9
    return "200 channels"


@criterion(5, "assumption suites pass for all three constructions")
def test_criterion_5_assumptions():
    worst_exact = 0.0
    for g in GAMMA_GRID:
        for d in (3, 6, 10):
            rep = validate_assumptions(bernoulli_perturbation(d, g), tol=1e-10)
            assert rep.passed, (d, g, rep.max_violations)
            worst_exact = max(worst_exact, rep.max_violations["density_identity"],
                              rep.max_violations["gram_identity"])
        for D in (4, 8, 12):
            rep = validate_assumptions(discrete_perturbation(D, min(g, 1 / (2 * D))), tol=1e-10)
            assert rep.passed, (D, g, rep.max_violations)
    for g in (0.05, 0.25, 0.5):
        fam, _split = gaussian_perturbation(4, g, n_nodes=64)
        rep = validate_assumptions(fam, tol=1e-6)
        assert rep.passed, (g, rep.max_violations)
        assert rep.max_violations["split_identity"] <= 1e-10
    return f"exact-kind max violation {worst_exact:.2e}"


@criterion(6, "cut-paste: H^2 <= 7 sum_t H^2 on 200 random instances")
def test_criterion_6_cut_paste():
    worst_ratio = 0.0
    for idx in range(200):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=77, spawn_key=(idx,)))
        k = int(rng.integers(1, 4))
        n = int(rng.integers(2, 5))
        fam = random_perturbed_family(rng, k, float(rng.choice(GAMMA_GRID)), 0.5)
        proto = random_protocol(rng, fam, n)
        z = tuple(int(v) for v in rng.choice([-1, 1], size=k))
        cert = check_cut_paste(proto, fam, z, int(rng.integers(0, k)))
        assert cert.passed, cert.to_dict()
        worst_ratio = max(worst_ratio, cert.ratio)
    assert worst_ratio <= 7.0
    return f"max H^2 ratio {worst_ratio:.3f} (constant 7)"


@criterion(7, "Assouad step holds for the Bayes and argmin-lp decoders")
def test_criterion_7_assouad():
    checked = 0
    for idx in range(30):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=99, spawn_key=(idx,)))
        k = int(rng.integers(1, 3))
        n = int(rng.integers(1, 4))
        tau = float(rng.choice([0.25, 0.5]))
        fam = random_perturbed_family(rng, k, float(rng.choice(GAMMA_GRID)), tau)
        proto = random_protocol(rng, fam, n)
        bayes = make_bayes_decoder(proto, fam, tau)
        argmin = make_lp_decoder(fam, 2.0, make_posterior_mean_estimator(proto, fam, tau))
        for dec in (bayes, argmin):
            cert = assouad_inequality_check(proto, fam, tau, dec)
            assert cert.passed, cert.to_dict()
            checked += 1
    return f"{checked} decoder checks, every coordinate bounded"


@criterion(8, "measure-change bound on 100 Rademacher-score instances")
def test_criterion_8_measure_change():
    import itertools
    for idx in range(100):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=55, spawn_key=(idx,)))
        m = int(rng.integers(1, 5))
        support = list(itertools.product((-1, 1), repeat=m))
        p = np.full(len(support), 1.0 / len(support))
        k = int(rng.integers(1, m + 1))
        coords = rng.permutation(m)[:k]
        signs = rng.choice([-1, 1], size=k)
        phi = np.array([[signs[a] * x[coords[a]] for x in support] for a in range(k)],
                       dtype=float)
        a = rng.random(len(support)) if idx % 2 == 0 else np.exp(rng.normal(size=len(support)))
        cert = measure_change_check(p, phi, a, sigma_sq=1.0)
        assert cert.passed, cert.to_dict()
    return "100 instances, sigma^2 = 1"


@criterion(9, "binomial moment bound, exhaustive m <= 20 grid")
def test_criterion_9_binomial():
    record = binomial_moment_check(m_max=20, q_grid=tuple(0.1 * t for t in range(1, 10)),
                                   p_grid=(1, 2, 4, 8))
    assert record.passed
    return f"max lhs/rhs ratio {record.max_ratio:.4f}"


@criterion(10, "LDP estimator: 1/sqrt(n) risk scaling and d-invariant normalization")
def test_criterion_10_alg1_rate():
    t0 = time.time()
    cfg = ExperimentConfig(family="bernoulli", estimator="alg1", d=32, s=8,
                           n_grid=(2 ** 13, 2 ** 14, 2 ** 15, 2 ** 16),
                           trials=400, seed=1234, eps=0.5, p=2.0, mean=0.5)
    report = monte_carlo_risk(cfg)
    fit = rate_fit(report)
    assert -0.58 <= fit.slope <= -0.42, f"slope {fit.slope}"
    by_n = {pt.n: pt.risk for pt in report.points}
    quadrupling_ratio = by_n[2 ** 16] / by_n[2 ** 14]
    assert 0.42 <= quadrupling_ratio <= 0.58, f"risk ratio {quadrupling_ratio}"
    normalized = []
    for d in (16, 32, 64):
        s = d // 4
        cfg_d = ExperimentConfig(family="bernoulli", estimator="alg1", d=d, s=s,
                                 n_grid=(2 ** 14,), trials=400, seed=99, eps=0.5,
                                 p=2.0, mean=0.5)
        risk = monte_carlo_risk(cfg_d).points[0].risk
        normalized.append(risk * math.sqrt(2 ** 14 * 0.5 ** 2 / (d * s)))
    spread = max(normalized) / min(normalized)
    assert spread < 1.6, f"normalized spread {spread}"
    elapsed = time.time() - t0
    assert elapsed < 600.0
    return f"slope {fit.slope:+.3f}, spread {spread:.3f}x, elapsed {elapsed:.0f}s"


@criterion(11, "communication estimator: risk decreasing in b, sqrt(nb) scaling")
def test_criterion_11_alg2_rate():
    t0 = time.time()
    risks = {}
    for b in (1, 2, 4):
        cfg = ExperimentConfig(family="bernoulli", estimator="alg2", d=32, s=8,
                               n_grid=(2 ** 14,), trials=400, seed=777, bits=b,
                               p=2.0, mean=0.5)
        risks[b] = monte_carlo_risk(cfg).points[0].risk
    assert risks[1] > risks[2] > risks[4], risks
    normalized = [risks[b] * math.sqrt(2 ** 14 * b) for b in (1, 2, 4)]
    spread = max(normalized) / min(normalized)
    assert spread < 1.6, f"normalized spread {spread}"
    elapsed = time.time() - t0
    assert elapsed < 600.0
    return f"risks {[round(risks[b], 4) for b in (1, 2, 4)]}, spread {spread:.3f}x"


@criterion(12, "Gaussian reduction: Lipschitz transfer, erf_inv, end-to-end risk")
def test_criterion_12_reduction():
    rng = np.random.default_rng(4242)
    lip = math.sqrt(math.e * math.pi / 2.0)
    for _ in range(1000):
        nu = rng.uniform(-ETA, ETA, size=8)
        nu_hat = rng.uniform(-ETA, ETA, size=8)
        mu = np.array([math.sqrt(2) * erf_inv(v) for v in nu])
        mu_hat = np.array([math.sqrt(2) * erf_inv(v) for v in nu_hat])
        for p in (1.0, 2.0, math.inf):
            assert lp_loss(mu, mu_hat, p) <= lip * lp_loss(nu, nu_hat, p) + 1e-9
    worst_rt = max(abs(math.erf(erf_inv(float(y))) - float(y))
                   for y in rng.uniform(-0.999999, 0.999999, size=1000))
    assert worst_rt <= 1e-12

    base = dict(d=16, s=4, n_grid=(2 ** 14,), trials=200, seed=31, eps=1.0,
                p=2.0, mean=0.6)
    cfg_g = ExperimentConfig(family="gaussian", estimator="alg1", **base)
    cfg_b = ExperimentConfig(family="bernoulli", estimator="alg1", **base)
    risk_g = monte_carlo_risk(cfg_g).points[0].risk
    risk_b = monte_carlo_risk(cfg_b).points[0].risk
    ratio = risk_g / risk_b
    assert ratio <= 2.1, f"gaussian/bernoulli risk ratio {ratio}"
    return f"roundtrip {worst_rt:.1e}, end-to-end ratio {ratio:.2f}x (bound 2.1)"


@criterion(13, "prior sparsity: exact binomial CDF >= 1 - tau/4")
def test_criterion_13_prior_sparsity():
    values = {}
    for d, s in ((64, 32), (256, 64), (1024, 64)):
        tau = s / (2.0 * d)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            prob = sparsity_prior_prob(d, tau, s)
        assert prob >= 1.0 - tau / 4.0, (d, s, prob)
        values[(d, s)] = prob
    return ", ".join(f"({d},{s})={v:.6f}" for (d, s), v in values.items())
