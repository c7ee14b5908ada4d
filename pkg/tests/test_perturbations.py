import math

import numpy as np
import pytest

from localinfo import (InvalidParameterError, bernoulli_perturbation, binomial_cdf,
                       check_distance_law, discrete_perturbation, enumerate_z, flip,
                       gaussian_perturbation, lp_loss, sparsity_prior_prob,
                       validate_assumptions)
from localinfo.quadrature import gh_rule


def brute_pmf_identity_violation(fam, z):
    """Independent oracle: compare pmf ratios against 1 + a_{z,i} phi_{z,i}."""
    worst = 0.0
    p = fam.pmf(z)
    for i in range(fam.k):
        ratio = fam.pmf(flip(z, i)) / p
        ident = 1.0 + fam.alpha_zi(z, i) * fam.score_table(z)[i]
        worst = max(worst, float(np.max(np.abs(ratio - ident))))
    return worst


class TestBernoulliConstruction:
    def test_vanishing_gamma_limit(self):
        fam = bernoulli_perturbation(3, 1e-9)
        for z in enumerate_z(3):
            assert np.max(np.abs(fam.theta(z))) <= 1e-9
            assert all(abs(fam.alpha_zi(z, i)) <= 2e-9 for i in range(3))
            assert np.allclose(fam.pmf(z), 1 / 8, atol=1e-9)

    def test_half_gamma_coefficients(self):
        # a_{z,i} = g / sqrt(1 - g^2 (1+z_i)/2): 1/2 at z_i=-1, 1/sqrt(3) at z_i=+1
        fam = bernoulli_perturbation(2, 0.5)
        assert fam.alpha_zi((-1, 1), 0) == pytest.approx(0.5)
        assert fam.alpha_zi((-1, 1), 1) == pytest.approx(0.5 / math.sqrt(0.75))
        assert fam.alpha_zi((-1, 1), 1) == pytest.approx(0.5773502691896258)

    def test_gram_identity_exact(self):
        fam = bernoulli_perturbation(3, 0.4)
        z = (1, -1, 1)
        table = fam.score_table(z)
        gram = (table * fam.pmf(z)) @ table.T
        assert np.max(np.abs(gram - np.eye(3))) < 1e-12

    def test_density_identity_all_z(self):
        fam = bernoulli_perturbation(3, 0.4)
        for z in enumerate_z(3):
            assert brute_pmf_identity_violation(fam, z) < 1e-12

    def test_flipped_mass_sums_to_one(self):
        fam = bernoulli_perturbation(4, 0.3)
        for z in ((1, 1, -1, -1), (-1,) * 4):
            p = fam.pmf(z)
            for i in range(4):
                mass = float(np.sum((1.0 + fam.alpha_zi(z, i) * fam.score_table(z)[i]) * p))
                assert mass == pytest.approx(1.0, abs=1e-14)

    def test_alpha_bound(self):
        for g in (0.1, 0.3, 0.5):
            fam = bernoulli_perturbation(3, g)
            assert all(abs(fam.alpha_zi(z, i)) <= fam.alpha + 1e-15
                       for z in enumerate_z(3) for i in range(3))

    def test_gamma_range_enforced(self):
        with pytest.raises(InvalidParameterError):
            bernoulli_perturbation(3, 0.0)
        with pytest.raises(InvalidParameterError):
            bernoulli_perturbation(3, 0.6)


class TestGaussianConstruction:
    def test_alpha_value(self):
        fam, _ = gaussian_perturbation(2, 0.25)
        assert fam.alpha == pytest.approx(math.sqrt(math.exp(0.25) - 1.0), rel=1e-14)

    @pytest.mark.parametrize("gamma", [0.05, 0.25, 0.5])
    def test_orthonormality_by_quadrature(self, gamma):
        fam, _ = gaussian_perturbation(2, gamma)
        x, w = gh_rule(fam.n_nodes)
        for zi in (-1, 1):
            t = x + gamma * (zi + 1.0)
            phi = fam._phi1(zi, t)
            assert abs(float(w @ phi)) < 1e-8
            assert abs(float(w @ (phi * phi)) - 1.0) < 1e-8

    @pytest.mark.parametrize("gamma", [0.05, 0.25, 0.5])
    def test_split_residual_pointwise(self, gamma):
        fam, split = gaussian_perturbation(2, gamma)
        x, _ = gh_rule(fam.n_nodes)
        for zi in (-1, 1):
            t = x + gamma * (zi + 1.0)
            resid = (fam.alpha * fam._phi1(zi, t)
                     - split.coef_linear * split.xi_coord(zi, t)
                     - split.coef_remainder * split.psi_coord(zi, t))
            assert np.max(np.abs(resid)) < 1e-10

    def test_split_parts_standardized(self):
        fam, split = gaussian_perturbation(2, 0.25)
        x, w = gh_rule(fam.n_nodes)
        for zi in (-1, 1):
            t = x + 0.25 * (zi + 1.0)
            for part in (split.xi_coord(zi, t), split.psi_coord(zi, t)):
                assert abs(float(w @ part)) < 1e-8
                assert abs(float(w @ (part * part)) - 1.0) < 1e-7

    def test_density_identity_on_nodes(self):
        fam, _ = gaussian_perturbation(2, 0.25)
        x, _ = gh_rule(fam.n_nodes)
        for zi in (-1, 1):
            t = x + 0.25 * (zi + 1.0)
            lhs = fam.density_ratio_1d(zi, t)
            rhs = 1.0 + fam.alpha * fam._phi1(zi, t)
            assert np.max(np.abs(lhs - rhs)) < 1e-8

    def test_gamma_range_enforced(self):
        with pytest.raises(InvalidParameterError):
            gaussian_perturbation(2, 0.0)
        with pytest.raises(InvalidParameterError):
            gaussian_perturbation(2, 0.7)


class TestDiscreteConstruction:
    def test_zero_gamma_uniform(self):
        fam = discrete_perturbation(6, 0.0)
        assert fam.alpha == 0.0
        for z in enumerate_z(3):
            assert np.allclose(fam.pmf(z), 1 / 6)

    def test_boundary_alpha_value(self):
        # 2 sqrt(2D) g / sqrt(1 - D^2 g^2) at D=4, g=1/8
        fam = discrete_perturbation(4, 1 / 8)
        expected = 2 * math.sqrt(8) * (1 / 8) / math.sqrt(1 - 1 / 4)
        assert fam.alpha == pytest.approx(expected, rel=1e-14)
        assert fam.alpha == pytest.approx(0.8164965809277261)
        assert fam.alpha <= 4 * (1 / 8) * math.sqrt(4) + 1e-15

    def test_gram_identity_exact(self):
        fam = discrete_perturbation(6, 0.05)
        for z in enumerate_z(3):
            table = fam.score_table(z)
            gram = (table * fam.pmf(z)) @ table.T
            assert np.max(np.abs(gram - np.eye(3))) < 1e-12

    def test_density_identity(self):
        fam = discrete_perturbation(6, 0.05)
        for z in enumerate_z(3):
            assert brute_pmf_identity_violation(fam, z) < 1e-13
            # mass routed through the identity lands back at 1 exactly
            p = fam.pmf(z)
            for i in range(3):
                mass = float(np.sum((1.0 + fam.alpha_zi(z, i) * fam.score_table(z)[i]) * p))
                assert mass == pytest.approx(1.0, abs=1e-14)

    def test_alpha_dominated_by_explicit_bound(self):
        for D in (2, 4, 8, 12):
            g = 1.0 / (2 * D)
            fam = discrete_perturbation(D, g)
            assert fam.alpha <= 4 * g * math.sqrt(D) + 1e-12

    def test_invalid_parameters(self):
        with pytest.raises(InvalidParameterError):
            discrete_perturbation(5, 0.01)
        with pytest.raises(InvalidParameterError):
            discrete_perturbation(4, 0.2)


class TestValidateAssumptions:
    def test_bernoulli_passes_tight_tolerance(self):
        rep = validate_assumptions(bernoulli_perturbation(3, 0.4, 0.5), tol=1e-10)
        assert rep.passed
        assert rep.max_violations["density_identity"] <= 1e-10
        assert rep.max_violations["gram_identity"] <= 1e-10

    def test_discrete_passes_exact(self):
        rep = validate_assumptions(discrete_perturbation(6, 0.05), tol=1e-12)
        assert rep.passed

    def test_gaussian_passes_quadrature_tolerance(self):
        fam, _ = gaussian_perturbation(3, 0.25)
        rep = validate_assumptions(fam, tol=1e-6)
        assert rep.passed
        assert rep.max_violations["split_identity"] <= 1e-10

    def test_bernoulli_subgaussian_proxy(self):
        # the proxy must sit below (1+g)/(1-g), here ~1.857 at g = 0.3
        rep = validate_assumptions(bernoulli_perturbation(3, 0.3), tol=1e-10)
        bound = (1 + 0.3) / (1 - 0.3)
        assert bound == pytest.approx(1.857142857142857)
        assert rep.details["subgaussian_proxy"] <= bound
        assert rep.max_violations["subgaussian_excess"] == 0.0

    def test_report_json_fields(self):
        import json
        rep = validate_assumptions(discrete_perturbation(4, 0.1))
        doc = json.loads(rep.to_json())
        assert set(doc) >= {"construction", "gamma", "tol", "max_violations", "pass"}


class TestSparsityPrior:
    def test_tau_half_certain(self):
        # cut at 2 tau d = d covers the whole support
        with pytest.warns(UserWarning):
            assert sparsity_prior_prob(4, 0.5, 4) == 1.0

    def test_exact_binomial_value_64_32(self):
        import warnings
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            prob = sparsity_prior_prob(64, 0.25, 32)
        # oracle: direct high-precision summation with Fractions
        from fractions import Fraction
        exact = sum(Fraction(math.comb(64, j)) * Fraction(1, 4) ** j * Fraction(3, 4) ** (64 - j)
                    for j in range(33))
        assert prob == pytest.approx(float(exact), abs=1e-12)
        assert prob >= 1 - 0.25 / 4

    def test_256_case_bound(self):
        import warnings
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            prob = sparsity_prior_prob(256, 0.125, 64)
        assert prob >= 1 - 1 / 16
        assert prob >= 1 - 0.125 / 4

    def test_binomial_cdf_edges(self):
        assert binomial_cdf(10, 0.3, -1) == 0.0
        assert binomial_cdf(10, 0.3, 10) == 1.0
        assert binomial_cdf(10, 0.0, 0) == 1.0


class TestFlip:
    def test_examples(self):
        assert flip((1, 1), 0) == (-1, 1)
        assert flip((1, -1, 1), 2) == (1, -1, -1)

    def test_involution_random(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            k = int(rng.integers(1, 9))
            z = tuple(int(v) for v in rng.choice([-1, 1], size=k))
            i = int(rng.integers(0, k))
            assert flip(flip(z, i), i) == z
            assert sum(a != b for a, b in zip(z, flip(z, i))) == 1

    def test_out_of_range(self):
        with pytest.raises(InvalidParameterError):
            flip((1, -1), 2)


class TestDistanceLaws:
    @pytest.mark.parametrize("p", [1.0, 2.0, 3.0, math.inf])
    def test_bernoulli_gap_is_gamma_per_flip(self, p):
        fam = bernoulli_perturbation(4, 0.3)
        rng = np.random.default_rng(0)
        for _ in range(20):
            z = tuple(int(v) for v in rng.choice([-1, 1], size=4))
            z2 = tuple(int(v) for v in rng.choice([-1, 1], size=4))
            assert check_distance_law(fam, z, z2, p) < 1e-12

    @pytest.mark.parametrize("p", [1.0, 2.0, 3.0, math.inf])
    def test_gaussian_gap_is_two_gamma_per_flip(self, p):
        fam, _ = gaussian_perturbation(4, 0.2)
        assert check_distance_law(fam, (1, 1, -1, -1), (-1, 1, 1, -1), p) < 1e-12

    @pytest.mark.parametrize("p", [1.0, 2.0, 3.0])
    def test_discrete_gap_law(self, p):
        # each flip moves two pmf entries by 2 gamma: lp gap = 2g (2 Ham)^(1/p)
        fam = discrete_perturbation(8, 0.05)
        z, z2 = (1, 1, -1, -1), (-1, 1, 1, -1)
        expected = 2 * 0.05 * (2 * 2) ** (1.0 / p)
        assert lp_loss(fam.theta(z), fam.theta(z2), p) == pytest.approx(expected, abs=1e-12)
        assert check_distance_law(fam, z, z2, p) < 1e-12

    def test_sparsity_membership(self):
        # z with at most 2 tau d ones yields an s-sparse mean, tau = s/(2d)
        d, s = 8, 2
        tau = s / (2 * d)
        fam = bernoulli_perturbation(d, 0.3, tau)
        rng = np.random.default_rng(1)
        for _ in range(200):
            z = tuple(int(v) for v in np.where(rng.random(d) < tau, 1, -1))
            if sum(v == 1 for v in z) <= 2 * tau * d:
                assert np.count_nonzero(fam.theta(z)) <= s
