"""Workbench for distributed estimation under local information constraints:
exact certification of the information-contraction machinery on enumerable
instances, and Monte Carlo reproduction of the matching protocols' risk
scalings.
"""

from .channels import (Channel, ConstraintSpec, channel_from_json, channel_to_json,
                       comm_bits, constant_channel, identity_channel, ldp_ratio,
                       make_coordinate_channel, make_rr_channel, make_rr_limit_channel,
                       make_sign_channel, make_subset_forward_channel, output_dist,
                       rr_bias, sample_output, satisfies_constraint)
from .contraction import (AssouadCertificate, CutPasteCertificate, MeasureChangeCertificate,
                          Protocol, TheoremCertificate, TranscriptDist, assouad_inequality_check,
                          avg_discrepancy, check_cut_paste, check_theorem_main, hellinger_sq,
                          info_functional, make_bayes_decoder, make_lp_decoder,
                          make_posterior_mean_estimator, measure_change_check, mixture_pm,
                          mutual_info_bits, nearest_z, simulate_transcripts, transcript_dist,
                          transcript_tables_all, tv, var_functional)
from .errors import (BudgetError, ConfigurationError, DomainError, InvalidParameterError,
                     UnsupportedOperationError)
from .families import (DiscretePmf, ProductBernoulli, SphericalGaussian,
                       linf_surrogate_exponent, lp_loss)
from .harness import (ExperimentConfig, RateFit, RiskPoint, RiskReport, load_config,
                      monte_carlo_risk, rate_fit, run_verification_suite)
from .perturbations import (AssumptionReport, GaussianScoreSplit, PerturbedFamily,
                            bernoulli_perturbation, binomial_cdf, check_distance_law,
                            discrete_perturbation, enumerate_z, flip, gaussian_perturbation,
                            pairwise_distance_law, sparsity_prior_prob, validate_assumptions)
from .protocols import (ETA, BernoulliPlayerSource, BinomialMomentRecord,
                        GaussianSignPlayerSource, PruningState, ReplayPlayerSource,
                        alg1_ldp_estimate, alg2_comm_estimate, binomial_central_moment,
                        binomial_moment_check, erf_inv, gaussian_reduce_estimate, save_replay)
from .report import render_risk_figure, write_risk_csv, write_risk_json
from .suites import SUITES, SuiteReport

__version__ = "0.1.0"
