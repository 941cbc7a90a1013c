"""Unbiased estimation of posterior expectations from randomly truncated
paths of partial posteriors."""

from .estimator import (
    DebiasEstimate,
    DebiasReplicate,
    PartialExpectationPath,
    convergence_trace,
    exact_expectation_oracle,
    run_debias,
    run_replication,
    second_moment_exact,
    telescoping_estimate,
)
from .sampler import ChainResult, SamplerConfig, adaptive_rwm, empirical_expectation
from .schedule import (
    BatchSchedule,
    ConvergenceFit,
    CostModel,
    TruncationDistribution,
    build_geometric_schedule,
    build_truncation_geometric,
    expected_likelihood_evals,
    fit_beta,
    sample_truncation,
    second_moment_bound,
    tune_alpha,
)

__version__ = "0.1.0"
