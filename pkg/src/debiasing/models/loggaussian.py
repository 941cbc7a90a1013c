"""Log-normal observations; functional is the posterior mean of sigma."""

from __future__ import annotations

import math
import warnings

import numpy as np

from ..errors import LowIdentifiabilityWarning, SubsetTooSmall
from ..sampler import SamplerConfig, adaptive_rwm

# Flat prior box on (mu, log sigma).
MU_BOUND = 1e3
LOG_SIGMA_BOUNDS = (-20.0, 20.0)


class LogGaussianModel:
    """``log x_i ~ N(mu, sigma^2)`` with flat priors on ``(mu, log sigma)`` over a box.

    Partial posteriors are sampled by random-walk Metropolis on
    ``(mu, log sigma)``.  The log-likelihood is evaluated from the subset's
    sufficient statistics; cost accounting still charges one evaluation per
    datum per iteration.
    """

    functional_name = "posterior_mean_sigma"

    def __init__(self, data, sampler_config: SamplerConfig = SamplerConfig()):
        data = np.asarray(data, dtype=float).ravel()
        if np.any(data <= 0):
            raise ValueError("log-Gaussian observations must be positive")
        self.log_data = np.log(data)
        self.sampler_config = sampler_config

    @property
    def dataset_size(self) -> int:
        return len(self.log_data)

    def log_posterior(self, n: int, s1: float, s2: float):
        lo, hi = LOG_SIGMA_BOUNDS

        def logp(theta):
            mu, log_sigma = theta
            if abs(mu) > MU_BOUND or not lo <= log_sigma <= hi:
                return -math.inf
            ss = s2 - 2 * mu * s1 + n * mu * mu
            return -n * log_sigma - 0.5 * ss * math.exp(-2 * log_sigma)

        return logp

    def evaluate(self, indices, sub_seed):
        return loggaussian_sigma_expectation(self, indices, self.sampler_config, sub_seed)


def loggaussian_sigma_expectation(model: LogGaussianModel, indices, sampler_config: SamplerConfig, seed) -> float:
    """Posterior mean of sigma on ``data[indices]`` from one RWM chain."""
    y = model.log_data[np.asarray(indices, dtype=np.int64)]
    n = len(y)
    if n < 2:
        raise SubsetTooSmall(f"sigma is not identified from {n} observation(s) under a flat prior")
    s1, s2 = float(y.sum()), float(np.dot(y, y))
    mean = s1 / n
    sd = float(np.std(y))
    lo, hi = LOG_SIGMA_BOUNDS
    if sd <= math.exp(lo):
        warnings.warn("all observations identical: sigma collapses to the prior boundary", LowIdentifiabilityWarning)
        sd = math.exp(lo + 1)
    init = np.array([mean, math.log(sd)])
    # Laplace-approximation scales for the proposal
    chol = np.diag([sd / math.sqrt(n), 1 / math.sqrt(2 * n)])
    chain = adaptive_rwm(model.log_posterior(n, s1, s2), init, sampler_config, seed, chol)
    return float(np.mean(np.exp(chain.samples[:, 1])))
