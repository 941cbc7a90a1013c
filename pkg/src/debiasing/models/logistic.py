"""Bayesian logistic regression with independent Laplace(0, 1) priors."""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy.optimize import minimize

from ..errors import LowIdentifiabilityWarning
from ..sampler import SamplerConfig, adaptive_rwm


def add_bias_column(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return np.column_stack([X, np.ones(len(X))])


class LogisticRegressionModel:
    """``p(y_i | x_i, beta) = sigmoid(y_i beta^T x_i)`` with ``y_i`` in {-1, +1}.

    ``X`` must already contain the constant column (see
    :func:`add_bias_column`).  ``weight_index=None`` reports all weights.
    """

    functional_name = "posterior_mean_weight"

    def __init__(self, X, y, weight_index: int | None = 0, sampler_config: SamplerConfig = SamplerConfig(), prior_scale: float = 1.0):
        self.X = np.asarray(X, dtype=float)
        self.y = np.asarray(y, dtype=float)
        if not np.all(np.isin(self.y, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        self.weight_index = weight_index
        self.sampler_config = sampler_config
        self.prior_scale = prior_scale

    @classmethod
    def from_dataset(cls, dataset, **kwargs) -> "LogisticRegressionModel":
        return cls(add_bias_column(dataset.covariates), dataset.labels, **kwargs)

    @property
    def dataset_size(self) -> int:
        return len(self.y)

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def _margins(self, indices):
        return self.y[indices, None] * self.X[indices]

    def log_posterior(self, indices):
        Z = self._margins(indices)
        scale = self.prior_scale

        def logp(beta):
            return -np.logaddexp(0.0, -Z @ beta).sum() - np.abs(beta).sum() / scale

        return logp

    def map_estimate(self, indices):
        """Posterior mode and the likelihood Hessian there (Laplace proposal shape)."""
        Z = self._margins(indices)
        scale = self.prior_scale

        def neg(beta):
            m = Z @ beta
            s = 0.5 * (1 - np.tanh(0.5 * m))  # sigmoid(-m), overflow-safe
            value = np.logaddexp(0.0, -m).sum() + np.abs(beta).sum() / scale
            grad = -Z.T @ s + np.sign(beta) / scale
            return value, grad

        res = minimize(neg, np.zeros(self.dim), jac=True, method="L-BFGS-B")
        m = Z @ res.x
        w = 0.25 * (1 - np.tanh(0.5 * m) ** 2)  # sigmoid(m) * sigmoid(-m)
        hessian = (Z * w[:, None]).T @ Z + np.eye(self.dim) / scale**2
        return res.x, hessian

    def chain(self, indices, config: SamplerConfig, seed):
        indices = np.asarray(indices, dtype=np.int64)
        labels = self.y[indices]
        if np.all(labels == labels[0]):
            warnings.warn("subset holds a single class: posterior is prior-dominated", LowIdentifiabilityWarning)
        mode, hessian = self.map_estimate(indices)
        chol = np.linalg.cholesky(np.linalg.inv(hessian))
        return adaptive_rwm(self.log_posterior(indices), mode, config, seed, chol)

    def evaluate(self, indices, sub_seed):
        return logistic_weight_expectation(self, indices, self.weight_index, self.sampler_config, sub_seed)


def logistic_weight_expectation(model: LogisticRegressionModel, indices, weight_index, sampler_config: SamplerConfig, seed):
    """Posterior mean of ``beta[weight_index]`` on ``data[indices]`` from one RWM chain.

    The chain starts at the mode and proposes along the Laplace covariance.
    """
    chain = model.chain(indices, sampler_config, seed)
    means = chain.samples.mean(axis=0)
    return means if weight_index is None else float(means[weight_index])


def default_step(dim: int) -> float:
    return 2.38 / math.sqrt(dim)
