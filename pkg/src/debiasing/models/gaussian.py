"""Gaussian likelihood with unknown mean and known covariance."""

from __future__ import annotations

import numpy as np

from ..errors import SingularCovariance
from ..sampler import ChainResult, SamplerConfig, adaptive_rwm


def nearest_spd(A, floor: float = 1e-1) -> np.ndarray:
    """Closest symmetric matrix (Frobenius) whose eigenvalues are all >= ``floor``."""
    A = np.asarray(A, dtype=float)
    sym = (A + A.T) / 2
    vals, vecs = np.linalg.eigh(sym)
    return (vecs * np.maximum(vals, floor)) @ vecs.T


def _inverse_spd(S, what):
    S = np.atleast_2d(np.asarray(S, dtype=float))
    if not np.allclose(S, S.T):
        raise SingularCovariance(f"{what} is not symmetric")
    try:
        chol = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        raise SingularCovariance(f"{what} is not positive definite") from None
    inv_chol = np.linalg.inv(chol)
    return inv_chol.T @ inv_chol


class GaussianMeanModel:
    """``x_i ~ N(mu, Sigma)`` with prior ``mu ~ N(m0, S0)`` (defaults ``N(0, I)``).

    ``component`` selects the reported coordinate of the posterior mean;
    ``None`` reports the whole vector.
    """

    functional_name = "posterior_mean"

    def __init__(self, data, likelihood_cov, prior_mean=None, prior_cov=None, component: int | None = 0):
        data = np.asarray(data, dtype=float)
        self.data = data.reshape(len(data), -1)
        d = self.data.shape[1]
        self.likelihood_cov = np.atleast_2d(np.asarray(likelihood_cov, dtype=float))
        if self.likelihood_cov.shape != (d, d):
            raise SingularCovariance(f"likelihood covariance must be {d}x{d}")
        self.lik_precision = _inverse_spd(self.likelihood_cov, "likelihood covariance")
        self.prior_mean = np.zeros(d) if prior_mean is None else np.atleast_1d(np.asarray(prior_mean, dtype=float))
        prior_cov = np.eye(d) if prior_cov is None else np.atleast_2d(np.asarray(prior_cov, dtype=float))
        self.prior_precision = _inverse_spd(prior_cov, "prior covariance")
        self.component = component

    @property
    def dataset_size(self) -> int:
        return len(self.data)

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def posterior(self, indices=None, n: int | None = None, total=None):
        """Posterior mean and covariance given ``data[indices]``.

        Alternatively pass the count ``n`` and the sum of observations
        ``total`` directly.
        """
        if indices is not None:
            sub = self.data[indices]
            n, total = len(sub), sub.sum(axis=0)
        elif total is None:
            n, total = 0, np.zeros(self.dim)
        precision = self.prior_precision + n * self.lik_precision
        cov = np.linalg.inv(precision)
        cov = (cov + cov.T) / 2
        mean = cov @ (self.prior_precision @ self.prior_mean + self.lik_precision @ np.asarray(total, dtype=float))
        return mean, cov

    def _select(self, mean):
        return float(mean[self.component]) if self.component is not None else mean

    def evaluate(self, indices, sub_seed=None):
        return gaussian_mean_expectation(self, indices)

    def log_posterior(self, indices):
        sub = self.data[indices]
        n, total = len(sub), sub.sum(axis=0)
        scatter_mean = total / max(n, 1)

        def logp(mu):
            r0 = mu - self.prior_mean
            r = mu - scatter_mean
            return -0.5 * (r0 @ self.prior_precision @ r0) - 0.5 * n * (r @ self.lik_precision @ r)

        return logp

    def sampled_chain(self, indices, config: SamplerConfig, seed) -> ChainResult:
        mean, cov = self.posterior(indices)
        return adaptive_rwm(self.log_posterior(indices), mean, config, seed, np.linalg.cholesky(cov))

    def sampled_expectation(self, indices, config: SamplerConfig, seed):
        """Same functional estimated by random-walk Metropolis instead of the closed form."""
        chain = self.sampled_chain(indices, config, seed)
        return self._select(chain.samples.mean(axis=0))


def gaussian_mean_expectation(model: GaussianMeanModel, indices):
    """``(n Sigma^-1 + S0^-1)^-1 (Sigma^-1 sum x_i + S0^-1 m0)``, component extracted.

    An empty index set gives the prior mean.
    """
    indices = np.asarray(indices, dtype=np.int64)
    mean, _ = model.posterior(indices)
    return model._select(mean)


def expected_posterior_mean(model: GaussianMeanModel, n: int, true_mean) -> np.ndarray:
    """Mean over datasets of the n-observation posterior mean, data ~ N(true_mean, Sigma)."""
    mean, _ = model.posterior(n=n, total=n * np.atleast_1d(np.asarray(true_mean, dtype=float)))
    return mean
