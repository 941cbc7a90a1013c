"""Seeded random-walk Metropolis used for partial posteriors without closed forms."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DivergentChain, NonFiniteTarget

TARGET_ACCEPTANCE = 0.234
MAX_CONSECUTIVE_REJECTIONS = 10_000


@dataclass(frozen=True)
class SamplerConfig:
    iterations: int = 500
    burn_in: int = 100
    initial_step: float = 1.0
    adapt: bool = True
    thin: int = 1

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if not self.initial_step > 0:
            raise ValueError("initial_step must be positive")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")

    @property
    def chain_length(self) -> int:
        """Total iterations including burn-in; the per-level cost multiplier."""
        return self.iterations + self.burn_in


@dataclass
class ChainResult:
    samples: np.ndarray
    acceptance_rate: float
    final_step: float
    accepted: int = 0
    proposed: int = 0


def adaptive_rwm(
    log_target: Callable[[np.ndarray], float],
    init,
    config: SamplerConfig,
    seed,
    proposal_chol: np.ndarray | None = None,
) -> ChainResult:
    """Random-walk Metropolis with Gaussian proposals ``theta + step * C z``.

    ``C`` defaults to the identity (isotropic proposals).  During burn-in the
    step follows a Robbins-Monro recursion on ``log step`` toward 0.234
    acceptance; it is frozen afterwards so retained draws come from a fixed
    reversible kernel.  Acceptance rate is reported over retained iterations.
    """
    rng = np.random.default_rng(seed)
    theta = np.atleast_1d(np.asarray(init, dtype=float)).copy()
    dim = theta.size
    chol = np.eye(dim) if proposal_chol is None else np.asarray(proposal_chol, dtype=float)
    logp = float(log_target(theta))
    if not np.isfinite(logp):
        raise NonFiniteTarget(f"log target is {logp} at the initial point")

    log_step = math.log(config.initial_step)
    total = config.burn_in + config.iterations
    noise = rng.standard_normal((total, dim)) @ chol.T
    log_u = np.log(rng.random(total))
    kept = []
    accepted = 0
    rejected_run = 0
    for i in range(total):
        proposal = theta + math.exp(log_step) * noise[i]
        logp_new = float(log_target(proposal))
        log_ratio = logp_new - logp if np.isfinite(logp_new) else -np.inf
        accept = log_u[i] < log_ratio
        if accept:
            theta, logp = proposal, logp_new
            rejected_run = 0
        else:
            rejected_run += 1
            if rejected_run > MAX_CONSECUTIVE_REJECTIONS:
                raise DivergentChain(f"{rejected_run} consecutive rejections at iteration {i}")
        if i < config.burn_in:
            if config.adapt:
                rate = min(1.0, math.exp(min(log_ratio, 0.0)))
                log_step += (i + 1) ** -0.6 * (rate - TARGET_ACCEPTANCE)
        else:
            accepted += accept
            if (i - config.burn_in) % config.thin == 0:
                kept.append(theta.copy())
    return ChainResult(
        samples=np.array(kept),
        acceptance_rate=accepted / config.iterations,
        final_step=math.exp(log_step),
        accepted=accepted,
        proposed=config.iterations,
    )


def empirical_expectation(chain: ChainResult, functional: Callable | None = None):
    """Mean of ``functional(theta)`` over retained draws (identity by default)."""
    if len(chain.samples) == 0:
        raise ValueError("empty chain")
    if functional is None:
        return chain.samples.mean(axis=0)
    values = np.array([functional(s) for s in chain.samples], dtype=float)
    return values.mean(axis=0)


def batch_means_mcse(x, n_batches: int | None = None) -> float:
    """Monte Carlo standard error of the mean of a 1-d chain by batch means."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n < 4:
        raise ValueError("need at least 4 draws for batch means")
    if n_batches is None:
        n_batches = int(math.floor(math.sqrt(n)))
    b = n // n_batches
    means = x[: b * n_batches].reshape(n_batches, b).mean(axis=1)
    return float(np.std(means, ddof=1) / math.sqrt(n_batches))
