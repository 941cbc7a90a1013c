"""Pilot runs and partial-posterior convergence tables."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateInput
from .estimator import level_seed, nested_subset, replicate_seed
from .schedule import ConvergenceFit, fit_beta


@dataclass
class PilotResult:
    fit: ConvergenceFit
    sizes: list[int]
    squared_diffs: list[float]
    reference_size: int
    repeats: int


def pilot_squared_diffs(
    provider,
    sizes: Sequence[int],
    repeats: int,
    seed: int,
    reference: str = "largest",
    distance: Callable | None = None,
) -> tuple[list[int], list[float], int]:
    """Mean squared gap between small-level expectations and a reference.

    With ``reference="largest"`` the last entry of ``sizes`` is the reference
    and each repeat evaluates all levels on nested prefixes of one random
    subset.  With ``reference="full"`` the reference is the expectation on
    the whole dataset.
    """
    sizes = [int(n) for n in sizes]
    if distance is None:
        def distance(u, v):
            return float(np.sum((np.asarray(u) - np.asarray(v)) ** 2))
    N = provider.dataset_size
    if reference == "full":
        ref_size = N
        full = provider.evaluate(np.arange(N), level_seed(seed, 0))
        fit_sizes = [n for n in sizes if n < N]
    elif reference == "largest":
        ref_size = sizes[-1]
        fit_sizes = sizes[:-1]
    else:
        raise ValueError(f"reference must be 'largest' or 'full', got {reference!r}")
    sq = np.zeros(len(fit_sizes))
    for k in range(repeats):
        s = replicate_seed(seed, k)
        idx = nested_subset(N, max(sizes), np.random.default_rng(s))
        target = full if reference == "full" else provider.evaluate(idx[:ref_size], level_seed(s, len(sizes)))
        for j, n in enumerate(fit_sizes):
            sq[j] += distance(provider.evaluate(idx[:n], level_seed(s, j + 1)), target)
    return fit_sizes, (sq / repeats).tolist(), ref_size


def run_pilot(provider, sizes: Sequence[int], repeats: int = 30, seed: int = 0, reference: str = "largest") -> PilotResult:
    """Fit ``c n^-beta`` to pilot squared differences; raises if the fit is degenerate."""
    fit_sizes, diffs, ref = pilot_squared_diffs(provider, sizes, repeats, seed, reference)
    fit = fit_beta(fit_sizes, diffs)
    if fit.degenerate:
        raise DegenerateInput(f"pilot squared differences give no decay (beta={fit.beta:.3g})")
    return PilotResult(fit=fit, sizes=fit_sizes, squared_diffs=diffs, reference_size=ref, repeats=repeats)


@dataclass
class ConvergenceRow:
    n: int
    mean: float
    sd: float
    lower: float
    upper: float
    repeats: int

    @property
    def band_defined(self) -> bool:
        return self.repeats >= 2

    @property
    def width(self) -> float:
        return self.upper - self.lower


def convergence_table(
    provider,
    sizes: Sequence[int],
    repeats: int = 50,
    seed: int = 0,
    reduce: Callable | None = None,
) -> list[ConvergenceRow]:
    """Repeat the subsampled expectation ``repeats`` times per size.

    Each repeat uses an independent random subset.  ``reduce`` maps a
    (possibly vector) expectation to the reported scalar.  The band is
    ``mean +- 1.96 sd``; it is NaN when ``repeats == 1``.
    """
    N = provider.dataset_size
    rows = []
    for i, n in enumerate(sizes):
        values = []
        for k in range(repeats):
            s = replicate_seed(seed, i * 1_000_003 + k)
            idx = nested_subset(N, int(n), np.random.default_rng(s))
            v = provider.evaluate(idx, level_seed(s, 1))
            values.append(float(reduce(v)) if reduce is not None else float(v))
        values = np.array(values)
        mean = float(values.mean())
        sd = float(values.std(ddof=1)) if repeats > 1 else math.nan
        rows.append(ConvergenceRow(int(n), mean, sd, mean - 1.96 * sd, mean + 1.96 * sd, repeats))
    return rows
