"""Batch schedules, truncation laws, and the cost/variance tradeoff.

Everything here is closed-form arithmetic over geometric ladders of subset
sizes ``n_t = a * ratio**(t-1)`` and geometric truncation laws
``P[T = t] ∝ 2**(-alpha*t)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    AlphaAboveOneWarning,
    AlphaExceedsBeta,
    DegenerateInput,
    InvalidRatio,
    LengthMismatch,
    NoFiniteMinimum,
    NonIntegralLevels,
    NonPositiveAlpha,
)

ALPHA_MARGIN = 0.01


@dataclass(frozen=True)
class BatchSchedule:
    """Ladder of nested subset sizes ``n_1 < ... < n_L = N``."""

    a: int
    ratio: int
    L: int
    sizes: tuple[int, ...]

    @property
    def N(self) -> int:
        return self.sizes[-1]

    @property
    def cumulative_sizes(self) -> np.ndarray:
        return np.cumsum(np.asarray(self.sizes, dtype=np.int64))


def build_geometric_schedule(a: int, ratio: int, N: int) -> BatchSchedule:
    """Geometric ladder from ``a`` to ``N``; ``N/a`` must be a power of ``ratio``."""
    a, ratio, N = int(a), int(ratio), int(N)
    if ratio < 2:
        raise InvalidRatio(f"ratio must be an integer >= 2, got {ratio}")
    if a < 1 or N < a:
        raise NonIntegralLevels(f"need 1 <= a <= N, got a={a}, N={N}")
    sizes = [a]
    while sizes[-1] < N:
        sizes.append(sizes[-1] * ratio)
    if sizes[-1] != N:
        raise NonIntegralLevels(
            f"N/a = {N}/{a} is not a power of {ratio}; "
            f"largest admissible N is {largest_admissible_n(a, ratio, N)}"
        )
    return BatchSchedule(a=a, ratio=ratio, L=len(sizes), sizes=tuple(sizes))


def largest_admissible_n(a: int, ratio: int, N: int) -> int:
    """Largest ``a * ratio**k`` not exceeding ``N``."""
    if a > N:
        raise NonIntegralLevels(f"a={a} exceeds N={N}")
    n = a
    while n * ratio <= N:
        n *= ratio
    return n


def capped_ladder(a: int, ratio: int, N: int) -> tuple[int, ...]:
    """Geometric sizes below ``N`` followed by ``N`` itself.

    Used for tuning when ``N/a`` is not an exact power of the ratio.
    """
    if ratio < 2:
        raise InvalidRatio(f"ratio must be an integer >= 2, got {ratio}")
    sizes = [int(a)]
    while sizes[-1] * ratio < N:
        sizes.append(sizes[-1] * ratio)
    if sizes[-1] != N:
        sizes.append(int(N))
    return tuple(sizes)


@dataclass(frozen=True)
class TruncationDistribution:
    """Law of the truncation level ``T`` on ``{1, ..., L}``.

    ``tails[t-1] = P[T >= t]``.  ``alpha`` is ``None`` for laws built from
    arbitrary probabilities.
    """

    alpha: float | None
    probs: np.ndarray
    tails: np.ndarray
    normalizer: float

    @property
    def L(self) -> int:
        return len(self.probs)

    @property
    def cdf(self) -> np.ndarray:
        c = np.cumsum(self.probs)
        c[-1] = 1.0
        return c

    @classmethod
    def from_probs(cls, probs: Sequence[float]) -> "TruncationDistribution":
        p = np.asarray(probs, dtype=float)
        if p.ndim != 1 or len(p) == 0 or np.any(p <= 0):
            raise ValueError("probabilities must be a non-empty vector of positive numbers")
        total = p.sum()
        p = p / total
        return cls(alpha=None, probs=p, tails=_tails(p), normalizer=float(total))


def _tails(probs: np.ndarray) -> np.ndarray:
    tails = np.cumsum(probs[::-1])[::-1].copy()
    tails[0] = 1.0
    return tails


def build_truncation_geometric(alpha: float, L: int) -> TruncationDistribution:
    """``P[T = t] = 2**(-alpha t) / Z`` for ``t = 1..L``."""
    alpha = float(alpha)
    if not alpha > 0:
        raise NonPositiveAlpha(f"alpha must be positive, got {alpha}")
    if L < 1:
        raise ValueError(f"L must be >= 1, got {L}")
    if alpha > 1:
        warnings.warn(
            f"alpha={alpha} > 1: expected cost no longer grows with N", AlphaAboveOneWarning
        )
    t = np.arange(1, L + 1)
    weights = np.exp2(-alpha * t)
    Z = float(weights.sum())
    probs = weights / Z
    return TruncationDistribution(alpha=alpha, probs=probs, tails=_tails(probs), normalizer=Z)


def geometric_tail_closed_form(alpha: float, L: int) -> np.ndarray:
    """``P[T >= t] = (2^{-alpha(t-1)} - 2^{-alpha L}) / (1 - 2^{-alpha L})``."""
    t = np.arange(1, L + 1)
    tail_end = 2.0 ** (-alpha * L)
    return (np.exp2(-alpha * (t - 1)) - tail_end) / (1.0 - tail_end)


def sample_truncation(dist: TruncationDistribution, rng: np.random.Generator) -> int:
    """Inverse-CDF draw of the truncation level (1-based)."""
    u = rng.random()
    return int(min(np.searchsorted(dist.cdf, u, side="right"), dist.L - 1)) + 1


@dataclass(frozen=True)
class CostModel:
    """Likelihood evaluations per datum per level: ``M * per_point_cost``.

    ``M`` is the inner chain length including burn-in (1 for closed forms).
    """

    M: int = 1
    per_point_cost: float = 1.0

    def __post_init__(self):
        if self.M < 1:
            raise ValueError(f"M must be >= 1, got {self.M}")

    @property
    def per_datum(self) -> float:
        return self.M * self.per_point_cost

    def path_cost(self, sizes: Sequence[int], T: int) -> float:
        return self.per_datum * float(np.sum(np.asarray(sizes[:T], dtype=np.int64)))


def expected_cost_from_sizes(sizes: Sequence[int], dist: TruncationDistribution, cost: CostModel) -> float:
    if len(sizes) != dist.L:
        raise LengthMismatch(f"{len(sizes)} levels in schedule, {dist.L} in truncation law")
    cum = np.cumsum(np.asarray(sizes, dtype=float))
    return cost.per_datum * float(np.dot(dist.probs, cum))


def expected_likelihood_evals(
    schedule: BatchSchedule, dist: TruncationDistribution, cost: CostModel = CostModel()
) -> float:
    """``M * sum_t P[T=t] * (n_1 + ... + n_t)``."""
    return expected_cost_from_sizes(schedule.sizes, dist, cost)


@dataclass(frozen=True)
class ConvergenceFit:
    """Fit of ``E|delta_t|^2 ≈ c * n_t**(-beta)``."""

    c: float
    beta: float
    residual: float
    degenerate: bool = False


class SecondMomentBound(NamedTuple):
    value: float
    diverging: bool


def second_moment_bound(
    fit: ConvergenceFit, alpha: float, a: float, L: int, ratio: int = 2
) -> SecondMomentBound:
    """Upper bound on ``E[(phi*_T)^2]`` under ``E|delta_t|^2 <= c n_t^-beta``.

    Sums ``c * n_{t-1}^{-beta} / P[T >= t]`` with ``n_0 = a / ratio``; for
    ``ratio=2`` this is the familiar
    ``(c 2^b / a^b)(1-2^{-aL}) sum_t 1/(2^{(b-a)(t-1)} - 2^{b(t-1)-aL})``.
    ``diverging`` is set when ``alpha >= beta`` (unbounded as ``L`` grows).
    """
    tails = geometric_tail_closed_form(alpha, L)
    t = np.arange(1, L + 1)
    prev_sizes = a * np.power(float(ratio), t - 2.0)
    value = float(np.sum(fit.c * prev_sizes ** (-fit.beta) / tails))
    diverging = alpha >= fit.beta
    if diverging:
        warnings.warn(f"alpha={alpha} >= beta={fit.beta}", AlphaExceedsBeta)
    return SecondMomentBound(value, diverging)


def literal_alpha_objective(alpha: float, beta: float, a: float, N: float) -> float:
    """Large-L closed form of the work-variance product up to constants.

    ``a^alpha (1-2^-alpha) / ((1-2^{alpha-1})(1-2^{alpha-beta})) N^{1-alpha}``.
    Kept for comparison only; its asymptotic cost term degrades as
    ``alpha -> 0`` so it is not used for tuning.
    """
    return (
        a**alpha
        * (1 - 2.0**-alpha)
        / ((1 - 2.0 ** (alpha - 1)) * (1 - 2.0 ** (alpha - beta)))
        * N ** (1 - alpha)
    )


class TradeoffCurve(NamedTuple):
    alpha: np.ndarray
    work: np.ndarray
    variance: np.ndarray
    product: np.ndarray


def _alpha_bounds(beta: float, eps: float) -> tuple[float, float]:
    lo, hi = eps, beta - eps
    if not hi > lo:
        raise NoFiniteMinimum(
            f"beta={beta} leaves no room for alpha in ({eps}, beta-{eps}); "
            "partial expectations converge too slowly to debias at sub-linear cost"
        )
    return lo, hi


def _work_variance(alpha, a, ratio, N, fit, cost):
    sizes = capped_ladder(a, ratio, N)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        dist = build_truncation_geometric(alpha, len(sizes))
        bound = second_moment_bound(fit, alpha, a, len(sizes), ratio)
    work = expected_cost_from_sizes(sizes, dist, cost)
    return work, bound.value


def tradeoff_curve(
    a: int,
    ratio: int,
    N: int,
    fit: ConvergenceFit,
    cost: CostModel = CostModel(),
    alphas: Sequence[float] | None = None,
    eps: float = ALPHA_MARGIN,
) -> TradeoffCurve:
    """Expected work, variance bound and their product over a grid of alpha."""
    if alphas is None:
        lo, hi = _alpha_bounds(fit.beta, eps)
        alphas = np.linspace(lo, hi, 97)
    alphas = np.asarray(alphas, dtype=float)
    wv = np.array([_work_variance(x, a, ratio, N, fit, cost) for x in alphas])
    return TradeoffCurve(alphas, wv[:, 0], wv[:, 1], wv[:, 0] * wv[:, 1])


def _golden_section(f, lo, hi, tol):
    invphi = (math.sqrt(5) - 1) / 2
    x1 = hi - invphi * (hi - lo)
    x2 = lo + invphi * (hi - lo)
    f1, f2 = f(x1), f(x2)
    while hi - lo > tol:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - invphi * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + invphi * (hi - lo)
            f2 = f(x2)
    return (lo + hi) / 2


def tune_alpha(
    a: int,
    ratio: int,
    N: int,
    fit: ConvergenceFit,
    cost: CostModel = CostModel(),
    eps: float = ALPHA_MARGIN,
    tol: float = 1e-4,
    literal: bool = False,
) -> tuple[float, float]:
    """Pick the truncation decay minimising expected work times variance bound.

    Returns ``(alpha, work_variance)``.  The search brackets the minimum on
    a coarse grid, then refines by golden-section to ``tol`` in alpha.

    With ``literal=True`` the large-L closed form (see
    :func:`literal_alpha_objective`) is maximised instead, for comparison
    only; the returned product is still the work-variance product.
    """
    lo, hi = _alpha_bounds(fit.beta, eps)
    if literal:
        def objective(x):
            return -literal_alpha_objective(x, fit.beta, a, N)
    else:
        def objective(x):
            w, v = _work_variance(x, a, ratio, N, fit, cost)
            return w * v

    grid = np.linspace(lo, hi, 65)
    values = np.array([objective(x) for x in grid])
    i = int(np.argmin(values))
    alpha = _golden_section(objective, grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)], tol)
    w, v = _work_variance(alpha, a, ratio, N, fit, cost)
    return float(alpha), float(w * v)


def fit_beta(sizes: Sequence[float], squared_diffs: Sequence[float]) -> ConvergenceFit:
    """Least-squares fit of ``log d = log c - beta log n``.

    Constant input leaves ``beta`` undefined: the fit is returned with
    ``beta=0`` and ``degenerate=True``.  A non-positive slope is flagged the
    same way.
    """
    n = np.asarray(sizes, dtype=float)
    d = np.asarray(squared_diffs, dtype=float)
    if n.shape != d.shape or n.ndim != 1:
        raise LengthMismatch("sizes and squared_diffs must be 1-d of equal length")
    if len(n) < 3:
        raise DegenerateInput(f"need at least 3 points to fit beta, got {len(n)}")
    if np.any(n <= 0) or np.any(d <= 0) or not np.all(np.isfinite(d)):
        raise DegenerateInput("sizes and squared differences must be positive and finite")
    if np.all(d == d[0]):
        return ConvergenceFit(c=float(d[0]), beta=0.0, residual=0.0, degenerate=True)
    x, y = np.log(n), np.log(d)
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sum((y - (intercept + slope * x)) ** 2))
    beta = -float(slope)
    return ConvergenceFit(c=float(np.exp(intercept)), beta=beta, residual=residual, degenerate=beta <= 0)
