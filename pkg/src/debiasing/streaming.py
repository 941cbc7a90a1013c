"""Debiasing over an unbounded stream with a worst-case batch budget.

Each replicate draws ``T``, takes a fresh block of ``n_T`` observations from
the stream, evaluates the nested path on prefixes of that block, and then
discards it.  The target is the posterior given ``n_max`` observations.  A
constant-batch baseline with matched computational cost is run on the same
stream for comparison.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import StreamExhausted
from .estimator import (
    DebiasEstimate,
    DebiasReplicate,
    TracePoint,
    aggregate,
    convergence_trace,
    draw_truncation,
    level_seed,
    replicate_seed,
    telescoping_estimate,
)
from .models.data import iter_rows
from .schedule import (
    BatchSchedule,
    CostModel,
    TruncationDistribution,
    build_geometric_schedule,
    expected_likelihood_evals,
)

COST_MATCH_TOLERANCE = 0.05
# replicates whose blocks are held in memory at once
CHUNK = 256


class ObservationStream:
    """Sequential source of i.i.d. observations; ``take`` never repeats rows."""

    def __init__(self):
        self.consumed = 0

    def _read(self, k: int) -> np.ndarray:
        raise NotImplementedError

    def take(self, k: int) -> np.ndarray:
        block = self._read(k)
        if len(block) < k:
            raise StreamExhausted(f"stream ran dry after {self.consumed + len(block)} observations (wanted {k} more)")
        self.consumed += k
        return block


class ArrayStream(ObservationStream):
    def __init__(self, data):
        super().__init__()
        self.data = np.asarray(data, dtype=float)
        self._pos = 0

    def _read(self, k):
        block = self.data[self._pos : self._pos + k]
        self._pos += len(block)
        return block


class GeneratorStream(ObservationStream):
    """Observations from ``draw(rng, k)``, optionally limited to ``limit`` in total."""

    def __init__(self, draw: Callable[[np.random.Generator, int], np.ndarray], seed: int, limit: int | None = None):
        super().__init__()
        self.draw = draw
        self.rng = np.random.default_rng(seed)
        self.limit = limit

    def _read(self, k):
        if self.limit is not None:
            k = min(k, self.limit - self.consumed)
        return self.draw(self.rng, max(k, 0))


def gaussian_stream(theta: float, sd: float, seed: int, limit: int | None = None) -> GeneratorStream:
    return GeneratorStream(lambda rng, k: theta + sd * rng.standard_normal((k, 1)), seed, limit)


class FileStream(ObservationStream):
    """Rows of a dataset file, read sequentially."""

    def __init__(self, path):
        super().__init__()
        self._blocks = iter_rows(path)
        self._buffer = np.empty((0, 0))

    def _read(self, k):
        parts, have = [], 0
        if len(self._buffer):
            parts.append(self._buffer[:k])
            have = len(parts[0])
            self._buffer = self._buffer[have:]
        while have < k:
            try:
                block = next(self._blocks)
            except StopIteration:
                break
            need = k - have
            parts.append(block[:need])
            self._buffer = block[need:]
            have += len(parts[-1])
        return np.concatenate(parts) if parts else np.empty((0, 0))


@dataclass(frozen=True)
class StreamBudget:
    n_max: int
    schedule: BatchSchedule
    dist: TruncationDistribution

    def __post_init__(self):
        if self.schedule.N != self.n_max:
            raise ValueError(f"schedule ends at {self.schedule.N}, budget is {self.n_max}")
        if self.dist.L != self.schedule.L:
            raise ValueError("truncation law and schedule disagree on the number of levels")

    @classmethod
    def geometric(cls, n_max: int, a: int, dist_factory, ratio: int = 2) -> "StreamBudget":
        schedule = build_geometric_schedule(a, ratio, n_max)
        return cls(n_max, schedule, dist_factory(schedule.L))


@dataclass
class StreamReport:
    debiased: DebiasEstimate
    debiased_trace: list[TracePoint]
    baseline: DebiasEstimate | None = None
    baseline_trace: list[TracePoint] | None = None
    batch_size: int | None = None
    processed: dict = field(default_factory=dict)
    consumed: dict = field(default_factory=dict)

    @property
    def cost_ratio(self) -> float:
        return self.processed["baseline"] / self.processed["debiased"]

    @property
    def cost_matched(self) -> bool:
        return abs(self.cost_ratio - 1) <= COST_MATCH_TOLERANCE


def _debias_block(task):
    r, seed, block, factory, schedule, dist, cost = task
    provider = factory(block)
    T = len([n for n in schedule.sizes if n <= len(block)])
    values = [provider.evaluate(np.arange(schedule.sizes[t - 1]), level_seed(seed, t)) for t in range(1, T + 1)]
    return DebiasReplicate(
        index=r,
        seed=seed,
        truncation=T,
        phi_star=telescoping_estimate(values, dist),
        likelihood_evals=cost.path_cost(schedule.sizes, T),
    )


def _baseline_block(task):
    r, seed, block, factory, cost = task
    value = factory(block).evaluate(np.arange(len(block)), level_seed(seed, 1))
    return DebiasReplicate(index=r, seed=seed, truncation=1, phi_star=value, likelihood_evals=cost.per_datum * len(block))


def _run_blocks(fn, tasks, workers):
    if workers <= 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(fn, tasks))


def run_constant_batch_baseline(
    source: ObservationStream,
    batch_size: int,
    provider_factory,
    replications: int,
    seed: int,
    cost: CostModel = CostModel(),
    workers: int = 1,
) -> DebiasEstimate:
    """Average of expectations on consecutive disjoint batches of ``batch_size``."""
    if replications < 1:
        raise ValueError("replications must be >= 1")
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    reps = []
    for lo in range(0, replications, CHUNK):
        tasks = [
            (r, replicate_seed(seed, r), source.take(batch_size), provider_factory, cost)
            for r in range(lo, min(lo + CHUNK, replications))
        ]
        reps.extend(_run_blocks(_baseline_block, tasks, workers))
    return aggregate(reps)


def run_streaming_debias(
    source: ObservationStream,
    budget: StreamBudget,
    provider_factory,
    replications: int,
    seed: int,
    cost: CostModel = CostModel(),
    baseline: bool = True,
    match: str = "realized",
    workers: int = 1,
) -> StreamReport:
    """Debiased streaming estimate plus a cost-matched constant-batch baseline.

    ``provider_factory(block)`` builds a provider over one captured block.
    The baseline batch size is the debiased scheme's average per-replicate
    cost, either as realized in this run (``match="realized"``) or as the
    closed-form expectation (``match="expected"``).
    """
    if replications < 1:
        raise ValueError("replications must be >= 1")
    schedule, dist = budget.schedule, budget.dist
    start = source.consumed
    reps = []
    for lo in range(0, replications, CHUNK):
        tasks = []
        for r in range(lo, min(lo + CHUNK, replications)):
            s = replicate_seed(seed, r)
            T = draw_truncation(dist, s)
            tasks.append((r, s, source.take(schedule.sizes[T - 1]), provider_factory, schedule, dist, cost))
        reps.extend(_run_blocks(_debias_block, tasks, workers))
    debiased = aggregate(reps)
    report = StreamReport(
        debiased=debiased,
        debiased_trace=convergence_trace(reps),
        processed={"debiased": debiased.total_likelihood_evals},
        consumed={"debiased": source.consumed - start},
    )
    if not baseline:
        return report
    if match == "realized":
        per_rep = debiased.total_likelihood_evals / replications
    elif match == "expected":
        per_rep = expected_likelihood_evals(schedule, dist, cost)
    else:
        raise ValueError(f"match must be 'realized' or 'expected', got {match!r}")
    batch = max(1, int(round(per_rep / cost.per_datum)))
    start = source.consumed
    base_seed = int(np.random.SeedSequence(int(seed), spawn_key=(2**31,)).generate_state(1)[0])
    base = run_constant_batch_baseline(source, batch, provider_factory, replications, base_seed, cost, workers)
    report.baseline = base
    report.baseline_trace = convergence_trace(base.replicates)
    report.batch_size = batch
    report.processed["baseline"] = base.total_likelihood_evals
    report.consumed["baseline"] = source.consumed - start
    return report


def posterior_limit_mean(n: int, theta: float, noise_var: float, prior_mean: float, prior_var: float) -> float:
    """Average over data of the n-observation conjugate posterior mean."""
    data_precision = n / noise_var
    return (prior_mean / prior_var + data_precision * theta) / (1 / prior_var + data_precision)


def posterior_mean_sd(n: int, noise_var: float, prior_var: float) -> float:
    """Standard deviation over data of the n-observation posterior mean."""
    data_precision = n / noise_var
    return data_precision * math.sqrt(noise_var / n) / (1 / prior_var + data_precision)
