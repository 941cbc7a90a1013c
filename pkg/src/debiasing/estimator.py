"""Randomly truncated telescoping estimator over paths of partial posteriors.

A replicate draws a truncation level ``T``, evaluates partial-posterior
expectations ``phi_1..phi_T`` on nested random subsets, and returns

    phi*_T = sum_{t<=T} (phi_t - phi_{t-1}) / P[T >= t],   phi_0 = 0,

whose expectation is ``phi_L``, the full-data value.  Replicates are i.i.d.
and averaged.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Protocol, Sequence

import numpy as np

from .errors import (
    DebiasError,
    MemoryCapExceeded,
    PathLongerThanSupport,
    ProviderFailure,
    ToleranceUnreachable,
)
from .schedule import BatchSchedule, CostModel, TruncationDistribution, sample_truncation

MIN_REPLICATES_FOR_TOLERANCE = 10
Z95 = 1.96

# spawn keys inside one replicate's seed sequence
_TRUNCATION_STREAM = 0
_PERMUTATION_STREAM = 1
_LEVEL_STREAM = 2


class ExpectationProvider(Protocol):
    """Maps a subset of a fixed dataset to a partial-posterior expectation."""

    dataset_size: int
    functional_name: str

    def evaluate(self, indices: np.ndarray, sub_seed: int) -> float | np.ndarray:
        """Expectation of the functional under the posterior given ``data[indices]``."""
        ...


@dataclass
class PartialExpectationPath:
    values: list
    batch_sizes: list[int]
    level_seeds: list[int] = field(default_factory=list)
    wall_seconds: list[float] = field(default_factory=list)

    def __post_init__(self):
        if len(self.values) != len(self.batch_sizes) or not self.values:
            raise ValueError("path needs one value per batch size and at least one level")


@dataclass
class DebiasReplicate:
    index: int
    seed: int
    truncation: int
    phi_star: float | np.ndarray
    likelihood_evals: float
    capped_at: int | None = None
    path: PartialExpectationPath | None = None

    def record(self) -> dict:
        phi = self.phi_star
        rec = {
            "r": self.index,
            "seed": self.seed,
            "T": self.truncation,
            "phi_star": phi.tolist() if isinstance(phi, np.ndarray) else float(phi),
            "likelihood_evals": self.likelihood_evals,
        }
        if self.capped_at is not None:
            rec["capped_at"] = self.capped_at
        return rec


@dataclass
class DebiasEstimate:
    mean: float | np.ndarray
    sample_variance: float | np.ndarray
    stderr: float | np.ndarray
    R: int
    total_likelihood_evals: float
    replicates: list[DebiasReplicate] | None = None
    tolerance_reached: bool | None = None
    budget_truncated: bool = False

    @property
    def stderr_defined(self) -> bool:
        return self.R >= 2

    @property
    def ci95(self) -> tuple:
        half = Z95 * self.stderr
        return self.mean - half, self.mean + half

    def summary(self) -> dict:
        def plain(x):
            return x.tolist() if isinstance(x, np.ndarray) else (None if _isnan(x) else float(x))

        return {
            "mean": plain(self.mean),
            "stderr": plain(self.stderr),
            "sample_variance": plain(self.sample_variance),
            "R": self.R,
            "total_evals": self.total_likelihood_evals,
            "stderr_defined": self.stderr_defined,
            "tolerance_reached": self.tolerance_reached,
            "budget_truncated": self.budget_truncated,
        }


def _isnan(x) -> bool:
    return isinstance(x, float) and math.isnan(x)


def _as_values(path) -> np.ndarray:
    values = path.values if isinstance(path, PartialExpectationPath) else path
    return np.asarray(values, dtype=float)


def telescoping_estimate(path, dist: TruncationDistribution):
    """``sum_{t<=T} (phi_t - phi_{t-1}) / P[T >= t]`` with ``phi_0 = 0``.

    ``path`` is a :class:`PartialExpectationPath` or a sequence of per-level
    values (scalars or equal-shape arrays).
    """
    values = _as_values(path)
    T = len(values)
    if T == 0:
        raise ValueError("empty path")
    if T > dist.L:
        raise PathLongerThanSupport(f"path of length {T} exceeds truncation support {dist.L}")
    diffs = np.diff(values, axis=0, prepend=np.zeros((1,) + values.shape[1:]))
    weights = 1.0 / dist.tails[:T]
    est = np.tensordot(weights, diffs, axes=(0, 0))
    return float(est) if est.ndim == 0 else est


def exact_expectation_oracle(full_path: Sequence, dist: TruncationDistribution):
    """Enumerate every truncation level: ``sum_t P[T=t] * phi*_t``."""
    values = _as_values(full_path)
    if len(values) != dist.L:
        raise ValueError("oracle needs one deterministic value per level")
    total = sum(p * telescoping_estimate(values[:t], dist) for t, p in enumerate(dist.probs, start=1))
    return total


def second_moment_exact(full_path: Sequence, dist: TruncationDistribution) -> tuple[float, float]:
    """Second moment of ``phi*_T`` for a deterministic path, computed two ways.

    Returns ``(formula, enumeration)``: the telescoping identity
    ``sum_t (|phi_{t-1}-phi_L|^2 - |phi_t-phi_L|^2) / P[T>=t]`` and the
    direct ``sum_t P[T=t] (phi*_t)^2``.
    """
    values = np.asarray(_as_values(full_path), dtype=float)
    if values.ndim != 1 or len(values) != dist.L:
        raise ValueError("second moment needs one scalar value per level")
    limit = values[-1]
    prev = np.concatenate([[0.0], values[:-1]])
    formula = float(np.sum(((prev - limit) ** 2 - (values - limit) ** 2) / dist.tails))
    enumeration = float(
        sum(p * telescoping_estimate(values[:t], dist) ** 2 for t, p in enumerate(dist.probs, start=1))
    )
    return formula, enumeration


def replicate_seed(master_seed: int, r: int) -> int:
    """Deterministic 63-bit seed for replicate ``r``."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(r),))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def _stream(seed: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))


def level_seed(seed: int, t: int) -> int:
    return int(_stream(seed, _LEVEL_STREAM, t).generate_state(1, np.uint64)[0] >> np.uint64(1))


def nested_subset(N: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """First ``k`` entries of a uniformly random permutation of ``range(N)``.

    Lazy Fisher-Yates: cost is O(k), and the prefix for a smaller ``k``
    from the same generator state is a prefix of this one.
    """
    if k > N:
        raise ValueError(f"cannot draw {k} of {N} observations")
    u = rng.random(k)
    swaps = np.arange(k) + np.floor(u * (N - np.arange(k))).astype(np.int64)
    moved: dict[int, int] = {}
    out = np.empty(k, dtype=np.int64)
    for i, j in enumerate(swaps.tolist()):
        out[i] = moved.get(j, j)
        moved[j] = moved.get(i, i)
    return out


def draw_truncation(dist: TruncationDistribution, seed: int) -> int:
    return sample_truncation(dist, np.random.default_rng(_stream(seed, _TRUNCATION_STREAM)))


def draw_path_indices(N: int, k: int, seed: int) -> np.ndarray:
    return nested_subset(N, k, np.random.default_rng(_stream(seed, _PERMUTATION_STREAM)))


def run_replication(
    provider: ExpectationProvider,
    schedule: BatchSchedule,
    dist: TruncationDistribution,
    seed: int,
    cost: CostModel = CostModel(),
    level_cap: int | None = None,
    index: int = 0,
    keep_path: bool = False,
) -> DebiasReplicate:
    """One truncated path on nested prefixes of a seed-derived permutation.

    Each level's sub-seed depends only on ``(seed, t)``, so levels can be
    evaluated in any order.  Levels larger than ``level_cap`` are not
    evaluated; the path stops at the last admissible level and the
    replicate is marked ``capped_at``.
    """
    if provider.dataset_size < schedule.N:
        raise ValueError(f"provider holds {provider.dataset_size} observations, schedule needs {schedule.N}")
    T = draw_truncation(dist, seed)
    T_eval = T
    capped_at = None
    if level_cap is not None and schedule.sizes[T - 1] > level_cap:
        admissible = [t for t, n in enumerate(schedule.sizes, start=1) if n <= level_cap]
        if not admissible:
            raise MemoryCapExceeded(1, schedule.sizes[0], level_cap)
        T_eval = capped_at = admissible[-1]
    indices = draw_path_indices(schedule.N, schedule.sizes[T_eval - 1], seed)
    path = PartialExpectationPath(values=[None] * T_eval, batch_sizes=list(schedule.sizes[:T_eval]))
    for t in range(1, T_eval + 1):
        sub = level_seed(seed, t)
        start = time.perf_counter()
        try:
            path.values[t - 1] = provider.evaluate(indices[: schedule.sizes[t - 1]], sub)
        except DebiasError as exc:
            raise ProviderFailure(t, exc) from exc
        except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            raise ProviderFailure(t, exc) from exc
        path.level_seeds.append(sub)
        path.wall_seconds.append(time.perf_counter() - start)
    phi_star = telescoping_estimate(path, dist)
    return DebiasReplicate(
        index=index,
        seed=seed,
        truncation=T,
        phi_star=phi_star,
        likelihood_evals=cost.path_cost(schedule.sizes, T_eval),
        capped_at=capped_at,
        path=path if keep_path else None,
    )


class RunningMoments:
    """Welford accumulator; works elementwise for array-valued samples."""

    def __init__(self):
        self.n = 0
        self.mean = 0.0
        self.m2 = 0.0

    def push(self, x) -> None:
        x = np.asarray(x, dtype=float)
        self.n += 1
        delta = x - self.mean
        self.mean = self.mean + delta / self.n
        self.m2 = self.m2 + delta * (x - self.mean)

    @property
    def variance(self):
        if self.n < 2:
            return np.full_like(np.asarray(self.mean, dtype=float), np.nan)
        return self.m2 / (self.n - 1)

    @property
    def stderr(self):
        return np.sqrt(self.variance / max(self.n, 1))


def _scalar(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


def aggregate(replicates: Sequence[DebiasReplicate], keep: bool = True) -> DebiasEstimate:
    """Combine replicates in index order."""
    if not replicates:
        raise ValueError("no replicates to aggregate")
    acc = RunningMoments()
    evals = 0.0
    truncated = False
    for rep in replicates:
        acc.push(rep.phi_star)
        evals += rep.likelihood_evals
        truncated |= rep.capped_at is not None
    return DebiasEstimate(
        mean=_scalar(acc.mean),
        sample_variance=_scalar(acc.variance),
        stderr=_scalar(acc.stderr),
        R=acc.n,
        total_likelihood_evals=evals,
        replicates=list(replicates) if keep else None,
        budget_truncated=truncated,
    )


_WORKER_STATE: dict = {}


def _init_worker(provider, schedule, dist, cost, level_cap):
    _WORKER_STATE.update(provider=provider, schedule=schedule, dist=dist, cost=cost, level_cap=level_cap)


def _worker_replicate(task):
    r, seed = task
    s = _WORKER_STATE
    return run_replication(s["provider"], s["schedule"], s["dist"], seed, s["cost"], s["level_cap"], index=r)


class _Runner:
    """Evaluates replicate indices serially or on a process pool, in order."""

    def __init__(self, provider, schedule, dist, cost, level_cap, workers, master_seed):
        self.args = (provider, schedule, dist, cost, level_cap)
        self.master_seed = master_seed
        self.workers = max(1, int(workers))
        self.pool = None

    def __enter__(self):
        if self.workers > 1:
            self.pool = ProcessPoolExecutor(self.workers, initializer=_init_worker, initargs=self.args)
        return self

    def __exit__(self, *exc):
        if self.pool is not None:
            self.pool.shutdown()

    def run(self, rs: Iterable[int]) -> list[DebiasReplicate]:
        tasks = [(r, replicate_seed(self.master_seed, r)) for r in rs]
        if self.pool is None:
            provider, schedule, dist, cost, cap = self.args
            return [run_replication(provider, schedule, dist, s, cost, cap, index=r) for r, s in tasks]
        chunk = max(1, len(tasks) // (4 * self.workers))
        return list(self.pool.map(_worker_replicate, tasks, chunksize=chunk))


def run_debias(
    provider: ExpectationProvider,
    schedule: BatchSchedule,
    dist: TruncationDistribution,
    *,
    R: int | None = None,
    tolerance: float | None = None,
    max_replicates: int = 100_000,
    master_seed: int = 0,
    cost: CostModel = CostModel(),
    workers: int = 1,
    level_cap: int | None = None,
    keep_replicates: bool = True,
    sink: Callable[[DebiasReplicate], None] | None = None,
) -> DebiasEstimate:
    """Average i.i.d. debiased replicates.

    Stop after exactly ``R`` replicates, or (with ``tolerance``) at the first
    ``r >= 10`` whose running standard error is at most ``tolerance``.
    Replicate ``r`` uses ``replicate_seed(master_seed, r)``; the result does
    not depend on ``workers``.  Hitting ``max_replicates`` first raises
    :class:`ToleranceUnreachable` carrying the partial estimate.
    """
    if (R is None) == (tolerance is None):
        raise ValueError("give exactly one of R or tolerance")
    if R is not None and R < 1:
        raise ValueError(f"R must be >= 1, got {R}")
    if tolerance is not None and not tolerance > 0:
        raise ValueError(f"tolerance must be positive, got {tolerance}")
    if dist.L != schedule.L:
        raise ValueError(f"truncation law has {dist.L} levels, schedule has {schedule.L}")

    with _Runner(provider, schedule, dist, cost, level_cap, workers, master_seed) as runner:
        if R is not None:
            reps = runner.run(range(R))
            if sink is not None:
                for rep in reps:
                    sink(rep)
            return aggregate(reps, keep_replicates)

        reps: list[DebiasReplicate] = []
        acc = RunningMoments()
        block = max(16, 4 * runner.workers)
        while len(reps) < max_replicates:
            start = len(reps)
            batch = runner.run(range(start, min(start + block, max_replicates)))
            for rep in batch:
                reps.append(rep)
                acc.push(rep.phi_star)
                if sink is not None:
                    sink(rep)
                if acc.n >= MIN_REPLICATES_FOR_TOLERANCE and np.all(acc.stderr <= tolerance):
                    est = aggregate(reps, keep_replicates)
                    est.tolerance_reached = True
                    return est
        est = aggregate(reps, keep_replicates)
        est.tolerance_reached = False
        raise ToleranceUnreachable(est, tolerance)


@dataclass
class TracePoint:
    r: int
    running_mean: float | np.ndarray
    running_ci95: float | np.ndarray
    cumulative_evals: float


def convergence_trace(replicates: Sequence[DebiasReplicate]) -> list[TracePoint]:
    """Running mean, 95% half-width and cumulative cost in replicate order.

    The half-width is NaN until two replicates are available.
    """
    if not replicates:
        raise ValueError("need at least one replicate")
    acc = RunningMoments()
    evals = 0.0
    trace = []
    for k, rep in enumerate(replicates, start=1):
        acc.push(rep.phi_star)
        evals += rep.likelihood_evals
        trace.append(TracePoint(k, _scalar(acc.mean), _scalar(Z95 * acc.stderr), evals))
    return trace
