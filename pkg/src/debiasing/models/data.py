"""Synthetic datasets and the plain-text dataset format.

A dataset file starts with one header line

    # kind, N, D, seed, key=value, key=value, ...

followed by one observation per line, comma-separated, with the label in
the last column where the kind has one.  Floats are written with 17
significant digits so a write/read round trip is bit-exact.  List-valued
parameters are written with ``;`` between entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from ..errors import InvalidParams

KINDS = ("gaussian_mean", "loggaussian", "logistic", "rff_regression")
CHUNK_ROWS = 1 << 16

DEFAULT_PARAMS = {
    "gaussian_mean": {"mu": [2.0, 2.0], "cov": [1.0, 0.0, 0.0, 1.0]},
    "loggaussian": {"mu": 0.0, "sigma2": 2.0},
    "logistic": {"D": 9, "beta": 1.0},
    "rff_regression": {"m": 100, "noise": 10.0, "low": 0.0, "high": 10.0},
}


@dataclass
class Dataset:
    kind: str
    seed: int
    params: dict
    data: np.ndarray = field(repr=False)

    @property
    def N(self) -> int:
        return int(self.data.shape[0])

    @property
    def D(self) -> int:
        """Number of covariate columns (labels excluded)."""
        cols = self.data.shape[1] if self.data.ndim == 2 else 1
        return cols - 1 if self.kind in ("logistic", "rff_regression") else cols

    @property
    def covariates(self) -> np.ndarray:
        return self.data[:, : self.D]

    @property
    def labels(self) -> np.ndarray:
        if self.kind not in ("logistic", "rff_regression"):
            raise AttributeError(f"{self.kind} datasets carry no labels")
        return self.data[:, -1]


def resolve_params(kind: str, params: dict | None) -> dict:
    if kind not in KINDS:
        raise InvalidParams(f"unknown dataset kind {kind!r}; expected one of {KINDS}")
    out = dict(DEFAULT_PARAMS[kind])
    out.update(params or {})
    unknown = set(out) - set(DEFAULT_PARAMS[kind])
    if unknown:
        raise InvalidParams(f"unknown parameters for {kind}: {sorted(unknown)}")
    if kind == "gaussian_mean":
        mu = np.atleast_1d(np.asarray(out["mu"], dtype=float))
        cov = np.asarray(out["cov"], dtype=float).reshape(len(mu), len(mu))
        try:
            np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise InvalidParams("gaussian_mean cov must be symmetric positive definite") from None
        out["mu"], out["cov"] = mu.tolist(), cov.ravel().tolist()
    elif kind == "loggaussian":
        if not float(out["sigma2"]) > 0:
            raise InvalidParams("sigma2 must be positive")
    elif kind == "logistic":
        D = int(out["D"])
        if D < 1:
            raise InvalidParams("D must be >= 1")
        beta = np.broadcast_to(np.asarray(out["beta"], dtype=float), (D,))
        out["D"], out["beta"] = D, beta.tolist() if np.ndim(out["beta"]) else float(out["beta"])
    elif kind == "rff_regression":
        if int(out["m"]) < 1 or not float(out["noise"]) > 0 or not out["high"] > out["low"]:
            raise InvalidParams("rff_regression needs m >= 1, noise > 0, high > low")
    return out


def _global_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(0,)))


def _chunk_rng(seed: int, i: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(1, i)))


def rff_generating_basis(params: dict, seed: int):
    """Feature basis and weights used to draw rff_regression labels."""
    from .rff import draw_rff_basis

    rng = _global_rng(seed)
    w, b = draw_rff_basis(int(params["m"]), 1, rng)
    v = rng.standard_normal(int(params["m"]))
    return w, b, v


def iter_chunks(kind: str, params: dict | None, N: int, seed: int, chunk_rows: int = CHUNK_ROWS) -> Iterator[np.ndarray]:
    """Rows of a synthetic dataset in fixed-size chunks.

    Chunk ``i`` depends only on ``(seed, i)``, so the concatenation is the
    same whether the rows are kept in memory or streamed to disk.
    """
    p = resolve_params(kind, params)
    if N < 0:
        raise InvalidParams("N must be >= 0")
    if kind == "rff_regression":
        w, b, v = rff_generating_basis(p, seed)
    n_chunks = math.ceil(N / chunk_rows)
    for i in range(n_chunks):
        rows = min(chunk_rows, N - i * chunk_rows)
        rng = _chunk_rng(seed, i)
        if kind == "gaussian_mean":
            mu = np.asarray(p["mu"])
            cov = np.asarray(p["cov"]).reshape(len(mu), len(mu))
            yield mu + rng.standard_normal((rows, len(mu))) @ np.linalg.cholesky(cov).T
        elif kind == "loggaussian":
            yield np.exp(p["mu"] + math.sqrt(p["sigma2"]) * rng.standard_normal((rows, 1)))
        elif kind == "logistic":
            D = p["D"]
            beta = np.broadcast_to(np.asarray(p["beta"], dtype=float), (D,))
            x = rng.standard_normal((rows, D)) / D
            prob = 1.0 / (1.0 + np.exp(-x @ beta))
            y = np.where(rng.random(rows) < prob, 1.0, -1.0)
            yield np.column_stack([x, y])
        else:
            from .rff import rff_features

            x = rng.uniform(p["low"], p["high"], size=(rows, 1))
            f = rff_features(x, w, b) @ v
            y = f + math.sqrt(p["noise"]) * rng.standard_normal(rows)
            yield np.column_stack([x, y])


def _columns(kind: str, p: dict) -> int:
    return {
        "gaussian_mean": lambda: len(p["mu"]),
        "loggaussian": lambda: 1,
        "logistic": lambda: p["D"] + 1,
        "rff_regression": lambda: 2,
    }[kind]()


def generate_synthetic(kind: str, params: dict | None, N: int, seed: int) -> Dataset:
    """In-memory synthetic dataset; deterministic in ``seed``."""
    p = resolve_params(kind, params)
    chunks = list(iter_chunks(kind, p, N, seed))
    data = np.concatenate(chunks) if chunks else np.empty((0, _columns(kind, p)))
    return Dataset(kind=kind, seed=int(seed), params=p, data=data)


def _format_value(v) -> str:
    if isinstance(v, (list, tuple, np.ndarray)):
        return ";".join(_format_value(x) for x in np.ravel(v))
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return repr(float(v))


def _parse_value(s: str):
    if ";" in s:
        return [_parse_value(x) for x in s.split(";")]
    try:
        return int(s)
    except ValueError:
        return float(s)


def format_header(kind: str, N: int, D: int, seed: int, params: dict) -> str:
    fields = [kind, str(N), str(D), str(seed)] + [f"{k}={_format_value(v)}" for k, v in params.items()]
    return "# " + ", ".join(fields)


def parse_header(line: str) -> tuple[str, int, int, int, dict]:
    if not line.startswith("#"):
        raise InvalidParams("dataset file must start with a '# kind, N, D, seed, ...' header")
    parts = [x.strip() for x in line[1:].strip().split(",")]
    if len(parts) < 4:
        raise InvalidParams(f"malformed dataset header: {line!r}")
    kind, N, D, seed = parts[0], int(parts[1]), int(parts[2]), int(parts[3])
    params = {}
    for item in parts[4:]:
        key, _, value = item.partition("=")
        params[key.strip()] = _parse_value(value.strip())
    return kind, N, D, seed, params


def write_synthetic(path, kind: str, params: dict | None, N: int, seed: int) -> Path:
    """Generate and write a dataset chunk by chunk without holding it in memory."""
    p = resolve_params(kind, params)
    cols = _columns(kind, p)
    D = cols - 1 if kind in ("logistic", "rff_regression") else cols
    path = Path(path)
    with path.open("w") as fh:
        fh.write(format_header(kind, N, D, seed, p) + "\n")
        for chunk in iter_chunks(kind, p, N, seed):
            np.savetxt(fh, chunk, fmt="%.17g", delimiter=",")
    return path


def write_dataset(path, dataset: Dataset) -> Path:
    path = Path(path)
    with path.open("w") as fh:
        fh.write(format_header(dataset.kind, dataset.N, dataset.D, dataset.seed, dataset.params) + "\n")
        if dataset.N:
            np.savetxt(fh, dataset.data, fmt="%.17g", delimiter=",")
    return path


def read_dataset(path) -> Dataset:
    path = Path(path)
    with path.open() as fh:
        kind, N, D, seed, params = parse_header(fh.readline())
        cols = D + 1 if kind in ("logistic", "rff_regression") else D
        if N == 0:
            data = np.empty((0, cols))
        else:
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.shape != (N, cols):
        raise InvalidParams(f"{path}: header says {N}x{cols}, found {data.shape}")
    return Dataset(kind=kind, seed=seed, params=params, data=data)


def iter_rows(path, block: int = 4096) -> Iterator[np.ndarray]:
    """Read a dataset file sequentially in blocks of rows."""
    with Path(path).open() as fh:
        kind, N, D, seed, params = parse_header(fh.readline())
        buf = []
        for line in fh:
            buf.append([float(x) for x in line.split(",")])
            if len(buf) == block:
                yield np.array(buf)
                buf = []
        if buf:
            yield np.array(buf)
