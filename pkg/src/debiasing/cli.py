"""Command-line front end: ``debias {generate,pilot,tune,run,convergence,stream}``.

Configuration is a flat ``key = value`` text file (``#`` starts a comment)
plus any number of ``--set key=value`` overrides.  The environment variable
``DEBIAS_WORKERS`` overrides the worker count.  Every output file embeds
the resolved configuration, so each result can be regenerated from its own
header.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical error
at runtime, 4 budget or tolerance cap reached.
"""

from __future__ import annotations

import argparse
import csv
import functools
import hashlib
import json
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import errors
from .estimator import convergence_trace, run_debias
from .experiments import convergence_table, run_pilot
from .models import (
    KINDS,
    GaussianMeanModel,
    LogGaussianModel,
    LogisticRegressionModel,
    RffRegressionModel,
    generate_synthetic,
    mse,
    nearest_spd,
    read_dataset,
    write_dataset,
)
from .sampler import SamplerConfig
from .schedule import (
    ConvergenceFit,
    CostModel,
    build_geometric_schedule,
    build_truncation_geometric,
    largest_admissible_n,
    tradeoff_curve,
    tune_alpha,
)
from .streaming import (
    FileStream,
    StreamBudget,
    gaussian_stream,
    posterior_limit_mean,
    run_streaming_debias,
)

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_BUDGET = 0, 2, 3, 4
AUTO_ALPHA_MARGIN = 0.1

# key -> (type, default); None default means "not set"
SCHEMA = {
    # data
    "kind": (str, "gaussian_mean"),
    "data": (str, None),
    "N": (int, 100),
    "data_seed": (int, 1),
    "params": (str, ""),
    "repair_cov": (bool, True),
    # schedule and truncation
    "a": (int, 8),
    "ratio": (int, 2),
    "alpha": (str, "auto"),
    "beta_fit": (str, None),
    "pilot_levels": (int, 6),
    "pilot_repeats": (int, 30),
    "pilot_reference": (str, "largest"),
    # provider
    "component": (str, "0"),
    "iterations": (int, 500),
    "burn_in": (int, 100),
    "initial_step": (float, 1.0),
    "adapt": (bool, True),
    "thin": (int, 1),
    "m": (int, 100),
    "lam": (float, None),
    "basis_seed": (int, 7),
    "n_test": (int, 1000),
    # stopping and execution
    "R": (int, None),
    "tolerance": (float, None),
    "max_replicates": (int, 100_000),
    "seed": (int, 0),
    "level_cap": (int, None),
    "workers": (int, 1),
    # convergence tables
    "sizes": (str, None),
    "repeats": (int, 50),
    # streaming
    "n_max": (int, 1 << 14),
    "theta": (float, 10.0),
    "noise_sd": (float, 5000.0),
    "prior_mean": (float, 0.0),
    "prior_sd": (float, 50.0),
    "source": (str, "generator"),
    "stream_seed": (int, 1),
    "match": (str, "realized"),
    "baseline": (bool, True),
    # outputs
    "out": (str, "results"),
}

# keys that do not affect any numerical output
NON_RESULT_KEYS = ("workers", "out")


class ConfigError(Exception):
    pass


def _parse_bool(s: str) -> bool:
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {s!r}")


def _coerce(key: str, raw):
    if key not in SCHEMA:
        raise ConfigError(f"unknown config key {key!r}")
    typ, default = SCHEMA[key]
    if raw is None:
        return None
    if isinstance(raw, str) and raw.strip().lower() in ("", "none") and (default is None or typ is not str):
        return None
    try:
        if typ is bool:
            return _parse_bool(raw)
        if typ is int:
            try:
                return int(raw)
            except ValueError:
                value = float(raw)
                if not value.is_integer():
                    raise
                return int(value)
        return typ(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot read {raw!r} as {typ.__name__}") from None


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def resolve_config(path=None, overrides=(), env=None) -> dict:
    """Merge defaults, the config file, ``--set`` overrides and the environment."""
    env = os.environ if env is None else env
    raw = {}
    if path is not None:
        try:
            raw.update(parse_config_text(Path(path).read_text()))
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from None
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        raw[k.strip()] = v.strip()
    if env.get("DEBIAS_WORKERS"):
        raw["workers"] = env["DEBIAS_WORKERS"]
    cfg = {k: default for k, (_, default) in SCHEMA.items()}
    for k, v in raw.items():
        cfg[k] = _coerce(k, v)
    validate(cfg)
    return cfg


def validate(cfg: dict) -> None:
    if cfg["kind"] not in KINDS:
        raise ConfigError(f"kind must be one of {KINDS}, got {cfg['kind']!r}")
    if cfg["a"] < 1:
        raise ConfigError("a must be >= 1")
    if cfg["ratio"] < 2:
        raise ConfigError("ratio must be an integer >= 2")
    if cfg["N"] < 0:
        raise ConfigError("N must be >= 0")
    if cfg["R"] is not None and cfg["R"] < 1:
        raise ConfigError("R must be >= 1")
    if cfg["tolerance"] is not None and not cfg["tolerance"] > 0:
        raise ConfigError("tolerance must be positive")
    if cfg["R"] is not None and cfg["tolerance"] is not None:
        raise ConfigError("set either R or tolerance, not both")
    if cfg["workers"] < 1:
        raise ConfigError("workers must be >= 1")
    if cfg["pilot_levels"] < 3:
        raise ConfigError("pilot needs at least 3 levels (two differences plus a reference)")
    if cfg["pilot_repeats"] < 1 or cfg["repeats"] < 1:
        raise ConfigError("repeat counts must be >= 1")
    if cfg["pilot_reference"] not in ("largest", "full"):
        raise ConfigError("pilot_reference must be 'largest' or 'full'")
    if cfg["match"] not in ("realized", "expected"):
        raise ConfigError("match must be 'realized' or 'expected'")
    if cfg["alpha"] != "auto":
        try:
            a = float(cfg["alpha"])
        except ValueError:
            raise ConfigError(f"alpha must be a number or 'auto', got {cfg['alpha']!r}") from None
        if not a > 0:
            raise ConfigError("alpha must be positive")
    try:
        SamplerConfig(cfg["iterations"], cfg["burn_in"], cfg["initial_step"], cfg["adapt"], cfg["thin"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    _component(cfg)
    _model_params(cfg)


def _component(cfg):
    c = cfg["component"]
    if c is None or str(c).lower() in ("all", "none"):
        return None
    try:
        return int(c)
    except ValueError:
        raise ConfigError(f"component must be an integer or 'all', got {c!r}") from None


def _model_params(cfg) -> dict:
    """``params`` is ``k:v,k:v`` with ``;`` between list entries."""
    out = {}
    for item in filter(None, (s.strip() for s in cfg["params"].split(","))):
        if ":" not in item:
            raise ConfigError(f"params entries look like key:value, got {item!r}")
        k, v = (s.strip() for s in item.split(":", 1))
        parts = [float(x) for x in v.split(";")] if ";" in v else float(v)
        out[k] = parts
    return out


def result_config(cfg: dict) -> dict:
    """The part of the config that determines numerical results."""
    return {k: v for k, v in sorted(cfg.items()) if k not in NON_RESULT_KEYS}


def run_id(cfg: dict) -> str:
    blob = json.dumps(result_config(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha1(blob.encode()).hexdigest()[:12]


def sampler_config(cfg) -> SamplerConfig:
    return SamplerConfig(cfg["iterations"], cfg["burn_in"], cfg["initial_step"], cfg["adapt"], cfg["thin"])


def cost_model(cfg) -> CostModel:
    if cfg["kind"] in ("loggaussian", "logistic"):
        return CostModel(M=sampler_config(cfg).chain_length)
    return CostModel()


# datasets and providers


def _dataset_params(cfg, notes: list) -> dict:
    params = _model_params(cfg)
    if cfg["kind"] == "gaussian_mean" and "cov" in params and cfg["repair_cov"]:
        mu = np.atleast_1d(params.get("mu", [2.0, 2.0]))
        cov = np.asarray(params["cov"], dtype=float).reshape(len(mu), len(mu))
        try:
            np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            fixed = nearest_spd(cov)
            notes.append(f"cov {cov.ravel().tolist()} is not SPD; using nearest SPD {np.round(fixed, 6).ravel().tolist()}")
            params["cov"] = fixed.ravel().tolist()
    return params


def load_dataset(cfg, notes: list):
    if cfg["data"] is not None and Path(cfg["data"]).exists():
        ds = read_dataset(cfg["data"])
        if ds.kind != cfg["kind"]:
            raise ConfigError(f"dataset file holds kind {ds.kind!r}, config says {cfg['kind']!r}")
        return ds
    return generate_synthetic(cfg["kind"], _dataset_params(cfg, notes), cfg["N"], cfg["data_seed"])


def truncate_to_schedule(ds, cfg, notes: list):
    """Keep the first ``N'`` rows, ``N'`` the largest ladder end not above ``N``."""
    N_used = largest_admissible_n(cfg["a"], cfg["ratio"], ds.N)
    if N_used != ds.N:
        notes.append(f"dataset truncated from N={ds.N} to N'={N_used} to end on the batch ladder")
        ds = type(ds)(ds.kind, ds.seed, ds.params, ds.data[:N_used])
    return ds


def build_provider(ds, cfg):
    kind, comp = ds.kind, _component(cfg)
    if kind == "gaussian_mean":
        cov = np.asarray(ds.params["cov"], dtype=float)
        d = int(round(math.sqrt(cov.size)))
        return GaussianMeanModel(ds.data, cov.reshape(d, d), component=comp)
    if kind == "loggaussian":
        return LogGaussianModel(ds.data[:, 0], sampler_config(cfg))
    if kind == "logistic":
        return LogisticRegressionModel.from_dataset(ds, weight_index=comp, sampler_config=sampler_config(cfg))
    # default noise variance of the fit: the one the labels were drawn with
    lam = cfg["lam"] if cfg["lam"] is not None else float(ds.params.get("noise", 1.0))
    return RffRegressionModel.from_dataset(ds, cfg["m"], lam, cfg["basis_seed"], n_test=cfg["n_test"])


def _reducer(provider, cfg):
    """Scalar summary for convergence tables."""
    if isinstance(provider, RffRegressionModel):
        truth = provider.evaluate(np.arange(provider.dataset_size))
        return lambda v: mse(v, truth)
    return lambda v: float(np.ravel(v)[0])


def _prepare(cfg):
    notes: list[str] = []
    ds = truncate_to_schedule(load_dataset(cfg, notes), cfg, notes)
    schedule = build_geometric_schedule(cfg["a"], cfg["ratio"], ds.N)
    return ds, schedule, build_provider(ds, cfg), notes


# outputs


def _out_dir(cfg) -> Path:
    p = Path(cfg["out"])
    p.mkdir(parents=True, exist_ok=True)
    return p


def _header(cfg, notes=()) -> dict:
    return {"run_id": run_id(cfg), "master_seed": cfg["seed"], "config": result_config(cfg), "notes": list(notes)}


def _write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return path


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(f"cannot serialise {type(x).__name__}")


def _write_csv(path: Path, header: dict, columns: list[str], rows) -> Path:
    with open(path, "w", newline="") as fh:
        fh.write("# " + json.dumps(header, sort_keys=True, default=_jsonable) + "\n")
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _fmt(v):
    if isinstance(v, (np.floating, np.integer)):
        v = v.item()
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    if isinstance(v, np.ndarray):
        return ";".join(repr(float(x)) for x in v.ravel())
    return v


def _say(msg: str) -> None:
    print(msg, file=sys.stderr)


# commands


def cmd_generate(cfg) -> dict:
    notes: list[str] = []
    ds = generate_synthetic(cfg["kind"], _dataset_params(cfg, notes), cfg["N"], cfg["data_seed"])
    path = Path(cfg["data"] or Path(cfg["out"]) / f"{cfg['kind']}_N{cfg['N']}_seed{cfg['data_seed']}.csv")
    path.parent.mkdir(parents=True, exist_ok=True)
    write_dataset(path, ds)
    digest = hashlib.sha256(path.read_bytes()).hexdigest()
    for n in notes:
        _say(f"note: {n}")
    print(f"wrote {ds.N} rows x {ds.data.shape[1] if ds.data.ndim == 2 else 1} columns to {path} (sha256 {digest[:16]})")
    return {"path": str(path), "sha256": digest, "rows": ds.N}


def _pilot(cfg, provider, schedule):
    sizes = list(schedule.sizes[: cfg["pilot_levels"]])
    if len(sizes) < 3:
        raise ConfigError(f"the schedule has only {len(sizes)} levels; the pilot needs 3")
    return run_pilot(provider, sizes, cfg["pilot_repeats"], cfg["seed"], cfg["pilot_reference"])


def cmd_pilot(cfg) -> dict:
    ds, schedule, provider, notes = _prepare(cfg)
    res = _pilot(cfg, provider, schedule)
    out = {
        **_header(cfg, notes),
        "c": res.fit.c,
        "beta": res.fit.beta,
        "residual": res.fit.residual,
        "levels": res.sizes,
        "squared_diffs": res.squared_diffs,
        "reference_size": res.reference_size,
        "repeats": res.repeats,
    }
    path = _write_json(_out_dir(cfg) / "beta_fit.json", out)
    print(f"beta = {res.fit.beta:.4f}  c = {res.fit.c:.4g}  residual = {res.fit.residual:.3g}  -> {path}")
    return out


def beta_source(cfg, provider=None, schedule=None) -> ConvergenceFit:
    if cfg["beta_fit"] is not None:
        try:
            d = json.loads(Path(cfg["beta_fit"]).read_text())
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read beta fit: {exc}") from None
        return ConvergenceFit(float(d["c"]), float(d["beta"]), float(d.get("residual", 0.0)))
    if provider is None:
        ds, schedule, provider, _ = _prepare(cfg)
    return _pilot(cfg, provider, schedule).fit


def choose_alpha(cfg, schedule, fit: ConvergenceFit | None = None, provider=None) -> tuple[float, dict]:
    """Numeric alpha as given, or ``auto``: tune against the pilot beta minus a margin."""
    if cfg["alpha"] != "auto":
        return float(cfg["alpha"]), {"alpha_source": "config"}
    if fit is None:
        fit = beta_source(cfg, provider, schedule)
    safe = ConvergenceFit(fit.c, fit.beta - AUTO_ALPHA_MARGIN, fit.residual)
    alpha, product = tune_alpha(cfg["a"], cfg["ratio"], schedule.N, safe, cost_model(cfg))
    return alpha, {"alpha_source": "auto", "beta_fit": fit.beta, "beta_used": safe.beta, "work_variance": product}


def cmd_tune(cfg) -> dict:
    if cfg["beta_fit"] is not None:
        fit = beta_source(cfg)
        if cfg["data"] is not None and Path(cfg["data"]).exists():
            N = _prepare(cfg)[1].N
        else:
            # tune_alpha caps the ladder itself when N is off the grid
            N = cfg["N"]
    else:
        _, schedule, provider, _ = _prepare(cfg)
        fit, N = _pilot(cfg, provider, schedule).fit, schedule.N
    cost = cost_model(cfg)
    alpha, product = tune_alpha(cfg["a"], cfg["ratio"], N, fit, cost)
    curve = tradeoff_curve(cfg["a"], cfg["ratio"], N, fit, cost)
    alphas = np.sort(np.append(curve.alpha, alpha))
    curve = tradeoff_curve(cfg["a"], cfg["ratio"], N, fit, cost, alphas=alphas)
    header = {**_header(cfg), "beta": fit.beta, "c": fit.c, "N": N}
    out_dir = _out_dir(cfg)
    _write_csv(out_dir / "tradeoff.csv", header, ["alpha", "work", "variance", "product"], zip(*curve))
    out = {**header, "alpha": alpha, "work_variance": product}
    _write_json(out_dir / "alpha.json", out)
    print(f"alpha = {alpha:.4f}  (beta = {fit.beta:.4f}, N = {N}, a = {cfg['a']})")
    return out


class _JsonlSink:
    def __init__(self, fh):
        self.fh = fh

    def __call__(self, rep):
        self.fh.write(json.dumps(rep.record(), sort_keys=True) + "\n")
        self.fh.flush()


def cmd_run(cfg) -> dict:
    if cfg["R"] is None and cfg["tolerance"] is None:
        raise ConfigError("run needs R or tolerance")
    ds, schedule, provider, notes = _prepare(cfg)
    alpha, alpha_info = choose_alpha(cfg, schedule, provider=provider)
    dist = build_truncation_geometric(alpha, schedule.L)
    header = {**_header(cfg, notes), "alpha": alpha, **alpha_info, "N_used": schedule.N, "L": schedule.L}
    out_dir = _out_dir(cfg)
    status = EXIT_OK
    with open(out_dir / "replicates.jsonl", "w") as fh:
        fh.write(json.dumps({"header": header}, sort_keys=True, default=_jsonable) + "\n")
        try:
            est = run_debias(
                provider,
                schedule,
                dist,
                R=cfg["R"],
                tolerance=cfg["tolerance"],
                max_replicates=cfg["max_replicates"],
                master_seed=cfg["seed"],
                cost=cost_model(cfg),
                workers=cfg["workers"],
                level_cap=cfg["level_cap"],
                sink=_JsonlSink(fh),
            )
        except errors.ToleranceUnreachable as exc:
            est, status = exc.estimate, EXIT_BUDGET
            _say(f"error: {exc}")
    trace = convergence_trace(est.replicates)
    _write_csv(
        out_dir / "trace.csv",
        header,
        ["r", "running_mean", "ci95_halfwidth", "cumulative_evals"],
        ((p.r, p.running_mean, p.running_ci95, p.cumulative_evals) for p in trace),
    )
    summary = {**header, **est.summary()}
    summary["median_T"] = float(np.median([r.truncation for r in est.replicates]))
    _write_json(out_dir / "summary.json", summary)
    mean = np.ravel(est.mean)
    se = np.ravel(est.stderr)
    print(f"R = {est.R}  alpha = {alpha:.4f}  total evals = {est.total_likelihood_evals:.4g}")
    for j, (m, s) in enumerate(zip(mean[:10], se[:10])):
        print(f"  [{j}] mean = {m:.6g}  stderr = {s:.3g}")
    summary["exit"] = status
    return summary


def cmd_convergence(cfg) -> dict:
    ds, schedule, provider, notes = _prepare(cfg)
    if cfg["sizes"]:
        sizes = [int(float(s)) for s in cfg["sizes"].replace(";", ",").split(",") if s.strip()]
    else:
        sizes = list(schedule.sizes)
    if any(n < 1 or n > ds.N for n in sizes):
        raise ConfigError(f"sizes must lie in [1, {ds.N}]")
    rows = convergence_table(provider, sizes, cfg["repeats"], cfg["seed"], reduce=_reducer(provider, cfg))
    header = _header(cfg, notes)
    cols = ["n", "mean", "sd", "lower", "upper", "repeats", "band_defined"]
    _write_csv(
        _out_dir(cfg) / "convergence.csv",
        header,
        cols,
        ((r.n, r.mean, r.sd, r.lower, r.upper, r.repeats, int(r.band_defined)) for r in rows),
    )
    for r in rows:
        band = f"[{r.lower:.4g}, {r.upper:.4g}]" if r.band_defined else "(band undefined, repeats=1)"
        print(f"n = {r.n:>9}  mean = {r.mean:.5g}  95% band {band}")
    return {**header, "rows": [r.__dict__ for r in rows]}


def _stream_provider(block, noise_var, prior_mean, prior_var):
    return GaussianMeanModel(block[:, :1], [[noise_var]], [prior_mean], [[prior_var]], component=0)


def cmd_stream(cfg) -> dict:
    if cfg["R"] is None:
        raise ConfigError("stream needs R (number of replications)")
    noise_var, prior_var = cfg["noise_sd"] ** 2, cfg["prior_sd"] ** 2
    budget_schedule = build_geometric_schedule(cfg["a"], cfg["ratio"], cfg["n_max"])
    if cfg["alpha"] == "auto":
        raise ConfigError("stream needs a numeric alpha")
    alpha = float(cfg["alpha"])
    budget = StreamBudget(cfg["n_max"], budget_schedule, build_truncation_geometric(alpha, budget_schedule.L))
    if cfg["source"] == "generator":
        source = gaussian_stream(cfg["theta"], cfg["noise_sd"], cfg["stream_seed"])
    else:
        source = FileStream(cfg["source"])
    factory = functools.partial(_stream_provider, noise_var=noise_var, prior_mean=cfg["prior_mean"], prior_var=prior_var)
    report = run_streaming_debias(
        source, budget, factory, cfg["R"], cfg["seed"], baseline=cfg["baseline"], match=cfg["match"], workers=cfg["workers"]
    )
    target = posterior_limit_mean(cfg["n_max"], cfg["theta"], noise_var, cfg["prior_mean"], prior_var)
    deb = report.debiased
    lo, hi = deb.ci95
    out = {
        **_header(cfg),
        "target_nmax_posterior_mean": target,
        "debiased": deb.summary(),
        "debiased_ci_covers_target": bool(lo <= target <= hi),
        "processed": report.processed,
        "consumed": report.consumed,
    }
    rows = [("debiased", p.r, p.running_mean, p.running_ci95, p.cumulative_evals) for p in report.debiased_trace]
    if report.baseline is not None:
        base = report.baseline
        out["baseline"] = base.summary()
        out["batch_size"] = report.batch_size
        out["baseline_bias_in_stderr"] = float(abs(base.mean - target) / base.stderr) if base.stderr_defined else None
        out["cost_ratio"] = report.cost_ratio
        out["cost_matched"] = report.cost_matched
        rows += [("baseline", p.r, p.running_mean, p.running_ci95, p.cumulative_evals) for p in report.baseline_trace]
    out_dir = _out_dir(cfg)
    _write_json(out_dir / "stream_summary.json", out)
    _write_csv(out_dir / "stream_trace.csv", _header(cfg), ["scheme", "r", "running_mean", "ci95_halfwidth", "cumulative_evals"], rows)
    print(f"target {target:.4f}  debiased {float(deb.mean):.4f} +- {1.96 * float(deb.stderr):.4f}")
    if report.baseline is not None:
        print(
            f"baseline (batch {report.batch_size}) {float(base.mean):.4f} +- {1.96 * float(base.stderr):.4f}; "
            f"cost ratio {report.cost_ratio:.3f} ({'matched' if report.cost_matched else 'NOT matched'})"
        )
    return out


COMMANDS = {
    "generate": (cmd_generate, "write a synthetic dataset file"),
    "pilot": (cmd_pilot, "fit the convergence exponent beta on the first few levels"),
    "tune": (cmd_tune, "choose alpha and write the work-variance curve"),
    "run": (cmd_run, "run the debiased estimator"),
    "convergence": (cmd_convergence, "tabulate subsampled expectations per level size"),
    "stream": (cmd_stream, "streaming estimate with a cost-matched constant-batch baseline"),
}

CONFIG_HELP = "config keys (defaults): " + ", ".join(
    f"{k}={'' if d is None else d}" for k, (_, d) in SCHEMA.items()
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="debias",
        description=__doc__.split("\n\n")[0],
        epilog="Exit codes: 0 ok, 2 usage/config, 3 numerical, 4 budget/tolerance cap. "
        "DEBIAS_WORKERS overrides the worker count.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text, epilog=CONFIG_HELP)
        p.add_argument("-c", "--config", help="flat key = value config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
        p.add_argument("--out", help="output directory (same as --set out=DIR)")
    return parser


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, (errors.ToleranceUnreachable, errors.MemoryCapExceeded, errors.StreamExhausted)):
        return EXIT_BUDGET
    if isinstance(
        exc,
        (
            ConfigError,
            errors.InvalidParams,
            errors.NonIntegralLevels,
            errors.InvalidRatio,
            errors.NonPositiveAlpha,
            errors.LengthMismatch,
            errors.DimensionMismatch,
        ),
    ):
        return EXIT_USAGE
    if isinstance(exc, errors.NoFiniteMinimum):
        return EXIT_NUMERIC
    if isinstance(exc, (errors.DebiasError, ArithmeticError, np.linalg.LinAlgError)):
        return EXIT_NUMERIC
    raise exc


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    fn, _ = COMMANDS[args.command]
    overrides = list(args.set) + ([f"out={args.out}"] if args.out else [])
    try:
        cfg = resolve_config(args.config, overrides)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            result = fn(cfg)
    except Exception as exc:
        code = exit_code_for(exc)
        hint = ""
        if isinstance(exc, errors.NoFiniteMinimum):
            hint = " (beta is too small for any admissible alpha; use more pilot levels or set alpha by hand)"
        _say(f"error: {exc}{hint}")
        return code
    return result.get("exit", EXIT_OK) if isinstance(result, dict) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
