import csv
import hashlib
import json

import numpy as np
import pytest

from debiasing.cli import (
    EXIT_BUDGET,
    EXIT_NUMERIC,
    EXIT_OK,
    EXIT_USAGE,
    ConfigError,
    main,
    parse_config_text,
    resolve_config,
    run_id,
)
from debiasing.models import read_dataset


def read_csv(path):
    with open(path) as fh:
        header = json.loads(fh.readline()[2:])
        rows = list(csv.DictReader(fh))
    return header, rows


def gauss_args(tmp_path, *extra):
    return ["--out", str(tmp_path), "--set", "kind=gaussian_mean", "--set", "N=100", "--set", "a=25", *extra]


class TestConfig:
    def test_parse_text(self):
        cfg = parse_config_text("# comment\nN = 10\nalpha=0.5  # trailing\n\n")
        assert cfg == {"N": "10", "alpha": "0.5"}

    def test_bad_line(self):
        with pytest.raises(ConfigError):
            parse_config_text("N 10")

    def test_defaults_and_overrides(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("N = 64\nseed = 3\n")
        cfg = resolve_config(path, ["seed=5", "R=1e3"], env={})
        assert (cfg["N"], cfg["seed"], cfg["R"], cfg["a"]) == (64, 5, 1000, 8)

    def test_env_workers(self):
        assert resolve_config(None, [], env={"DEBIAS_WORKERS": "6"})["workers"] == 6

    @pytest.mark.parametrize(
        "item",
        ["nope=1", "R=0", "ratio=1", "alpha=-1", "kind=poisson", "pilot_levels=2", "N=abc", "R=5", "iterations=0"],
    )
    def test_invalid(self, item):
        overrides = [item] + (["tolerance=0.1"] if item == "R=5" else [])
        with pytest.raises(ConfigError):
            resolve_config(None, overrides, env={})

    def test_run_id_ignores_workers_and_out(self):
        a = resolve_config(None, ["workers=1", "out=x"], env={})
        b = resolve_config(None, ["workers=8", "out=y"], env={})
        c = resolve_config(None, ["seed=1"], env={})
        assert run_id(a) == run_id(b) != run_id(c)


class TestGenerate:
    def test_checksum_reproducible(self, tmp_path):
        digests = []
        for sub in ("a", "b"):
            out = tmp_path / sub
            args = ["--out", str(out), "--set", "kind=loggaussian", "--set", "N=65536"]
            assert main(["generate", *args]) == EXIT_OK
            (path,) = out.iterdir()
            digests.append(hashlib.sha256(path.read_bytes()).hexdigest())
            assert read_dataset(path).N == 65536
        assert digests[0] == digests[1]

    def test_logistic_columns(self, tmp_path):
        path = tmp_path / "lr.csv"
        args = ["--set", "kind=logistic", "--set", "N=1000", "--set", f"data={path}"]
        assert main(["generate", *args]) == EXIT_OK
        assert read_dataset(path).data.shape == (1000, 10)

    def test_invalid_kind(self, tmp_path):
        assert main(["generate", "--out", str(tmp_path), "--set", "kind=poisson"]) == EXIT_USAGE

    def test_bad_params(self, tmp_path):
        args = ["--out", str(tmp_path), "--set", "kind=loggaussian", "--set", "params=sigma2:-1"]
        assert main(["generate", *args]) == EXIT_USAGE

    def test_argparse_usage(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2


class TestPilotAndTune:
    def test_pilot_gaussian_beta(self, tmp_path):
        args = [
            "--out", str(tmp_path), "--set", "N=4096", "--set", "params=mu:0;0",
            "--set", "pilot_repeats=200", "--set", "pilot_reference=full",
        ]
        assert main(["pilot", *args]) == EXIT_OK
        fit = json.loads((tmp_path / "beta_fit.json").read_text())
        assert 0.8 <= fit["beta"] <= 1.3
        assert len(fit["levels"]) == 6
        assert fit["config"]["N"] == 4096

    def test_pilot_two_levels(self, tmp_path):
        assert main(["pilot", "--out", str(tmp_path), "--set", "pilot_levels=2"]) == EXIT_USAGE

    def test_pilot_short_ladder(self, tmp_path):
        # N=16 with a=8 has only two levels
        assert main(["pilot", "--out", str(tmp_path), "--set", "N=16"]) == EXIT_USAGE

    def _fit_file(self, tmp_path, beta):
        path = tmp_path / "fit.json"
        path.write_text(json.dumps({"c": 1.0, "beta": beta, "residual": 0.0}))
        return path

    def test_tune_curve(self, tmp_path):
        fit = self._fit_file(tmp_path, 1.0)
        args = ["--out", str(tmp_path), "--set", f"beta_fit={fit}", "--set", "N=10000", "--set", "a=128"]
        assert main(["tune", *args]) == EXIT_OK
        result = json.loads((tmp_path / "alpha.json").read_text())
        _, rows = read_csv(tmp_path / "tradeoff.csv")
        alpha = np.array([float(r["alpha"]) for r in rows])
        work = np.array([float(r["work"]) for r in rows])
        var = np.array([float(r["variance"]) for r in rows])
        prod = np.array([float(r["product"]) for r in rows])
        assert alpha[np.nanargmin(prod)] == result["alpha"]
        assert 0.82 <= result["alpha"] <= 0.92
        finite = np.isfinite(var)
        assert np.all(np.diff(work) <= 0)
        assert np.all(np.diff(var[finite]) >= 0)

    def test_tune_tiny_beta(self, tmp_path, capsys):
        fit = self._fit_file(tmp_path, 0.01)
        args = ["--out", str(tmp_path), "--set", f"beta_fit={fit}", "--set", "N=10000", "--set", "a=128"]
        assert main(["tune", *args]) == EXIT_NUMERIC
        assert "alpha by hand" in capsys.readouterr().err


class TestRun:
    def test_indefinite_cov_config(self, tmp_path):
        args = gauss_args(tmp_path, "--set", "params=cov:-1;3;3;1", "--set", "R=400", "--set", "alpha=0.8")
        assert main(["run", *args]) == EXIT_OK
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert any("not SPD" in n for n in summary["notes"])
        assert summary["R"] == 400 and summary["N_used"] == 100
        lines = (tmp_path / "replicates.jsonl").read_text().splitlines()
        assert "header" in json.loads(lines[0])
        rec = json.loads(lines[1])
        assert set(rec) == {"r", "seed", "T", "phi_star", "likelihood_evals"}
        assert len(lines) == 401
        header, rows = read_csv(tmp_path / "trace.csv")
        assert header["run_id"] == summary["run_id"] and len(rows) == 400

    def test_rerun_byte_identical(self, tmp_path):
        blobs = []
        for sub, workers in (("a", "1"), ("b", "3")):
            out = tmp_path / sub
            args = ["--out", str(out), "--set", "N=64", "--set", "alpha=0.7", "--set", "R=50", "--set", f"workers={workers}"]
            assert main(["run", *args]) == EXIT_OK
            blobs.append((out / "replicates.jsonl").read_bytes())
        assert blobs[0] == blobs[1]

    def test_auto_alpha_margin(self, tmp_path):
        args = gauss_args(tmp_path, "--set", "R=20", "--set", "params=mu:0;0", "--set", "N=1600", "--set", "pilot_reference=full")
        assert main(["run", *args]) == EXIT_OK
        s = json.loads((tmp_path / "summary.json").read_text())
        assert s["alpha_source"] == "auto"
        assert s["beta_used"] == pytest.approx(s["beta_fit"] - 0.1)

    def test_needs_stop_rule(self, tmp_path):
        assert main(["run", "--out", str(tmp_path), "--set", "alpha=0.5"]) == EXIT_USAGE

    def test_tolerance_cap_partial_results(self, tmp_path):
        args = gauss_args(tmp_path, "--set", "alpha=0.5", "--set", "tolerance=1e-9", "--set", "max_replicates=30")
        assert main(["run", *args]) == EXIT_BUDGET
        lines = (tmp_path / "replicates.jsonl").read_text().splitlines()
        assert len(lines) == 31
        assert json.loads((tmp_path / "summary.json").read_text())["R"] == 30

    def test_level_cap_budget(self, tmp_path):
        args = gauss_args(tmp_path, "--set", "alpha=0.1", "--set", "R=50", "--set", "level_cap=30")
        code = main(["run", *args])
        assert code in (EXIT_OK, EXIT_BUDGET)
        s = json.loads((tmp_path / "summary.json").read_text())
        assert s["budget_truncated"]


class TestConvergence:
    def test_table(self, tmp_path):
        args = gauss_args(tmp_path, "--set", "repeats=20")
        assert main(["convergence", *args]) == EXIT_OK
        _, rows = read_csv(tmp_path / "convergence.csv")
        assert [int(r["n"]) for r in rows] == [25, 50, 100]
        # the full-data row is deterministic: zero-width band
        assert float(rows[-1]["sd"]) == pytest.approx(0.0, abs=1e-12)

    def test_single_repeat_undefined(self, tmp_path):
        args = gauss_args(tmp_path, "--set", "repeats=1", "--set", "sizes=10,20")
        assert main(["convergence", *args]) == EXIT_OK
        _, rows = read_csv(tmp_path / "convergence.csv")
        assert all(r["band_defined"] == "0" for r in rows)

    def test_bad_sizes(self, tmp_path):
        assert main(["convergence", *gauss_args(tmp_path, "--set", "sizes=1000")]) == EXIT_USAGE


class TestStream:
    def test_stream_outputs(self, tmp_path):
        args = ["--out", str(tmp_path), "--set", "a=16", "--set", "n_max=1024", "--set", "alpha=0.6", "--set", "R=200"]
        assert main(["stream", *args]) == EXIT_OK
        s = json.loads((tmp_path / "stream_summary.json").read_text())
        assert s["cost_matched"]
        assert abs(s["cost_ratio"] - 1) <= 0.05
        _, rows = read_csv(tmp_path / "stream_trace.csv")
        assert {r["scheme"] for r in rows} == {"debiased", "baseline"}

    def test_stream_needs_r(self, tmp_path):
        assert main(["stream", "--out", str(tmp_path), "--set", "alpha=0.6"]) == EXIT_USAGE

    def test_stream_r_zero(self, tmp_path):
        assert main(["stream", "--out", str(tmp_path), "--set", "alpha=0.6", "--set", "R=0"]) == EXIT_USAGE

    def test_stream_exhausted(self, tmp_path):
        path = tmp_path / "tiny.csv"
        assert main(["generate", "--set", "params=mu:0,cov:1", "--set", "N=50", "--set", f"data={path}"]) == EXIT_OK
        args = ["--out", str(tmp_path), "--set", "a=16", "--set", "n_max=1024", "--set", "alpha=0.6",
                "--set", "R=100", "--set", f"source={path}"]
        assert main(["stream", *args]) == EXIT_BUDGET
