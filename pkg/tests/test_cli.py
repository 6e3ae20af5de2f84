import json
import subprocess
import sys

import pytest

from chaoslab import experiments
from chaoslab.cli import EXIT_CHECK, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main
from chaoslab.exceptions import GridTooCoarse


def run(*args):
    return main(list(args))


class TestRates:
    def test_csv_byte_identical(self, tmp_path):
        args = ["rates", "--hurst", "0.3,0.7", "--n-min", "64", "--n-max", "128",
                "--seed", "7", "--samples", "2000", "--points", "4096"]
        assert run(*args, "--out", str(tmp_path / "a.csv")) == EXIT_OK
        assert run(*args, "--out", str(tmp_path / "b.csv")) == EXIT_OK
        a = (tmp_path / "a.csv").read_bytes()
        assert a == (tmp_path / "b.csv").read_bytes()
        assert len(a.decode().splitlines()) == 5

    def test_json_schema(self, tmp_path):
        out = tmp_path / "r.json"
        assert run("rates", "--hurst", "0.5", "--n-min", "64", "--n-max", "64", "--samples", "0",
                   "--format", "json", "--out", str(out)) == EXIT_OK
        d = json.loads(out.read_text())
        assert d["schema"] == "chaoslab/1"
        assert d["rows"][0]["kappa4"] == pytest.approx(12 / 64)
        assert d["rows"][0]["stein_bound"] is None

    def test_config_supplies_matrix_and_flags_override(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"hurst": [0.3, 0.5], "n_min": 64, "n_max": 256, "samples": 0}))
        out = tmp_path / "r.json"
        assert run("rates", "--config", str(cfg), "--n-max", "128", "--format", "json",
                   "--points", "4096", "--out", str(out)) == EXIT_OK
        rows = json.loads(out.read_text())["rows"]
        assert [(r["h"], r["n"]) for r in rows] == [(0.3, 64), (0.3, 128), (0.5, 64), (0.5, 128)]

    @pytest.mark.parametrize("args", [
        ["rates", "--hurst", "0.5", "--n-min", "48", "--n-max", "128"],
        ["rates", "--hurst", "0.5", "--n-min", "32", "--n-max", "128"],
        ["rates", "--hurst", "1.5", "--n-min", "64", "--n-max", "128"],
        ["rates", "--format", "xml"],
        ["rates", "--config", "/nonexistent/config.json"],
    ])
    def test_usage_errors(self, args):
        assert run(*args) == EXIT_USAGE


class TestVerify:
    def test_algebra_passes(self, tmp_path):
        out = tmp_path / "v.json"
        assert run("verify", "--suite", "algebra", "--out", str(out)) == EXIT_OK
        assert json.loads(out.read_text())["passed"] is True

    def test_failure_exit_code(self, monkeypatch, tmp_path):
        monkeypatch.setitem(experiments.SUITES, "algebra", lambda m, c: [experiments.Check("forced", False)])
        assert run("verify", "--suite", "algebra", "--out", str(tmp_path / "v.json")) == EXIT_CHECK

    def test_matrix_file(self, tmp_path):
        m = tmp_path / "m.json"
        m.write_text(json.dumps({"hurst": [0.7], "n": [16]}))
        out = tmp_path / "v.json"
        assert run("verify", "--suite", "debruijn", "--matrix", str(m), "--out", str(out)) == EXIT_OK
        assert [c["name"] for c in json.loads(out.read_text())["checks"]] == ["debruijn[h=0.7,n=16]"]

    def test_bad_matrix_file(self, tmp_path):
        m = tmp_path / "m.json"
        m.write_text("{not json")
        assert run("verify", "--suite", "debruijn", "--matrix", str(m)) == EXIT_USAGE

    def test_unknown_suite(self):
        assert run("verify", "--suite", "everything") == EXIT_USAGE


class TestDensity:
    def test_writes_files(self, tmp_path, capsys):
        assert run("density", "--hurst", "0.5", "--n", "1", "--points", "4096",
                   "--half-width", "16", "--out", str(tmp_path)) == EXIT_OK
        report = json.loads(capsys.readouterr().out)
        assert report["fisher_excess"] == "divergent"
        assert (tmp_path / "density.csv").read_text().startswith("x,p,dp\n")

    @pytest.mark.parametrize("args", [
        ["--points", "1000"], ["--half-width", "-1"], ["--hurst", "0"],
    ])
    def test_usage_errors(self, tmp_path, args):
        base = {"--hurst": "0.5", "--n": "8", "--points": "4096", "--half-width": "16"}
        base.update(dict(zip(args[::2], args[1::2])))
        flat = [x for kv in base.items() for x in kv]
        assert run("density", *flat, "--out", str(tmp_path)) == EXIT_USAGE

    def test_numerical_failure(self, monkeypatch, tmp_path):
        def boom(*a, **k):
            raise GridTooCoarse("synthetic")

        monkeypatch.setattr(experiments, "cmd_density", boom)
        assert run("density", "--hurst", "0.5", "--n", "8", "--out", str(tmp_path)) == EXIT_NUMERIC


class TestNegmoments:
    def test_row(self, capsys):
        assert run("negmoments", "--hurst", "0.5", "--n", "64", "--power", "2",
                   "--samples", "20000", "--seed", "3") == EXIT_OK
        d = json.loads(capsys.readouterr().out)
        assert d["schema"] == "chaoslab/1"
        row = d["rows"][0]
        assert set(row) == {"h", "n", "p", "mean", "se", "samples", "tail_flag", "seed"}
        assert abs(row["mean"] - 64 / 124) < 4 * row["se"]

    def test_identical_output(self, capsys):
        args = ("negmoments", "--hurst", "0.3", "--n", "32", "--power", "4", "--samples", "5000", "--seed", "1")
        run(*args)
        first = capsys.readouterr().out
        run(*args)
        assert capsys.readouterr().out == first

    @pytest.mark.parametrize("extra", [["--power", "9"], ["--samples", "10"], ["--seed", "-4"]])
    def test_usage_errors(self, extra):
        base = {"--hurst": "0.5", "--n": "8", "--power": "2", "--samples": "2000", "--seed": "0"}
        base.update(dict(zip(extra[::2], extra[1::2])))
        assert run("negmoments", *[x for kv in base.items() for x in kv]) == EXIT_USAGE


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "chaoslab.cli", "verify", "--suite", "algebra"],
                          capture_output=True, text=True)
    assert proc.returncode == EXIT_OK
    assert json.loads(proc.stdout)["suite"] == "algebra"


def test_no_command_is_usage_error():
    assert run() == EXIT_USAGE
