import json
import math
import os

import numpy as np
import pytest

from chaoslab import FgnSpec, McConfig, cumulants, spectrum
from chaoslab import experiments
from chaoslab.exceptions import GridTooCoarse, InsufficientData
from chaoslab.experiments import (
    RateRow,
    RateTable,
    cmd_density,
    cmd_rates,
    cmd_verify,
    fit_power_law,
    fit_slope,
    geometric_n,
    load_matrix,
    trend_test,
)


class TestHelpers:
    def test_geometric_n(self):
        assert geometric_n(64, 512) == [64, 128, 256, 512]

    def test_geometric_n_rejects(self):
        with pytest.raises(ValueError):
            geometric_n(60, 512)

    def test_exact_power_law(self):
        n = 2.0 ** np.arange(6, 13)
        fit = fit_power_law(n, 1 / n)
        assert fit.slope == pytest.approx(-1.0, abs=1e-12)
        assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
        assert fit.n_range == (64, 4096)

    def test_insufficient_points(self):
        table = RateTable([RateRow(0.5, n, 0.0, 12 / n) for n in (64, 128, 256, 512)])
        with pytest.raises(InsufficientData):
            fit_slope(table, "kappa4", 0.5)

    def test_trend_test(self):
        x = np.arange(7.0)
        up = trend_test(x, 1 + 0.05 * x, np.full(7, 0.01))
        flat = trend_test(x, np.ones(7), np.full(7, 0.01))
        down = trend_test(x, 1 - 0.05 * x, np.full(7, 0.01))
        assert up[2] and not flat[2] and not down[2]
        assert up[0] == pytest.approx(0.05)

    def test_load_matrix(self, tmp_path):
        path = tmp_path / "m.json"
        path.write_text(json.dumps({"hurst": [0.3], "n_min": 64, "n_max": 256}))
        assert load_matrix(str(path)) == {"hurst": [0.3], "n": [64, 128, 256]}
        assert load_matrix({"hurst": [0.7], "n": [16]}) == {"hurst": [0.7], "n": [16]}


class TestRateTable:
    def test_rows_sorted(self, default_table):
        keys = [(r.h, r.n) for r in default_table.rows]
        assert keys == sorted(keys)
        assert len(keys) == len(experiments.DEFAULT_HURST) * len(experiments.DEFAULT_N)

    def test_white_noise_kappa4(self, default_table):
        n, k4 = default_table.column("kappa4", 0.5)
        assert np.allclose(k4, 12 / n, rtol=0, atol=1e-14)

    def test_kappa4_slope_long_memory(self, default_table):
        assert fit_slope(default_table, "kappa4", 0.7).slope == pytest.approx(8 * 0.7 - 6, abs=0.2)

    def test_kappa4_log_cubed_bounded(self, default_table):
        n, k4 = default_table.column("kappa4", 0.625)
        ratio = k4 * n / np.log(n) ** 3
        assert np.all(np.diff(ratio) < 0)

    def test_white_noise_fisher_slope(self, default_table):
        fit = fit_slope(default_table, "fisher_excess", 0.5)
        assert -1.15 <= fit.slope <= -0.85
        assert fit.r_squared > 0.99

    def test_fisher_over_kappa4_bounded(self, default_table):
        for h in (0.3, 0.5, 0.55):
            _, j = default_table.column("fisher_excess", h)
            _, k4 = default_table.column("kappa4", h)
            ratio = j / k4
            assert ratio.max() < 10 * ratio.min()

    def test_every_finite_row_satisfies_chain(self, default_table):
        for r in default_table.rows:
            assert not r.annotation
            assert 2 * r.tv ** 2 <= r.entropy + 1e-6
            assert r.entropy <= 0.5 * r.fisher_excess + 1e-6
            assert r.sup <= math.sqrt(r.fisher_excess) + 1e-6

    def test_beyond_threshold_kappa4_does_not_vanish(self):
        n = [2 ** k for k in range(6, 13)]
        k4 = np.array([cumulants(spectrum(FgnSpec(0.8, m)), 4)[4] for m in n])
        local = np.diff(np.log(k4)) / math.log(2)
        # local slopes flatten toward zero instead of settling at a negative exponent
        assert np.all(np.diff(local) > 0)
        assert local[-1] > -0.15
        d = np.diff(k4)
        aitken = k4[-1] - d[-1] ** 2 / (d[-1] - d[-2])
        assert aitken > 1.0

    def test_annotation_on_failure(self, monkeypatch):
        def boom(*args, **kwargs):
            raise GridTooCoarse("synthetic")

        monkeypatch.setattr(experiments, "density", boom)
        table = cmd_rates([0.5], [64, 128], None)
        assert all("GridTooCoarse" in r.annotation for r in table.rows)
        assert all(math.isnan(r.tv) for r in table.rows)
        assert table.rows[0].kappa4 == pytest.approx(12 / 64)
        assert json.loads(table.to_json())["rows"][0]["tv"] is None

    def test_exports_and_determinism(self):
        cfg = McConfig(2000, seed=5)
        a = cmd_rates([0.3, 0.7], [64, 128], cfg)
        b = cmd_rates([0.7, 0.3], [128, 64], cfg, jobs=3)
        assert a.to_csv() == b.to_csv()
        assert a.to_json() == b.to_json()
        d = json.loads(a.to_json())
        assert d["schema"] == "chaoslab/1"
        assert set(d["rows"][0]) >= {"h", "n", "kappa3", "kappa4", "tv", "sup", "entropy",
                                     "fisher_excess", "stein_bound", "error_budget"}
        header = a.to_csv().splitlines()[0].split(",")
        assert header[:4] == ["h", "n", "kappa3", "kappa4"]

    def test_divergent_fisher_serialized(self):
        table = RateTable([RateRow(0.5, 4, 1.0, 3.0, fisher_excess=math.inf)])
        assert json.loads(table.to_json())["rows"][0]["fisher_excess"] == "divergent"
        assert "divergent" in table.to_csv()


class TestVerify:
    def test_algebra(self):
        passed, report = cmd_verify("algebra")
        assert passed and report["schema"] == "chaoslab/1"
        names = {c["name"] for c in report["checks"]}
        assert {"isometry_via_product_formula", "integration_by_parts"} <= names
        json.dumps(report)

    def test_unknown_suite(self):
        with pytest.raises(ValueError):
            cmd_verify("nonsense")

    def test_inequalities_small_matrix(self):
        passed, report = cmd_verify("inequalities", {"hurst": [0.5, 0.7], "n": [64, 256]}, McConfig(5000, seed=1))
        assert passed
        names = [c["name"] for c in report["checks"]]
        assert any(n.startswith("stein_sandwich") for n in names)
        assert any(n.startswith("shimizu") for n in names)

    def test_divergent_rows_skip_fisher_checks(self):
        passed, report = cmd_verify("inequalities", {"hurst": [0.5], "n": [2]}, None)
        assert passed
        assert [c["name"] for c in report["checks"]][0].startswith("pinsker")
        assert not any(c["name"].startswith("shimizu") for c in report["checks"])

    def test_debruijn_small_matrix(self):
        passed, _ = cmd_verify("debruijn", {"hurst": [0.7], "n": [16]})
        assert passed

    def test_carbery_wright_small(self):
        passed, report = cmd_verify("carbery-wright", {"hurst": [0.5], "n": [64]}, McConfig(100_000, seed=2))
        assert passed
        assert report["checks"][0]["name"] == "single_gaussian_square"

    def test_negmoments_marks_beyond_threshold_informational(self):
        matrix = {"hurst": [0.76, 0.3], "n": [64, 128, 256, 512, 1024]}
        passed, report = cmd_verify("negmoments", matrix, McConfig(4000, seed=3))
        info = {c["name"]: c["informational"] for c in report["checks"]}
        assert info["no_upward_trend[h=0.76,p=6]"]
        assert not info["no_upward_trend[h=0.3,p=6]"]
        assert passed

    def test_failures_are_reported(self, monkeypatch):
        monkeypatch.setitem(experiments.SUITES, "algebra", lambda m, c: [experiments.Check("forced", False)])
        passed, report = cmd_verify("algebra")
        assert not passed and report["checks"][0]["passed"] is False


class TestDensityCommand:
    def test_white_noise_large_n(self):
        _, rep = cmd_density(0.5, 4096)
        assert rep.sup < 0.02

    def test_single_term(self, tmp_path):
        g, rep = cmd_density(0.5, 1, out=str(tmp_path))
        assert g.left_support_edge == pytest.approx(-1 / math.sqrt(2))
        assert rep.fisher_divergent
        assert sorted(os.listdir(tmp_path)) == ["density.csv", "density.json", "report.json", "spectrum.json"]
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["schema"] == "chaoslab/1" and report["fisher_excess"] == "divergent"
        grid = json.loads((tmp_path / "density.json").read_text())
        assert {"x0", "dx", "p", "dp", "schema"} <= set(grid)

    def test_full_chain(self):
        _, rep = cmd_density(0.7, 256)
        assert all(rep.chain().values())

    def test_byte_identical(self, tmp_path):
        cmd_density(0.3, 32, points=2 ** 12, out=str(tmp_path / "a"))
        cmd_density(0.3, 32, points=2 ** 12, out=str(tmp_path / "b"))
        for name in ("density.json", "density.csv", "report.json", "spectrum.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_negmoment_row():
    row = experiments.negmoment_row(0.5, 64, 2, McConfig(10_000, seed=4))
    assert set(row) == {"h", "n", "p", "mean", "se", "samples", "tail_flag", "seed"}
    assert row["seed"] == 4 and row["samples"] == 10_000
