from __future__ import annotations

import csv
import io
import json
import subprocess
import sys
from datetime import date, timedelta

import numpy as np
import pytest

from segreg.cli import CURVE_POINTS, run_cli
from segreg.ingest import SeriesSpec, load_series_csv
from segreg.model import SegmentedModel, log_likelihood


def _run(argv):
    out, err = io.StringIO(), io.StringIO()
    code = run_cli([str(a) for a in argv], out, err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture()
def series_csv(tmp_path):
    # log counts rise, jump down, then decline after a kink
    rng = np.random.default_rng(4)
    n = 120
    t = np.arange(1, n + 1) / n
    logmu = 2 + 6 * t - 3.0 * (t > 0.4) - 10 * np.maximum(t - 0.75, 0)
    vals = np.exp(logmu + 0.1 * rng.standard_normal(n))
    path = tmp_path / "series.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["date", "value"])
        for i, v in enumerate(vals):
            w.writerow([(date(2020, 3, 13) + timedelta(days=i)).isoformat(), f"{v:.6f}"])
    return path


@pytest.fixture()
def xy_csv(tmp_path):
    rng = np.random.default_rng(1)
    x = np.sort(rng.random(60)) * 0.99 + 0.005
    y = np.abs(x - 0.5) * 4 + 0.2 * rng.standard_normal(60)
    path = tmp_path / "xy.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y"])
        w.writerows(zip(x, y))
    return path


class TestExitCodes:
    def test_usage(self):
        assert _run([])[0] == 1
        assert _run(["fit"])[0] == 1
        assert _run(["select", "--data", "a.csv", "--criteria", "hqic"])[0] == 1
        code, _, err = _run(["bogus"])
        assert code == 1 and err.count("\n") == 1

    def test_data_error(self, tmp_path):
        code, _, err = _run(["fit", "--data", tmp_path / "absent.csv", "--m", "1"])
        assert code == 2 and "data error" in err

    def test_numeric_error(self, xy_csv):
        code, _, err = _run(["fit", "--data", xy_csv, "--x-column", "x", "--m", "4",
                             "--min-segment-points", "20"])
        assert code == 3 and "numerical failure" in err

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "segreg", "--version"], capture_output=True,
                              text=True)
        assert proc.returncode == 0 and "segreg" in proc.stdout


class TestFit:
    def test_json_reproduces_loglik(self, series_csv, tmp_path):
        out = tmp_path / "fit.json"
        code, text, _ = _run(["fit", "--data", series_csv, "--pattern", "dc",
                              "--family", "gaussian-free-variance", "--json-out", out])
        assert code == 0 and "change-points" in text
        doc = json.loads(out.read_text())
        model = SegmentedModel.from_dict(doc["model"])
        data = load_series_csv(SeriesSpec(str(series_csv))).data
        assert log_likelihood(model, data) == pytest.approx(doc["loglik"], abs=1e-9)
        assert doc["config"]["pattern"] == "dc"
        assert doc["config"]["data"] == str(series_csv)

    def test_curve_file(self, series_csv, tmp_path):
        curve = tmp_path / "curve.tsv"
        code, _, _ = _run(["fit", "--data", series_csv, "--pattern", "dc", "--curve-out", curve])
        assert code == 0
        with open(curve) as fh:
            rows = list(csv.DictReader(fh, delimiter="\t"))
        kinds = [r["kind"] for r in rows]
        assert kinds.count("curve") == CURVE_POINTS
        assert kinds[CURVE_POINTS:] == ["change-point:discontinuous", "change-point:continuous"]
        assert rows[0]["date"] == "2020-03-13" and rows[CURVE_POINTS - 1]["date"] == "2020-07-10"
        assert float(rows[CURVE_POINTS - 1]["x"]) == 1.0

    def test_m0_matches_select_m_max_0(self, xy_csv, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert _run(["fit", "--data", xy_csv, "--x-column", "x", "--m", "0", "--json-out", a])[0] == 0
        assert _run(["select", "--data", xy_csv, "--x-column", "x", "--m-max", "0",
                     "--json-out", b])[0] == 0
        fit = json.loads(a.read_text())["model"]
        sel = json.loads(b.read_text())["reports"]["aic"]["best"]["model"]
        np.testing.assert_allclose(fit["segments"][0], sel["segments"][0], atol=1e-12)

    def test_pattern_m_mismatch(self, xy_csv):
        assert _run(["fit", "--data", xy_csv, "--x-column", "x", "--m", "2",
                     "--pattern", "c"])[0] == 1


class TestSelect:
    def test_recovers_series_structure(self, series_csv, tmp_path):
        out = tmp_path / "sel.json"
        code, text, _ = _run(["select", "--data", series_csv, "--m-max", "3",
                              "--family", "gaussian-free-variance", "--criteria", "aic,bic",
                              "--json-out", out, "--curve-out", tmp_path / "curve"])
        assert code == 0
        doc = json.loads(out.read_text())
        assert set(doc["reports"]) == {"aic", "bic"}
        best = doc["reports"]["bic"]["best"]
        assert best["pattern"] == "dc"
        assert (tmp_path / "curve.aic.tsv").exists() and (tmp_path / "curve.bic.tsv").exists()
        assert "[aic]" in text and "[bic]" in text
        assert len(doc["reports"]["aic"]["table"]) == 15

    def test_cont_policy(self, xy_csv):
        code, text, _ = _run(["select", "--data", xy_csv, "--x-column", "x", "--m-max", "2",
                              "--patterns", "cont", "--criteria", "bic"])
        assert code == 0 and "best m=1 pattern=c" in text


class TestMcAsym:
    def test_mc_table1_smoke(self, tmp_path):
        out = tmp_path / "mc.json"
        code, text, _ = _run(["mc", "--preset", "table1", "--reps", "50", "--seed", "1",
                              "--json-out", out])
        assert code == 0
        reports = json.loads(out.read_text())["reports"]
        assert len(reports) == 8 and all(r["experiment"] == "bias" for r in reports)
        assert all(r["config"]["seed"] == 1 and r["replications"] == 50 for r in reports)

    def test_mc_config_file(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"experiment": "selection", "n": 50, "m_true": 1,
                                   "theta_true": [0, 0, 2, 0], "tau_true": [0.5],
                                   "continuity_true": "d", "m_max": 2, "replications": 5}))
        code, text, _ = _run(["mc", "--config", cfg, "--seed", "2"])
        assert code == 0 and "aic" in text

    def test_mc_needs_one_source(self):
        assert _run(["mc"])[0] == 1

    def test_asym_trace(self, tmp_path):
        trace, out = tmp_path / "trace.tsv", tmp_path / "asym.json"
        code, text, _ = _run(["asym", "--horizon", "20", "--step", "0.05", "--reps", "200",
                              "--trace-out", trace, "--json-out", out])
        assert code == 0 and "e_total" in text
        lines = trace.read_text().splitlines()
        assert lines[0] == "s\tV" and len(lines) > 100
        doc = json.loads(out.read_text())
        assert doc["e_total"] == pytest.approx(doc["e_sup"] + doc["e_neg_copy_at_argsup"])

    def test_asym_horizon_too_small(self):
        assert _run(["asym", "--horizon", "0.5", "--reps", "200"])[0] == 3
