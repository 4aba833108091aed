import csv
import io
import json
import math

import numpy as np
import pytest

from pcqm import cli
from pcqm import estimators as E
from pcqm.errors import OptimizationError
from pcqm.fileio import write_sample_csv


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.fixture
def complete_csv(tmp_path):
    rng = np.random.default_rng(1)
    s = E.DistanceSample(rng.uniform(1, 5, (30, 4)))
    path = tmp_path / "complete.csv"
    write_sample_csv(path, s)
    return path, s


@pytest.fixture
def censored_csv(tmp_path):
    rng = np.random.default_rng(2)
    d = rng.uniform(1, 9, (40, 4))
    d[rng.random((40, 4)) < 0.15] = np.nan
    s = E.DistanceSample(d, C=10.0)
    path = tmp_path / "censored.csv"
    write_sample_csv(path, s)
    return path, s


class TestEstimate:
    def test_pollard_matches_library(self, complete_csv, capsys):
        path, s = complete_csv
        assert cli.main(["estimate", str(path), "--estimator", "pollard"]) == 0
        (row,) = _rows(capsys.readouterr().out)
        assert float(row["lambda_hat"]) == E.pollard(s).lambda_hat

    def test_all_censored_gives_seven_rows(self, censored_csv, capsys):
        path, _ = censored_csv
        assert cli.main(["estimate", str(path), "--estimator", "all", "--radius", "10"]) == 0
        rows = _rows(capsys.readouterr().out)
        assert [r["estimator"] for r in rows] == list(E.CENSORED_ESTIMATORS)
        assert len(rows) == 7

    def test_all_on_complete_data(self, complete_csv, capsys):
        path, _ = complete_csv
        assert cli.main(["estimate", str(path)]) == 0
        assert [r["estimator"] for r in _rows(capsys.readouterr().out)] == list(E.COMPLETE_ESTIMATORS)

    def test_not_applicable_exit_2(self, censored_csv, capsys):
        path, _ = censored_csv
        code = cli.main(["estimate", str(path), "--estimator", "morisita-censored", "--ell", "1",
                         "--radius", "10"])
        assert code == 2
        assert "error" in capsys.readouterr().err

    def test_every_sector_censored_exit_1(self, tmp_path):
        path = tmp_path / "none.csv"
        write_sample_csv(path, E.DistanceSample(np.full((2, 4), np.nan), C=10.0))
        assert cli.main(["estimate", str(path), "--radius", "10"]) == 1

    def test_malformed_input_exit_1(self, tmp_path, capsys):
        path = tmp_path / "bad.csv"
        path.write_text("point_id,sector_id,distance,censored\n0,0,abc,0\n")
        assert cli.main(["estimate", str(path)]) == 1
        assert "bad.csv" in capsys.readouterr().err

    def test_unknown_estimator_exit_1(self, complete_csv):
        assert cli.main(["estimate", str(complete_csv[0]), "--estimator", "nope"]) == 1

    def test_numeric_failure_exit_3(self, complete_csv, monkeypatch):
        def boom(s):
            raise OptimizationError("did not converge")
        monkeypatch.setitem(E.ESTIMATORS, "pollard", boom)
        assert cli.main(["estimate", str(complete_csv[0]), "--estimator", "pollard"]) == 3

    def test_out_file(self, complete_csv, tmp_path):
        out = tmp_path / "est.csv"
        assert cli.main(["estimate", str(complete_csv[0]), "--estimator", "cottam", "--out", str(out)]) == 0
        assert _rows(out.read_text())[0]["estimator"] == "cottam"


class TestSimulate:
    def test_byte_identical(self, tmp_path):
        for sub in ("a", "b"):
            assert cli.main(["simulate", "--config", "csr_simulate", "--out", str(tmp_path / sub)]) == 0
        for name in ("pattern.csv", "window.json", "sample.csv", "manifest.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_seed_override_changes_output(self, tmp_path):
        cli.main(["simulate", "--config", "csr_simulate", "--out", str(tmp_path / "a")])
        cli.main(["simulate", "--config", "csr_simulate", "--seed", "8", "--out", str(tmp_path / "b")])
        assert (tmp_path / "a" / "pattern.csv").read_bytes() != (tmp_path / "b" / "pattern.csv").read_bytes()

    def test_thomas_manifest_intensity(self, tmp_path):
        assert cli.main(["simulate", "--config", "thomas_simulate", "--out", str(tmp_path)]) == 0
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["intensity"] == pytest.approx(0.05)
        assert manifest["realized_intensity"] == pytest.approx(0.05, rel=0.1)

    def test_invalid_buffer_exit_1(self, tmp_path):
        data, _ = cli.load_config_json("csr_simulate")
        data["design"]["buffer"] = 400.0
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(data))
        assert cli.main(["simulate", "--config", str(path), "--out", str(tmp_path / "o")]) == 1

    def test_sweep_rejected(self, tmp_path):
        assert cli.main(["simulate", "--config", "fig1_check", "--out", str(tmp_path)]) == 1

    def test_sample_round_trips_through_estimate(self, tmp_path, capsys):
        cli.main(["simulate", "--config", "csr_simulate", "--out", str(tmp_path)])
        capsys.readouterr()
        code = cli.main(["estimate", str(tmp_path / "sample.csv"), "--radius", "10",
                         "--estimator", "pollard_censored"])
        assert code == 0
        (row,) = _rows(capsys.readouterr().out)
        assert float(row["lambda_hat"]) == pytest.approx(0.05, rel=0.25)


class TestBenchmark:
    def test_dry_run_writes_nothing(self, tmp_path, capsys):
        out = tmp_path / "out"
        assert cli.main(["benchmark", "--config", "table1_row_csr050_l1", "--dry-run", "--out", str(out)]) == 0
        assert "200 cell(s)" in capsys.readouterr().out
        assert not out.exists()

    def test_sigma_sweep_scenarios(self, capsys):
        assert cli.main(["benchmark", "--config", "fig1_sigma_sweep", "--dry-run"]) == 0
        text = capsys.readouterr().out
        assert "30 scenario(s)" in text

    def test_missing_config_exit_1(self, tmp_path):
        assert cli.main(["benchmark", "--config", str(tmp_path / "none.json")]) == 1

    def test_manifest_rerun(self, tmp_path):
        data, _ = cli.load_config_json("table1_row_csr050_l1")
        data.update(n_patterns=1, n_designs_per_pattern=3,
                    window={"x_min": 0, "y_min": 0, "x_max": 150, "y_max": 150})
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(data))
        assert cli.main(["benchmark", "--config", str(path), "--out", str(tmp_path / "a")]) == 0
        manifest = tmp_path / "a" / "manifest.json"
        assert cli.main(["benchmark", "--config", str(manifest), "--out", str(tmp_path / "b")]) == 0
        for name in json.loads(manifest.read_text())["outputs"] + ["manifest.json"]:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


class TestDiagnose:
    def test_default_cell(self, capsys):
        assert cli.main(["diagnose"]) == 0
        (row,) = _rows(capsys.readouterr().out)
        assert row["dominance"] == "holds"
        assert float(row["bias_Mu"]) == pytest.approx(-15.927, abs=5e-3)

    def test_u_zero(self, capsys):
        assert cli.main(["diagnose", "--u", "0"]) == 0
        (row,) = _rows(capsys.readouterr().out)
        assert float(row["bias_Mu"]) == 0.0 and float(row["bias_E"]) == 0.0
        assert float(row["delta1"]) == 0.0

    def test_k_below_one_skipped(self, capsys):
        assert cli.main(["diagnose", "--k", "0.8,2"]) == 0
        rows = _rows(capsys.readouterr().out)
        assert rows[0]["dominance"] == "skipped"
        assert "second-moment limit requires k>1" in rows[0]["note"]
        assert rows[1]["dominance"] == "holds"

    def test_grid_file(self, tmp_path):
        out = tmp_path / "d.csv"
        assert cli.main(["diagnose", "--config", "sm_subset_grid", "--out", str(out)]) == 0
        rows = _rows(out.read_text())
        assert len(rows) == 3 * 2 * 4 * 3 * 3
        assert all(math.isfinite(float(r["delta1"])) for r in rows)
