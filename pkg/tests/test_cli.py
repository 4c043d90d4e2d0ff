"""CLI plumbing: outputs, config handling, exit codes, determinism."""

import csv
import subprocess
import sys

import numpy as np
import pytest

from pncem import cli


def _read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def test_simulate_writes_deterministic_files(tmp_path):
    args = ["simulate", "--n", "50", "--replicates", "2", "--seed", "9",
            "--phi-list", "0.5", "--sigma-eta-sq-list", "0.1",
            "--out", str(tmp_path / "a")]
    assert cli.main(args) == 0
    files = sorted((tmp_path / "a").glob("*.csv"))
    assert len(files) == 2
    header, rows = _read_csv(files[0])
    assert header == ["y"] and len(rows) == 50

    assert cli.main(["simulate", "--n", "50", "--replicates", "2", "--seed", "9",
                     "--phi-list", "0.5", "--sigma-eta-sq-list", "0.1",
                     "--out", str(tmp_path / "b")]) == 0
    for f1, f2 in zip(files, sorted((tmp_path / "b").glob("*.csv"))):
        assert f1.read_bytes() == f2.read_bytes()


def test_table1_small_run(tmp_path, capsys):
    args = ["table1", "--n", "200", "--replicates", "2", "--seed", "3",
            "--phi-list", "0.5", "--sigma-eta-sq-list", "0.1", "1.0",
            "--out", str(tmp_path)]
    assert cli.main(args) == 0
    header, rows = _read_csv(tmp_path / "table1_long.csv")
    assert header == list(cli.RESULT_COLUMNS)
    assert len(rows) == 2 * 3 * 2  # settings x schemes x replicates
    partial = [r for r in rows if r[2] == "partial"]
    assert all(int(r[4]) <= 2 for r in partial)
    assert all(r[-1] == "" for r in rows)
    agg_header, agg_rows = _read_csv(tmp_path / "table1_agg.csv")
    assert agg_header == list(cli.AGG_COLUMNS)
    assert len(agg_rows) == 2 * 3
    assert "mean_iterations" in capsys.readouterr().out


def test_table2_and_table3_smoke(tmp_path):
    common = ["--n", "150", "--replicates", "1", "--seed", "5",
              "--phi-list", "0.1", "--sigma-eta-sq-list", "0.1",
              "--out", str(tmp_path)]
    assert cli.main(["table2"] + common) == 0
    assert cli.main(["table3"] + common) == 0
    _, rows2 = _read_csv(tmp_path / "table2_long.csv")
    assert {r[2] for r in rows2} == set(cli.TABLE2_SCHEMES)
    _, rows3 = _read_csv(tmp_path / "table3_long.csv")
    assert {r[2] for r in rows3} == set(cli.TABLE3_SCHEMES)
    for row in rows3:  # all four estimates populated
        assert all(row[k] for k in (6, 7, 8, 9))


def test_scheme_flag_subsets_runs(tmp_path):
    args = ["table1", "--n", "100", "--replicates", "1", "--seed", "2",
            "--phi-list", "0.5", "--sigma-eta-sq-list", "0.1",
            "--scheme", "partial,centered", "--out", str(tmp_path)]
    assert cli.main(args) == 0
    _, rows = _read_csv(tmp_path / "table1_long.csv")
    assert {r[2] for r in rows} == {"partial", "centered"}


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text(
        "n = 120\nreplicates = 1\nseed = 7\nphi_list = 0.5\n"
        "sigma_eta_sq_list = 0.1\n# comment line\nout = {}\n".format(tmp_path / "c1")
    )
    assert cli.main(["table1", "--config", str(cfg)]) == 0
    _, rows = _read_csv(tmp_path / "c1" / "table1_long.csv")
    assert len(rows) == 3

    # flags override the file: different seed changes the data
    assert cli.main(["table1", "--config", str(cfg), "--seed", "8",
                     "--out", str(tmp_path / "c2")]) == 0
    _, rows2 = _read_csv(tmp_path / "c2" / "table1_long.csv")
    assert rows[0][6] != rows2[0][6]


def test_config_errors_exit_1(tmp_path):
    assert cli.main(["table1", "--n", "1"]) == 1
    assert cli.main(["table1", "--config", str(tmp_path / "missing.cfg")]) == 1
    bad = tmp_path / "bad.cfg"
    bad.write_text("not a key value line\n")
    assert cli.main(["table1", "--config", str(bad)]) == 1
    bad.write_text("unknown_key = 3\n")
    assert cli.main(["table1", "--config", str(bad)]) == 1


def test_replicate_failure_recorded_and_strict_exit(tmp_path, monkeypatch):
    calls = {"count": 0}
    real = cli.em.algorithm1

    def flaky(*args, **kwargs):
        calls["count"] += 1
        if calls["count"] == 2:
            raise ArithmeticError("synthetic failure")
        return real(*args, **kwargs)

    monkeypatch.setattr(cli.em, "algorithm1", flaky)
    args = ["table1", "--n", "100", "--replicates", "2", "--seed", "4",
            "--phi-list", "0.5", "--sigma-eta-sq-list", "0.1",
            "--scheme", "partial", "--out", str(tmp_path)]
    assert cli.main(args) == 0  # failure recorded, run continues
    _, rows = _read_csv(tmp_path / "table1_long.csv")
    errors = [r[-1] for r in rows]
    assert sum(1 for e in errors if e) == 1

    calls["count"] = 0
    assert cli.main(args + ["--strict"]) == 2


def test_wopt_curve_output(tmp_path):
    args = ["wopt-curve", "--phi-list", "0.0", "-0.9",
            "--sigma-eta-sq-list", "0.01", "--seed", "1",
            "--out", str(tmp_path)]
    assert cli.main(args) == 0
    header, rows = _read_csv(tmp_path / "wopt_curve.csv")
    assert header == ["phi", "gamma", "t", "w_opt", "bound_low", "bound_high"]
    assert len(rows) == 2 * 10  # default curve length n=10
    for row in rows:
        w, lo, hi = float(row[3]), float(row[4]), float(row[5])
        assert lo - 1e-10 <= w <= hi + 1e-10
        if float(row[0]) == 0.0:
            gamma = float(row[1])
            assert w == pytest.approx(1 / (1 + gamma))
            assert lo == pytest.approx(w) and hi == pytest.approx(w)
    # negative-phi low-gamma rows exceed one
    assert max(float(r[3]) for r in rows if float(r[0]) == -0.9) > 1.0


def test_aopt_curve_output(tmp_path):
    args = ["aopt-curve", "--n", "400", "--replicates", "20",
            "--curve-points", "5", "--sigma-eta-sq-list", "0.1",
            "--phi-list", "0.5", "--seed", "11", "--out", str(tmp_path)]
    assert cli.main(args) == 0
    header, rows = _read_csv(tmp_path / "aopt_curve.csv")
    assert header == ["phi", "gamma", "mean_a_opt", "sd_a_opt", "frac_nonpos",
                      "a_hat"]
    assert len(rows) == 5
    phis = [float(r[0]) for r in rows]
    assert phis == sorted(phis)
    ahat = {round(float(r[0]), 6): float(r[5]) for r in rows}
    for phi, val in ahat.items():
        assert val == pytest.approx(ahat[round(-phi, 6)])


def test_rates_output(tmp_path):
    args = ["rates", "--n", "120", "--gibbs-draws", "3000",
            "--phi-list", "0.5", "--sigma-eta-sq-list", "0.1",
            "--seed", "3", "--out", str(tmp_path)]
    assert cli.main(args) == 0
    header, rows = _read_csv(tmp_path / "rates.csv")
    assert header == ["phi", "gamma", "w", "rate_formula", "rate_em_fd",
                      "rate_vb", "gibbs_lag1"]
    assert [r[2] for r in rows] == ["0", "1", "w_opt"]
    for row in rows:
        formula, em_fd, vb_rate = (float(row[k]) for k in (3, 4, 5))
        assert abs(formula - em_fd) < 1e-6
        assert abs(formula - vb_rate) < 1e-12


def test_aggregate_recomputable_from_long_csv(tmp_path):
    args = ["table1", "--n", "150", "--replicates", "3", "--seed", "12",
            "--phi-list", "0.5", "-0.5", "--sigma-eta-sq-list", "0.1",
            "--out", str(tmp_path)]
    assert cli.main(args) == 0
    _, long_rows = _read_csv(tmp_path / "table1_long.csv")
    parsed = []
    for row in long_rows:
        parsed.append([float(row[0]), float(row[1]), row[2], int(row[3]),
                       int(row[4]), row[5],
                       float(row[6]) if row[6] else None, None, None, None,
                       float(row[10]) if row[10] else None, row[11]])
    recomputed = cli.aggregate(parsed)
    _, agg_rows = _read_csv(tmp_path / "table1_agg.csv")
    assert len(recomputed) == len(agg_rows)
    for rec, written in zip(recomputed, agg_rows):
        assert rec[2] == written[2]
        assert float(written[4]) == pytest.approx(rec[4])
        assert float(written[5]) == pytest.approx(rec[5])


def test_workers_fan_out_matches_serial(tmp_path):
    base = ["table1", "--n", "80", "--replicates", "2", "--seed", "6",
            "--phi-list", "0.5", "--sigma-eta-sq-list", "0.1"]
    assert cli.main(base + ["--out", str(tmp_path / "serial")]) == 0
    assert cli.main(base + ["--workers", "2", "--out", str(tmp_path / "pool")]) == 0
    assert ((tmp_path / "serial" / "table1_long.csv").read_bytes()
            == (tmp_path / "pool" / "table1_long.csv").read_bytes())


def test_console_entry_point_runs(tmp_path):
    out = subprocess.run(
        [sys.executable, "-m", "pncem.cli", "wopt-curve",
         "--phi-list", "0.3", "--sigma-eta-sq-list", "0.1",
         "--out", str(tmp_path)],
        capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert (tmp_path / "wopt_curve.csv").exists()
