import csv
import os
import subprocess
import sys

import numpy as np
import pytest

from sde_identify.cli import parse_config
from sde_identify.errors import ConfigError, InvalidParam, IoError
from sde_identify.reports import emit_plot, summarize, write_csv


def run_cli(*args, cwd=None):
    return subprocess.run([sys.executable, "-m", "sde_identify.cli", *args],
                          capture_output=True, text=True, cwd=cwd)


# ----------------------------------------------------------------------
# reports


def test_write_csv_roundtrip(tmp_path):
    path = str(tmp_path / "sub" / "out.csv")
    rows = [dict(a=1, b="x"), dict(a=2, b="y")]
    write_csv(path, ["a", "b"], rows)
    got = list(csv.DictReader(open(path)))
    assert got == [{"a": "1", "b": "x"}, {"a": "2", "b": "y"}]


def test_summarize_groups_and_stats():
    rows = [dict(k=2, v=1.0), dict(k=2, v=3.0), dict(k=4, v=5.0)]
    out = summarize(rows, ["k"], ["v"])
    assert out[0]["k"] == 2 and out[1]["k"] == 4
    assert out[0]["v"].startswith("2 ±")          # mean 2, std sqrt(2)
    assert out[1]["v"] == "5 ± 0"                 # single row -> std 0


def test_summarize_empty_group_keys():
    out = summarize([dict(v=1.0), dict(v=2.0)], [], ["v"])
    assert len(out) == 1 and out[0]["v"].startswith("1.5")


def test_emit_plot_deterministic_bytes(tmp_path):
    series = [("run", [1, 2, 3], [0.1, 0.2, 0.15], [0.01, 0.02, 0.01])]
    p1 = str(tmp_path / "a.svg")
    p2 = str(tmp_path / "b.svg")
    emit_plot(series, p1, xlabel="k", ylabel="err", title="demo")
    emit_plot(series, p2, xlabel="k", ylabel="err", title="demo")
    b1, b2 = open(p1, "rb").read(), open(p2, "rb").read()
    assert b1 == b2
    assert b"<svg" in b1 and b"demo" in b1


def test_emit_plot_validation(tmp_path):
    with pytest.raises(InvalidParam):
        emit_plot([], str(tmp_path / "x.svg"))
    with pytest.raises(InvalidParam):
        emit_plot([("s", [1, 2], [1.0], None)], str(tmp_path / "x.svg"))
    with pytest.raises(InvalidParam):
        emit_plot([("s", [], [], None)], str(tmp_path / "x.svg"))


# ----------------------------------------------------------------------
# config parsing


def test_parse_config(tmp_path):
    p = tmp_path / "cfg.txt"
    p.write_text("# comment\n[experiment]\nname = grn\nseeds = 0 1\n"
                 "\n[params]\nn_genes = 12  # trailing comment\n")
    cfg = parse_config(str(p))
    assert cfg["experiment"]["name"] == "grn"
    assert cfg["experiment"]["seeds"] == "0 1"
    assert cfg["params"]["n_genes"] == "12"


def test_parse_config_errors(tmp_path):
    with pytest.raises(IoError):
        parse_config(str(tmp_path / "missing.txt"))
    p = tmp_path / "bad.txt"
    p.write_text("name = linear-recovery\n")
    with pytest.raises(ConfigError) as e:
        parse_config(str(p))
    assert ":1:" in str(e.value)
    p.write_text("[experiment]\njust a stray line\n")
    with pytest.raises(ConfigError) as e:
        parse_config(str(p))
    assert ":2:" in str(e.value)


# ----------------------------------------------------------------------
# CLI end to end (small budgets)


def test_cli_run_counterexamples(tmp_path):
    cfg = tmp_path / "cfg.txt"
    cfg.write_text("[experiment]\nname = counterexamples\nseeds = 0 1\n"
                   "[params]\nn = 6\nr = 4\n"
                   f"[output]\ndir = {tmp_path}/out\n")
    res = run_cli("run", str(cfg))
    assert res.returncode == 0, res.stderr
    rows = list(csv.DictReader(open(tmp_path / "out" / "results.csv")))
    assert len(rows) == 6  # 3 cases x 2 seeds
    assert all(r["passed"] == "True" for r in rows)
    cert_text = open(tmp_path / "out" / "certificates.txt").read()
    assert "[PASS]" in cert_text
    assert (tmp_path / "out" / "summary.csv").exists()


def test_cli_run_rejects_unknown_experiment(tmp_path):
    cfg = tmp_path / "cfg.txt"
    cfg.write_text("[experiment]\nname = nope\n")
    res = run_cli("run", str(cfg))
    assert res.returncode == 2
    assert "error:" in res.stderr


def test_cli_run_linear_recovery_writes_plot(tmp_path):
    cfg = tmp_path / "cfg.txt"
    cfg.write_text("[experiment]\nname = linear-recovery\nseeds = 0\n"
                   "[params]\nn = 6\nr = 2\nks = 1 2\nrestarts = 2\n"
                   "iters = 200\n")
    res = run_cli("run", str(cfg), "--output-dir", str(tmp_path / "out"))
    assert res.returncode == 0, res.stderr
    svg = tmp_path / "out" / "plots" / "linear-recovery.svg"
    assert svg.exists() and b"<svg" in svg.read_bytes()
    rows = list(csv.DictReader(open(tmp_path / "out" / "results.csv")))
    assert {r["k"] for r in rows} == {"1", "2"}


def test_cli_certify_exit_codes(tmp_path):
    res = run_cli("certify", "--case", "adversarial", "--n", "6", "--r", "4",
                  "--output-dir", str(tmp_path / "c"))
    assert res.returncode == 0, res.stderr
    assert "[PASS]" in res.stdout
    assert (tmp_path / "c" / "certificates.txt").exists()
    # invalid geometry surfaces as exit 2 (no free direction left)
    res = run_cli("certify", "--case", "ode", "--n", "4", "--r", "4")
    assert res.returncode == 2


def test_cli_simulate_roundtrip(tmp_path):
    from sde_identify.models import LinearDrift, drift_to_text

    d = LinearDrift(np.zeros((2, 1)), np.zeros((1, 2)), np.ones(2))
    drift_file = tmp_path / "drift.txt"
    drift_file.write_text(drift_to_text(d))
    out = tmp_path / "samples.csv"
    res = run_cli("simulate", "--drift-file", str(drift_file),
                  "--epsilon", "0.5", "--shift", "1.0 0.0",
                  "--burnin", "20", "--thinning", "20",
                  "--n-samples", "400", "--output", str(out))
    assert res.returncode == 0, res.stderr
    rows = np.array([[float(r["x0"]), float(r["x1"])]
                     for r in csv.DictReader(open(out))])
    assert rows.shape == (400, 2)
    # OU with c = e_0: stationary mean is exactly c (samples at this
    # thinning are still correlated, so the tolerance is loose)
    assert abs(rows[:, 0].mean() - 1.0) < 0.2
    assert abs(rows[:, 1].mean()) < 0.2


def test_cli_simulate_bad_shift(tmp_path):
    from sde_identify.models import LinearDrift, drift_to_text

    d = LinearDrift(np.zeros((2, 1)), np.zeros((1, 2)), np.ones(2))
    drift_file = tmp_path / "drift.txt"
    drift_file.write_text(drift_to_text(d))
    res = run_cli("simulate", "--drift-file", str(drift_file),
                  "--shift", "1.0 2.0 3.0")
    assert res.returncode == 2
