import csv

import numpy as np
import pytest

from adaptive_ilg import cli


def read_rows(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def test_usage_errors(capsys):
    assert cli.main([]) == 2
    assert cli.main(["run", "--problem", "smooth"]) == 2
    assert cli.main(["run", "--problem", "nope", "--scheme", "kacanov", "--out", "x"]) == 2
    assert cli.main(["experiment", "--name", "fig9z"]) == 2
    assert cli.main(["run", "--problem", "smooth", "--scheme", "kacanov", "--max-elements", "-5", "--out", "x"]) == 2
    assert "usage" in capsys.readouterr().err


def test_help_exits_cleanly(capsys):
    assert cli.main(["--help"]) == 0
    assert "experiment" in capsys.readouterr().out


def test_invalid_parameters_are_usage_errors(tmp_path, capsys):
    args = ["run", "--problem", "smooth", "--scheme", "kacanov", "--theta", "2", "--out", str(tmp_path)]
    assert cli.main(args) == 2
    assert "theta" in capsys.readouterr().err


def test_run_writes_outputs(tmp_path, capsys):
    out = tmp_path / "run"
    args = ["run", "--problem", "smooth", "--scheme", "kacanov", "--lambda", "0.5", "--theta", "0.5",
            "--max-elements", "50000", "--out", str(out)]
    assert cli.main(args) == 0
    header, data = read_rows(out / "record.csv")
    assert header == ["level", "n_elements", "n_dofs", "iterations", "estimator", "h1_error", "energy"]
    assert np.all(np.isfinite(data))
    assert np.all(np.diff(data[:, 1]) > 0)
    assert np.all(np.diff(data[:, 4]) < 0)
    assert data[-1, 1] <= 50000
    for name in ("convergence.svg", "iterations.svg"):
        text = (out / name).read_text()
        assert "<svg" in text and 'version="1.1"' in text
    assert "budget" in capsys.readouterr().out

    again = tmp_path / "again"
    assert cli.main(args[:-1] + [str(again)]) == 0
    for name in ("record.csv", "convergence.svg", "iterations.svg"):
        assert (out / name).read_bytes() == (again / name).read_bytes()
    assert not list(out.glob("*.tmp"))


def test_run_with_explicit_delta(tmp_path):
    out = tmp_path / "z"
    assert cli.main(["run", "--problem", "singular", "--scheme", "zarantonello", "--delta", "0.4",
                     "--max-elements", "1500", "--out", str(out)]) == 0
    _, data = read_rows(out / "record.csv")
    assert data[-1, 1] <= 1500


def test_presets():
    assert set(cli.PRESETS) == {f"fig{i}{s}" for i in range(1, 5) for s in "ab"}
    p = cli.PRESETS["fig1b"]
    assert (p.problem, p.lam, p.theta, p.max_elements) == ("smooth", 0.5, 0.0, 200_000)
    p = cli.PRESETS["fig4b"]
    assert (p.problem, p.lam, p.theta) == ("singular", 0.001, 0.5)
    deltas = {s.kind: s.delta for s in cli.PRESETS["fig3a"].schemes()}
    assert deltas["zarantonello"] == 0.5 and deltas["newton"] == 1.0
    assert {s.kind: s.delta for s in cli.PRESETS["fig2a"].schemes()}["zarantonello"] == 0.85


def test_experiment_fig2b_orders_schemes(tmp_path):
    out = tmp_path / "fig2b"
    assert cli.main(["experiment", "--name", "fig2b", "--max-elements", "8000", "--out", str(out)]) == 0
    its = {}
    for kind in ("zarantonello", "kacanov", "newton"):
        _, data = read_rows(out / f"{kind}.csv")
        its[kind] = data[:, 3]
    n = min(len(v) for v in its.values())
    ordered = (its["newton"][:n] <= its["kacanov"][:n]) & (its["kacanov"][:n] <= its["zarantonello"][:n])
    assert ordered.mean() >= 0.7
    assert (out / "iterations.svg").exists() and (out / "convergence.svg").exists()


def test_verify_quick_exit_status(capsys):
    assert cli.main(["verify", "--quick"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out
    assert "checks passed" in out


def test_verify_failure_exit_status(monkeypatch, capsys):
    from adaptive_ilg import verify
    monkeypatch.setattr(verify, "run_suite", lambda quick, seed: [verify.CheckReport("x", 1, 2, False)])
    assert cli.main(["verify", "--quick"]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_aborted_run_exit_status(tmp_path, capsys):
    args = ["run", "--problem", "smooth", "--scheme", "zarantonello", "--lambda", "1e-9",
            "--max-steps-per-level", "2", "--out", str(tmp_path)]
    assert cli.main(args) == 1
    assert "aborted" in capsys.readouterr().err
