import json

import pytest

from weakfactor.cli import main


def run_cli(args):
    return main(list(args))


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        run_cli(["--version"])
    assert exc.value.code == 0
    assert "weakfactor" in capsys.readouterr().out


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        run_cli(["not-a-subcommand"])
    assert exc.value.code == 2


def test_entrywise_rate_deterministic_outputs(tmp_path):
    out1 = tmp_path / "a.csv"
    out2 = tmp_path / "b.csv"
    common = ["entrywise-rate", "--n", "50", "--T", "50", "--reps", "10",
              "--seed", "7"]
    assert run_cli(common + ["--out", str(out1), "--threads", "1"]) == 0
    assert run_cli(common + ["--out", str(out2), "--threads", "4"]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    meta = json.loads((tmp_path / "a.csv.meta.json").read_text())
    assert meta["seed"] == 7
    assert meta["library_version"]
    assert meta["subcommand"] == "entrywise-rate"


def test_json_output_embeds_config(tmp_path):
    out = tmp_path / "cov.json"
    code = run_cli(["entrywise-coverage", "--n", "30", "--T", "30",
                    "--reps", "5", "--seed", "3", "--format", "json",
                    "--out", str(out)])
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["config"]["n"] == 30
    assert doc["library_version"]
    assert len(doc["summaries"]) == 4


def test_config_file_precedence(tmp_path, capsys):
    cfg = tmp_path / "cfg.ini"
    cfg.write_text("[common]\nreps = 4\nseed = 11\n\n[entrywise-coverage]\nc0 = 6.5\n")
    code = run_cli(["entrywise-coverage", "--config", str(cfg),
                    "--n", "30", "--T", "30", "--reps", "6"])
    assert code == 0
    out = capsys.readouterr().out
    # Flag beats config file; config file beats default.
    assert "R = 6" in out
    assert "C0 = 6.5" in out


def test_config_file_missing_and_bad_key(tmp_path):
    code = run_cli(["entrywise-rate", "--config", str(tmp_path / "absent.ini")])
    assert code == 2
    bad = tmp_path / "bad.ini"
    bad.write_text("[common]\nbogus_key = 1\n")
    assert run_cli(["entrywise-rate", "--config", str(bad)]) == 2


def test_experiment_failure_exit_code(tmp_path):
    # n = 1 cannot support the rank-one construction: every replication
    # errors, tripping the error-budget check.
    code = run_cli(["entrywise-rate", "--n", "1", "--T", "30", "--reps", "5"])
    assert code == 1


def test_lower_bound_check_prints_tv(tmp_path, capsys):
    out = tmp_path / "lb.json"
    code = run_cli(["lower-bound-check", "--reps", "100", "--seed", "2",
                    "--out", str(out)])
    assert code == 0
    text = capsys.readouterr().out
    assert "TV upper bound" in text
    doc = json.loads(out.read_text())
    assert doc["tv_upper"] <= 0.05
    assert doc["config"]["alpha"] == 0.05


def test_oracle_check_runs_small(tmp_path, capsys):
    out = tmp_path / "oracle.csv"
    code = run_cli(["oracle-check", "--reps", "2000", "--seed", "2",
                    "--out", str(out), "--format", "csv"])
    assert code == 0
    assert "KL" in capsys.readouterr().out
    rows = out.read_text().splitlines()
    assert rows[0] == "key,value"
    assert any(row.startswith("kl.exact") for row in rows)


def test_panel_rate_splits_outputs(tmp_path, capsys):
    out = tmp_path / "panel.csv"
    code = run_cli(["panel-rate", "--panel-config", "strong", "--reps", "3",
                    "--seed", "2", "--out", str(out)])
    assert code == 0
    assert (tmp_path / "panel-panel-rate-strong.csv").exists()
    assert "sqrt(nT) * RMSE" in capsys.readouterr().out


def test_adaptivity_demo_and_tradeoff_run(capsys):
    assert run_cli(["adaptivity-demo", "--n", "30", "--T", "30",
                    "--reps", "5", "--seed", "2"]) == 0
    assert "alternative-arm coverage" in capsys.readouterr().out
    assert run_cli(["panel-tradeoff", "--n", "20", "--T", "20",
                    "--reps", "3", "--seed", "2"]) == 0
    assert "coverage bound" in capsys.readouterr().out


def test_threads_env_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("WEAKFACTOR_THREADS", "2")
    out1 = tmp_path / "env.csv"
    assert run_cli(["entrywise-rate", "--n", "40", "--T", "40", "--reps", "4",
                    "--seed", "5", "--out", str(out1)]) == 0
    meta = json.loads((tmp_path / "env.csv.meta.json").read_text())
    assert meta["threads"] == 2
