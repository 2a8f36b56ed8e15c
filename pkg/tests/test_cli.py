import json

import pytest

from gaussrep.cli import EXIT_OK, EXIT_TOLERANCE, EXIT_WINDOW, main


def run(tmp_path, name, *args):
    out = tmp_path / name
    code = main([*args, "--out", str(out)])
    summary = out / "summary.json"
    return code, (json.loads(summary.read_text()) if summary.exists() else None), out


def test_simulate_is_deterministic(tmp_path):
    args = ["simulate", "--seed", "5", "--paths", "3", "--grid", "64"]
    c1, _, o1 = run(tmp_path, "a", *args)
    c2, _, o2 = run(tmp_path, "b", *args)
    assert c1 == c2 == EXIT_OK
    assert (o1 / "paths.csv").read_bytes() == (o2 / "paths.csv").read_bytes()


def test_seed_is_mandatory(tmp_path):
    code, summary, _ = run(tmp_path, "a", "simulate", "--paths", "2")
    assert code == EXIT_WINDOW and summary is None


def test_config_file(tmp_path):
    cfg = tmp_path / "run.yaml"
    cfg.write_text("seed: 9\npaths: 2\ngrid: {T: 1.0, N: 32}\nmodel: {name: stationary_exp, exponent: 0.6}\n")
    code, summary, _ = run(tmp_path, "a", "simulate", "--config", str(cfg))
    assert code == EXIT_OK
    assert summary["seed"] == 9 and summary["config"]["model"]["name"] == "stationary_exp"
    assert summary["result"]["model"].startswith("stationary_exp")


def test_check_class_reports_brownian_failure(tmp_path):
    code, summary, _ = run(tmp_path, "a", "check-class", "--seed", "0", "--H", "0.5", "--grid", "256")
    assert code == EXIT_OK and summary["passed"] is None
    assert summary["result"]["report"]["holder_bound"] is False


def test_window_violation(tmp_path):
    code, _, _ = run(tmp_path, "a", "replicate-holder", "--seed", "0", "--a", "0.2", "--paths", "1", "--grid", "64")
    assert code == EXIT_WINDOW


def test_unknown_model(tmp_path):
    cfg = tmp_path / "run.yaml"
    cfg.write_text("seed: 1\nmodel: {name: nope}\n")
    code, _, _ = run(tmp_path, "a", "simulate", "--config", str(cfg))
    assert code == EXIT_WINDOW


def test_frac_oracle(tmp_path):
    code, summary, out = run(tmp_path, "a", "frac-oracle", "--seed", "0")
    assert code == EXIT_OK and summary["passed"] is True
    assert (out / "frac_oracle.csv").exists()


def test_ito_check(tmp_path):
    code, summary, _ = run(tmp_path, "a", "ito-check", "--seed", "1", "--paths", "5", "--grid", "512", "--rule", "power_sign")
    assert code == EXIT_OK
    assert summary["result"]["rule"] == "power_sign"


def test_replicate_dist_summary(tmp_path):
    code, summary, out = run(tmp_path, "a", "replicate-dist", "--seed", "2", "--paths", "50", "--grid", "512")
    assert code in (EXIT_OK, EXIT_TOLERANCE)
    assert set(summary) == {"command", "config", "seed", "runtime_s", "passed", "result"}
    assert set(summary["result"]) >= {"ks_D", "ks_p", "success_rate"}
    assert (code == EXIT_OK) == summary["passed"]
    assert (out / "replicated.csv").exists()


@pytest.mark.parametrize("command", ["verify-crossing", "demo-zero-integral", "replicate-rv", "check-smallball-conditions"])
def test_other_commands_run(tmp_path, command):
    code, summary, _ = run(tmp_path, "a", command, "--seed", "3", "--paths", "4", "--grid", "256")
    assert code in (EXIT_OK, EXIT_TOLERANCE)
    assert summary["command"] == command
