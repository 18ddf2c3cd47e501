import json
import subprocess
import sys

import pytest

from ledplab.cli import main
from ledplab.graphs import complete_graph, save_graph


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    save_graph(complete_graph(4), tmp_path / "k4.txt")
    return tmp_path


def run_cli(*argv) -> int:
    return main([str(a) for a in argv])


def test_estimate_byte_identical_runs(workdir, capsys):
    args = ["estimate", "--graph", "k4.txt", "--eps", "1", "--trials", "1000", "--seed", "7"]
    assert run_cli(*args, "--output", "a.json") == 0
    assert run_cli(*args, "--output", "b.json") == 0
    assert (workdir / "a.json").read_bytes() == (workdir / "b.json").read_bytes()
    payload = json.loads((workdir / "a.json").read_text())
    assert payload["trials"] == 1000
    assert payload["seed"] == 7
    assert payload["version"]
    assert len(payload["estimates"]) == 1000


def test_estimate_workers_invariant(workdir):
    base = ["estimate", "--graph", "k4.txt", "--eps", "1", "--trials", "9000", "--seed", "3"]
    assert run_cli(*base, "--workers", "1", "--output", "w1.json") == 0
    assert run_cli(*base, "--workers", "4", "--output", "w4.json") == 0
    assert (workdir / "w1.json").read_bytes() == (workdir / "w4.json").read_bytes()


def test_estimate_csv_and_transcript(workdir):
    assert run_cli("estimate", "--graph", "k4.txt", "--eps", "1", "--trials", "5",
                   "--format", "csv", "--output", "e.csv") == 0
    lines = (workdir / "e.csv").read_text().split("\n")
    assert lines[0] == "trial,t_hat"
    assert len(lines) == 7  # header + 5 rows + trailing newline
    assert run_cli("estimate", "--graph", "k4.txt", "--eps", "1", "--trials", "1",
                   "--transcript", "--output", "t.json") == 0
    payload = json.loads((workdir / "t.json").read_text())
    assert "invocations" in payload["transcript"]
    assert payload["transcript"]["ledger"]["epsilon_total"] == 1.0


def test_variance_sweep_deterministic_across_workers(workdir):
    base = ["variance-sweep", "--ns", "8", "--eps-grid", "0.5,1", "--trials", "1000", "--seed", "11"]
    assert run_cli(*base, "--workers", "1", "--output", "v1.csv") == 0
    assert run_cli(*base, "--workers", "4", "--output", "v4.csv") == 0
    assert (workdir / "v1.csv").read_bytes() == (workdir / "v4.csv").read_bytes()
    header = (workdir / "v1.csv").read_text().split("\n")[0]
    assert header == "n,epsilon,family,trials,t_exact,c4,var_empirical,var_oracle,ratio,seed"


def test_attack_subcommand_and_exit_codes(workdir):
    args = ["attack", "--mechanism", "identity", "--n", "4", "--k", "3000",
            "--seed", "5", "--search", "hillclimb", "--output", "ok.json"]
    assert run_cli(*args) == 0
    payload = json.loads((workdir / "ok.json").read_text())
    assert payload["feasible"] is True
    assert payload["hamming"] == 0
    assert set(payload["thresholds"]) == {"accuracy", "disagreement_budget", "catch"}
    # heavy noise at tiny epsilon cannot meet the disagreement budget
    fail = ["attack", "--mechanism", "rr", "--epsilon", "0.05", "--n", "4",
            "--k", "2000", "--seed", "5", "--search", "hillclimb", "--output", "fail.json"]
    assert run_cli(*fail) == 3
    payload = json.loads((workdir / "fail.json").read_text())
    assert payload["feasible"] is False
    assert payload["y_star"] is None


def test_attack_deterministic(workdir):
    args = ["attack", "--mechanism", "rr", "--epsilon", "1", "--n", "4",
            "--k", "2000", "--seed", "5", "--search", "hillclimb"]
    run_cli(*args, "--output", "r1.json")
    run_cli(*args, "--output", "r2.json")
    assert (workdir / "r1.json").read_bytes() == (workdir / "r2.json").read_bytes()


def test_anticoncentration_subcommand(workdir):
    base = ["anticoncentration", "--n", "5", "--count", "40", "--seed", "2"]
    assert run_cli(*base, "--workers", "1", "--output", "a1.csv") == 0
    assert run_cli(*base, "--workers", "4", "--output", "a4.csv") == 0
    assert (workdir / "a1.csv").read_bytes() == (workdir / "a4.csv").read_bytes()
    lines = (workdir / "a1.csv").read_text().split("\n")
    assert lines[0] == "n,m,gamma,threshold,tail_exact_or_mc,lemma_bound,fourth_moment,fourth_bound"
    assert len(lines) == 42


def test_gadget_subcommand_summary(workdir, capsys):
    assert run_cli("gadget", "--bits", "101", "--exact") == 0
    out = capsys.readouterr().out
    assert "T = 6, S = 2, n = 3" in out
    payload = json.loads((workdir / "gadget.json").read_text())
    assert payload["t_exact"] == 6
    assert payload["identity_holds"] is True


def test_sum_scaling_subcommand(workdir):
    base = ["sum-scaling", "--ns", "32,128", "--trials", "2000", "--seed", "4"]
    assert run_cli(*base, "--workers", "1", "--output", "s1.csv") == 0
    assert run_cli(*base, "--workers", "4", "--output", "s4.csv") == 0
    assert (workdir / "s1.csv").read_bytes() == (workdir / "s4.csv").read_bytes()
    header = (workdir / "s1.csv").read_text().split("\n")[0]
    assert header == (
        "n,epsilon,trials,mean_abs_error_baseline,mean_abs_error_via_triangles,fitted_exponent"
    )


def test_selftest_passes(workdir, capsys):
    assert run_cli("selftest") == 0
    out = capsys.readouterr().out
    assert "11/11 checks passed" in out
    payload = json.loads((workdir / "selftest.json").read_text())
    assert payload["passed"] is True


def test_usage_errors_name_the_field(workdir, capsys):
    assert run_cli("estimate", "--graph", "k4.txt", "--eps", "-1") == 2
    assert "eps" in capsys.readouterr().err
    assert run_cli("estimate", "--eps", "1") == 2
    assert "graph" in capsys.readouterr().err
    assert run_cli("attack", "--gamma", "0.7") == 2
    assert "gamma" in capsys.readouterr().err
    assert run_cli("gadget", "--bits", "10x") == 2
    assert "bits" in capsys.readouterr().err
    assert run_cli("variance-sweep", "--trials", "50") == 2
    assert "trials" in capsys.readouterr().err


def test_config_file_with_flag_override(workdir):
    (workdir / "cfg.json").write_text(
        json.dumps({"graph": "k4.txt", "eps": 2.0, "trials": 50, "seed": 1})
    )
    assert run_cli("estimate", "--config", "cfg.json", "--trials", "20",
                   "--output", "c.json") == 0
    payload = json.loads((workdir / "c.json").read_text())
    assert payload["trials"] == 20  # flag wins
    assert payload["config"]["eps"] == 2.0
    assert run_cli("estimate", "--config", "missing.json") == 2
    (workdir / "bad.json").write_text(json.dumps({"graph": "k4.txt", "eps": 1, "bogus": 3}))
    assert run_cli("estimate", "--config", "bad.json") == 2


def test_workers_default_from_environment(workdir, monkeypatch):
    monkeypatch.setenv("LEDPLAB_WORKERS", "4")
    args = ["estimate", "--graph", "k4.txt", "--eps", "1", "--trials", "9000", "--seed", "3"]
    assert run_cli(*args, "--output", "env4.json") == 0
    monkeypatch.setenv("LEDPLAB_WORKERS", "not-a-number")
    assert run_cli(*args, "--output", "bad.json") == 2
    monkeypatch.delenv("LEDPLAB_WORKERS")
    assert run_cli(*args, "--output", "plain.json") == 0
    assert (workdir / "env4.json").read_bytes() == (workdir / "plain.json").read_bytes()


def test_module_entry_point(workdir):
    result = subprocess.run(
        [sys.executable, "-m", "ledplab.cli", "gadget", "--bits", "11", "--exact"],
        capture_output=True,
        text=True,
        cwd=workdir,
    )
    assert result.returncode == 0
    assert "T = 4, S = 2, n = 2" in result.stdout
