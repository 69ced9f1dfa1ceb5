import csv
import json
import subprocess
import sys

import pytest

from aoidiv.cli import cli_main


def run(tmp_path, *argv):
    return cli_main([*argv, "--out", str(tmp_path)])


def test_solve_writes_full_policy_map(tmp_path, capsys):
    assert run(tmp_path, "solve", "--config", "default") == 0
    rows = list(csv.DictReader(open(tmp_path / "policy_map.csv")))
    assert len(rows) == 630
    assert set(rows[0]) == {"battery", "aoi", "action"}
    assert "gain=" in capsys.readouterr().out


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("harvest_prob: 0.6\nn_sources: 3\n")
    assert run(tmp_path, "evaluate", "--config", str(cfg), "--policy", "aggressive",
               "--set", "battery_capacity=12", "--set", "cost_max=10") == 0
    d = json.loads((tmp_path / "evaluation.json").read_text())
    assert d["policy"] == "aggressive" and len(d["usage"]) == 4


def test_bad_config_exits_2(tmp_path, capsys):
    assert run(tmp_path, "solve", "--set", "harvest_prob=1.2") == 2
    assert "harvest_prob" in capsys.readouterr().err
    bad = tmp_path / "bad.yaml"
    bad.write_text("n_sources: 30\n")
    assert run(tmp_path, "solve", "--config", str(bad)) == 2
    assert run(tmp_path, "evaluate", "--policy", "nonsense") == 2


def test_non_convergence_exits_3(tmp_path, capsys):
    assert run(tmp_path, "solve", "--set", "vi_max_iter=3", "--set", "vi_epsilon=1e-12") == 3
    assert "numeric error" in capsys.readouterr().err


def test_unknown_command_exits_1(tmp_path):
    with pytest.raises(SystemExit) as exc:
        cli_main(["bogus"])
    assert exc.value.code == 1


def test_compare_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["compare", "--seed", "7", "-T", "200", "-M", "20"]
    assert cli_main([*args, "--out", str(a)]) == 0
    assert cli_main([*args, "--out", str(b)]) == 0
    assert (a / "comparison.json").read_bytes() == (b / "comparison.json").read_bytes()
    d = json.loads((a / "comparison.json").read_text())
    assert d["optimal"]["seed"] == 7 and 0 < d["efficiency"] <= 1.2


def test_simulate_csv(tmp_path):
    assert run(tmp_path, "simulate", "--policy", "source-2", "-T", "50", "-M", "3", "--format", "csv") == 0
    (row,) = csv.DictReader(open(tmp_path / "metrics.csv"))
    assert row["policy"] == "source-2" and row["T"] == "50"


def test_sweeps(tmp_path):
    small = ["--set", "aoi_cap=20", "--lambdas", "0.3,0.7"]
    assert run(tmp_path, "sweep-lambda", "--exact-only", *small) == 0
    rows = list(csv.DictReader(open(tmp_path / "sweep_lambda.csv")))
    assert len(rows) == 4 and {r["method"] for r in rows} == {"exact"}
    assert {"fingerprint", "lambda", "policy", "avg_aoi", "stderr", "energy", "seed"} <= set(rows[0])
    assert run(tmp_path, "sweep-lambda", "-T", "20", "-M", "2", "--shapes", "linear:sublinear,sublinear:linear",
               *small) == 0
    rows = list(csv.DictReader(open(tmp_path / "sweep_lambda.csv")))
    assert len(rows) == 16 and {r["age_shape"] for r in rows} == {"linear", "sublinear"}
    assert run(tmp_path, "sweep-cost", "--exact-only", *small) == 2
    assert run(tmp_path, "sweep-cost", "--exact-only", "--overflow", "drop", *small) == 0
    rows = list(csv.DictReader(open(tmp_path / "sweep_cost.csv")))
    assert {r["scale"] for r in rows} == {"1.0", "1.5"} and len(rows) == 8
    assert run(tmp_path, "sweep-single", "--costs", "1,5", *small) == 0
    assert run(tmp_path, "sweep-size", "--sizes", "1,2,4", "--policies", "aggressive", *small) == 0
    assert len(list(csv.DictReader(open(tmp_path / "sweep_size.csv")))) == 6


def test_shape_grid(tmp_path):
    assert run(tmp_path, "shape-grid", "--lambdas", "0.4", "--set", "aoi_cap=20") == 0
    index = list(csv.DictReader(open(tmp_path / "shape_grid.csv")))
    assert len(index) == 9
    assert all((tmp_path / "shape_grid" / r["file"]).exists() for r in index)


def test_dump_model(tmp_path):
    assert run(tmp_path, "dump-model", "--set", "battery_capacity=5", "--set", "cost_max=5",
               "--set", "n_sources=2") == 0
    rows = list(csv.DictReader(open(tmp_path / "model.csv")))
    assert rows and set(rows[0]) == {"b", "aoi", "action", "next_b", "next_aoi", "prob"}


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "aoidiv", "dump-model", "--set", "battery_capacity=3",
                          "--set", "cost_max=3", "--set", "n_sources=1", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert out.returncode == 0 and "dump-model" in out.stdout
