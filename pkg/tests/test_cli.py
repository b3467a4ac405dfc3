"""End-to-end tests of the workbench commands

Each test writes a small scenario to a temporary directory and runs the
command in-process through main().

Usage:
    pytest tests/test_cli.py -v
"""

import json
import os
import sys

import pandas as pd
import pytest

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from mhdiffusion_bench.cli import main, parse_args


def _scenario(tmp_path, **overrides):
    data = {
        "name": "scalar",
        "network": {"node_count": 3, "edges": [[0, 1], [1, 2]], "undirected": True},
        "profiles": {
            "w_true": [1.0],
            "defaults": {"mu": 0.05},
            "nodes": [
                {"sigma_v2": 1.0, "R_u_diag": [1.0]},
                {"sigma_v2": 0.5, "R_u_diag": [1.0]},
                {"sigma_v2": 2.0, "R_u_diag": [1.0]},
            ],
        },
        "network_budget": 2.0,
        "strategies": [{"kind": "noncoop"}, {"kind": "atc"}, {"kind": "matc"}],
        "iterations": 150,
        "runs": 20,
        "seed": 1,
        "output_dir": str(tmp_path / "results"),
    }
    data.update(overrides)
    path = tmp_path / "scalar.json"
    path.write_text(json.dumps(data, indent=2))
    return str(path)


def _run(tmp_path, command, *flags, **overrides):
    return main([command, "--config", _scenario(tmp_path, **overrides), *flags])


def test_parse_args_budgets():
    args = parse_args(["tradeoff", "--config", "x.json", "--budgets", "0, 2 4"])
    assert args.budgets == [0.0, 2.0, 4.0]
    assert args.log_dir is None
    with pytest.raises(SystemExit):
        parse_args(["tradeoff", "--config", "x.json", "--budgets", "-1"])


def test_simulate_writes_traces_and_summary(tmp_path):
    assert _run(tmp_path, "simulate") == 0

    results = tmp_path / "results"
    for label in ("noncoop", "atc", "matc"):
        df = pd.read_csv(results / f"scalar_{label}_trace.csv")
        assert len(df) == 150
    assert "msd_db_theory" in pd.read_csv(results / "scalar_atc_trace.csv").columns
    summary = pd.read_csv(results / "scalar_summary.csv")
    assert list(summary["strategy"]) == ["noncoop", "atc", "matc"]
    assert (results / "scalar_summary.txt").exists()
    assert (results / "scalar_scenario.json").exists()


def test_cli_overrides_and_linear_output(tmp_path):
    out = tmp_path / "elsewhere"
    code = _run(tmp_path, "simulate", "--iters", "40", "--runs", "5", "--linear", "--out-dir", str(out),
                strategies=[{"kind": "atc"}])
    assert code == 0

    df = pd.read_csv(out / "scalar_atc_trace.csv")
    assert len(df) == 40
    assert "msd_sim" in df.columns


def test_theory_command(tmp_path):
    assert _run(tmp_path, "theory", "--strategy", "atc") == 0

    results = tmp_path / "results"
    assert len(pd.read_csv(results / "scalar_theory.csv")) == 150
    text = (results / "scalar_theory.txt").read_text()
    assert "Weights: atc" in text
    assert "beta:" in text


def test_theory_rejects_adaptive_strategy(tmp_path):
    code = _run(tmp_path, "theory", "--strategy", "catc", strategies=[{"kind": "atc"}, {"kind": "catc"}])
    assert code == 3


def test_optimize_command(tmp_path):
    assert _run(tmp_path, "optimize") == 0

    data = json.loads((tmp_path / "results" / "scalar_plan_p3_exact.json").read_text())
    assert data["total_cost"] <= 2.0
    assert data["objective"] <= data["algorithm1_objective"] + 1e-9
    assert len(data["nodes"]) == 3


def test_tradeoff_command(tmp_path):
    assert _run(tmp_path, "tradeoff", "--budgets", "2,0", "--iters", "100", "--runs", "5") == 0

    df = pd.read_csv(tmp_path / "results" / "scalar_tradeoff.csv")
    assert list(df["budget"]) == [0.0, 2.0]
    assert df["objective"].iloc[1] <= df["objective"].iloc[0]
    assert df["broadcasts"].iloc[0] == 0


def test_compare_command(tmp_path):
    assert _run(tmp_path, "compare", "--iters", "100") == 0
    df = pd.read_csv(tmp_path / "results" / "scalar_compare.csv")
    assert list(df["strategy"]) == ["noncoop", "atc", "matc"]


def test_exit_code_for_bad_config(tmp_path):
    assert _run(tmp_path, "simulate", iterations=0) == 1
    assert main(["simulate", "--config", str(tmp_path / "missing.json")]) == 1


def test_exit_code_for_tradeoff_without_budgets(tmp_path):
    assert _run(tmp_path, "tradeoff") == 1


def test_exit_code_for_infeasible_plan(tmp_path):
    inline = {"nodes": [
        {"node": 0, "consults": [0], "relays": [0]},
        {"node": 1, "consults": [0, 1], "relays": []},
        {"node": 2, "consults": [0, 2], "relays": []},
    ]}
    assert _run(tmp_path, "simulate", strategies=[{"kind": "matc", "plan": inline}]) == 2


def test_exit_code_for_divergence(tmp_path):
    profiles = {
        "w_true": [1.0],
        "defaults": {"mu": 2.5},
        "nodes": [{"sigma_v2": 1.0, "R_u_diag": [1.0]}] * 3,
    }
    assert _run(tmp_path, "simulate", profiles=profiles, strategies=[{"kind": "noncoop"}]) == 3


if __name__ == "__main__":
    pytest.main([__file__, "-v", "--tb=short"])
