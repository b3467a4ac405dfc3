"""Unit tests for result files

Usage:
    pytest tests/test_reporting.py -v
"""

import json
import os
import sys

import numpy as np
import pandas as pd
import pytest

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from mhdiffusion.core.msdtheory import MsdBounds, MsdTrace
from mhdiffusion.core.optimizer import one_hop_selection
from mhdiffusion_bench.reporting import WorkbenchReporter, summarize_trace
from tests.oracles import chain


def _geometric_trace(label="atc", iterations=300):
    msd = 0.01 + 0.99 * 0.95 ** np.arange(iterations)
    return MsdTrace(msd=msd, energy=np.full(iterations, 3.0), label=label, runs=10)


def test_summarize_trace():
    row = summarize_trace(_geometric_trace(), steady_theory=0.01)

    assert row["strategy"] == "atc"
    assert row["steady_msd_theory"] == 0.01
    assert row["convergence_rate"] > 0
    assert row["iterations_to_90"] > 0
    assert row["energy_per_iteration"] == pytest.approx(3.0)
    assert row["total_energy"] == pytest.approx(900.0)


def test_summarize_unconverged_trace_gives_nan():
    row = summarize_trace(MsdTrace(msd=np.ones(50), label="flat"))

    assert np.isnan(row["convergence_rate"])
    assert np.isnan(row["energy_to_90"])
    assert row["iterations_to_90"] == -1
    assert np.isnan(row["steady_msd_theory"])


def test_trace_columns_db_and_linear(tmp_path):
    trace = _geometric_trace()
    theory = MsdTrace(msd=trace.msd, label="atc_theory")

    path = WorkbenchReporter(str(tmp_path / "db")).save_trace("demo", trace, theory)
    df = pd.read_csv(path)
    assert path.name == "demo_atc_trace.csv"
    assert list(df.columns) == ["iteration", "msd_db_sim", "msd_db_theory", "energy_cum"]
    assert df["msd_db_sim"].iloc[0] == pytest.approx(0.0, abs=1e-8)
    assert df["energy_cum"].iloc[-1] == pytest.approx(900.0)

    path = WorkbenchReporter(str(tmp_path / "lin"), linear=True).save_trace("demo", trace)
    df = pd.read_csv(path)
    assert list(df.columns) == ["iteration", "msd_sim", "energy_cum"]
    assert df["msd_sim"].iloc[0] == pytest.approx(1.0)


def test_summary_files(tmp_path):
    reporter = WorkbenchReporter(str(tmp_path))
    rows = [summarize_trace(_geometric_trace("atc"), steady_theory=0.01),
            summarize_trace(MsdTrace(msd=np.ones(50), label="flat"))]
    paths = reporter.save_summary("demo", rows, {"Scenario": "demo"})

    df = pd.read_csv(paths["summary_csv"])
    assert "steady_msd_db_sim" in df.columns
    assert df.loc[0, "steady_msd_db_theory"] == pytest.approx(-20.0)
    text = paths["summary_txt"].read_text()
    assert "SIMULATION SUMMARY" in text
    assert "Scenario: demo" in text
    assert "n/a" in text


def test_tradeoff_rows_sorted_by_budget(tmp_path):
    rows = [
        {"budget": 4.0, "broadcasts": 4, "total_cost": 4.0, "objective": 1.0, "steady_msd": 0.01,
         "steady_msd_db": -20.0, "convergence_rate": 0.1},
        {"budget": 0.0, "broadcasts": 0, "total_cost": 0.0, "objective": 3.0, "steady_msd": 0.1,
         "steady_msd_db": -10.0, "convergence_rate": 0.05},
    ]
    df = pd.read_csv(WorkbenchReporter(str(tmp_path)).save_tradeoff("demo", rows))

    assert list(df["budget"]) == [0.0, 4.0]
    assert list(df.columns) == ["budget", "broadcasts", "total_cost", "objective", "steady_msd_db",
                                "convergence_rate"]
    assert list(df["steady_msd_db"]) == pytest.approx([-10.0, -20.0])


def test_plan_and_theory_files(tmp_path):
    reporter = WorkbenchReporter(str(tmp_path))
    plan = one_hop_selection(chain(3), np.ones(3))
    plan.variant = "p3"

    path = reporter.save_plan("demo", plan, {"alpha": 0.9})
    assert path.name == "demo_plan_p3_one_hop.json"
    data = json.loads(path.read_text())
    assert data["alpha"] == 0.9
    assert data["nodes"][1]["consults"] == [0, 1, 2]

    bounds = MsdBounds(msd_bar=0.1, msd_a=0.2, msd_b=0.3, r1=0.9, r2=0.01)
    trace = MsdTrace(msd=np.array([1.0, 0.1]), label="theory")
    paths = reporter.save_theory("demo", trace, 0.05, bounds, beta=0.1, alpha=1 / 1.1, strategy="atc")
    assert list(pd.read_csv(paths["theory_csv"]).columns) == ["iteration", "msd_db_theory"]
    text = paths["theory_txt"].read_text()
    assert "Weights: atc" in text
    assert "UPPER BOUNDS" in text


if __name__ == "__main__":
    pytest.main([__file__, "-v", "--tb=short"])
