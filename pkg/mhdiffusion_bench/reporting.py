"""Results reporting and CSV export.

Provides the trace, summary, plan, trade-off, theory and comparison files
written by the workbench commands. File names carry no timestamps so that
reruns with the same seed overwrite byte-identical files.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from mhdiffusion.core.msdtheory import MsdBounds, MsdTrace, convergence_stats
from mhdiffusion.core.optimizer import NeighborSelection
from mhdiffusion.exceptions import NumericalError
from mhdiffusion.utils.helpers import format_db, to_db

FLOAT_FORMAT = "%.10g"


def summarize_trace(trace: MsdTrace, theory: Optional[MsdTrace] = None,
                    steady_theory: Optional[float] = None,
                    logger: Optional[logging.Logger] = None) -> Dict[str, Any]:
    """
    Summary figures of one simulated trace.

    Args:
        trace: Simulated trace
        theory: Theoretical transient trace of the same strategy, if any
        steady_theory: Theoretical steady-state MSD (linear), if any
        logger: Optional logger

    Returns:
        Row with strategy, steady state (sim / theory), convergence rate,
        iterations and energy to 90% convergence, energy per iteration
    """
    logger = logger or logging.getLogger(__name__)
    try:
        stats = convergence_stats(trace)
        rate, iterations, energy_90 = stats.rate_db, stats.iterations, stats.energy
    except NumericalError as e:
        logger.warning(f"{trace.label}: convergence metrics unavailable ({e})")
        rate, iterations, energy_90 = float("nan"), -1, float("nan")

    if steady_theory is None and theory is not None:
        steady_theory = theory.steady_state
    return {
        "strategy": trace.label,
        "steady_msd_sim": trace.steady_state,
        "steady_msd_theory": float("nan") if steady_theory is None else float(steady_theory),
        "convergence_rate": rate,
        "iterations_to_90": iterations,
        "energy_to_90": energy_90,
        "energy_per_iteration": float(np.mean(trace.energy)),
        "total_energy": float(trace.energy_cum[-1]),
    }


class WorkbenchReporter:
    """Generates reports and exports workbench results."""

    def __init__(self, output_dir: str = "./results", linear: bool = False,
                 logger: Optional[logging.Logger] = None):
        """Initialize reporter.

        Args:
            output_dir: Directory to save reports
            linear: Write MSD columns as linear values instead of dB
            logger: Optional logger
        """
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.linear = linear
        self.logger = logger or logging.getLogger(__name__)

    def _msd(self, column: str) -> str:
        """Column name of an MSD figure: '<x>_msd_db<y>' in dB mode, '<x>_msd<y>' in linear mode."""
        return column.replace("msd", "msd" if self.linear else "msd_db", 1)

    def _values(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        return values if self.linear else to_db(values)

    def _write_csv(self, df: pd.DataFrame, filename: str) -> Path:
        filepath = self.output_dir / filename
        df.to_csv(filepath, index=False, float_format=FLOAT_FORMAT)
        self.logger.info(f"Saved {filepath}")
        return filepath

    def save_trace(self, name: str, trace: MsdTrace, theory: Optional[MsdTrace] = None) -> Path:
        """Save one strategy trace: iteration, msd_sim, msd_theory (optional), energy_cum.

        Args:
            name: Scenario name
            trace: Simulated trace
            theory: Theoretical trace of the same length

        Returns:
            Path to saved CSV file
        """
        df = pd.DataFrame({"iteration": np.arange(trace.iterations)})
        df[self._msd("msd_sim")] = self._values(trace.msd)
        if theory is not None:
            df[self._msd("msd_theory")] = self._values(theory.msd)
        df["energy_cum"] = trace.energy_cum
        return self._write_csv(df, f"{name}_{trace.label}_trace.csv")

    def _summary_frame(self, rows: List[Dict[str, Any]]) -> pd.DataFrame:
        df = pd.DataFrame(rows)
        for column in ("steady_msd_sim", "steady_msd_theory", "steady_msd"):
            if column in df.columns:
                df[column] = self._values(df[column].to_numpy())
                df = df.rename(columns={column: self._msd(column)})
        return df

    def save_summary(self, name: str, rows: List[Dict[str, Any]],
                     header: Optional[Dict[str, Any]] = None) -> Dict[str, Path]:
        """Save the per-strategy summary as CSV and text.

        Args:
            name: Scenario name
            rows: Rows from summarize_trace
            header: Scenario facts printed above the table

        Returns:
            Dictionary mapping file type to file path
        """
        csv_path = self._write_csv(self._summary_frame(rows), f"{name}_summary.csv")
        txt_path = self.output_dir / f"{name}_summary.txt"
        with open(txt_path, "w") as f:
            f.write(self._summary_text("SIMULATION SUMMARY", rows, header))
        self.logger.info(f"Saved {txt_path}")
        return {"summary_csv": csv_path, "summary_txt": txt_path}

    def _summary_text(self, title: str, rows: List[Dict[str, Any]],
                      header: Optional[Dict[str, Any]] = None) -> str:
        lines = ["=" * 70, title, "=" * 70]
        for key, value in (header or {}).items():
            lines.append(f"{key}: {value}")
        lines.append("")
        lines.append(f"{'Strategy':<20s} {'Steady (sim)':>13s} {'Steady (thy)':>13s} "
                     f"{'Rate dB/it':>11s} {'E/iter':>9s}")
        lines.append("-" * 70)
        for row in rows:
            lines.append(
                f"{row['strategy']:<20s} {self._fmt(row['steady_msd_sim']):>13s} "
                f"{self._fmt(row['steady_msd_theory']):>13s} {row['convergence_rate']:>11.4f} "
                f"{row['energy_per_iteration']:>9.3f}"
            )
        lines.append("")
        lines.append("ENERGY TO 90% CONVERGENCE")
        lines.append("-" * 70)
        for row in rows:
            lines.append(f"{row['strategy']}: {row['energy_to_90']:.4g} "
                         f"({row['iterations_to_90']} iterations)")
        lines.append("=" * 70)
        return "\n".join(lines) + "\n"

    def _fmt(self, value: float) -> str:
        if value is None or np.isnan(value):
            return "n/a"
        return f"{value:.6g}" if self.linear else format_db(float(to_db(value)))

    def print_summary(self, rows: List[Dict[str, Any]], header: Optional[Dict[str, Any]] = None,
                      title: str = "SIMULATION SUMMARY"):
        """Print summary to console."""
        print("\n" + self._summary_text(title, rows, header))

    def save_plan(self, name: str, plan: NeighborSelection,
                  extra: Optional[Dict[str, Any]] = None) -> Path:
        """Save a plan file <name>_plan_<variant>_<method>.json.

        Args:
            name: Scenario name
            plan: Plan to save
            extra: Additional report fields (e.g. the rounding objective)

        Returns:
            Path to saved JSON file
        """
        data = plan.to_dict()
        data.update(extra or {})
        filepath = self.output_dir / f"{name}_plan_{plan.variant}_{plan.method}.json"
        with open(filepath, "w") as f:
            json.dump(data, f, indent=2)
        self.logger.info(f"Saved {filepath}")
        return filepath

    def print_plan(self, plan: NeighborSelection, extra: Optional[Dict[str, Any]] = None):
        """Print the plan ledger to console."""
        print("\n" + "=" * 70)
        print(f"PLAN ({plan.variant}, {plan.method})")
        print("=" * 70)
        print(f"Objective: {plan.objective_value:.10g}")
        if plan.lp_bound is not None:
            print(f"LP bound: {plan.lp_bound:.10g}")
        if plan.method == "exact":
            print(f"Nodes explored: {plan.nodes_explored}, LP solves: {plan.lp_solves}")
        for key, value in (extra or {}).items():
            print(f"{key}: {value}")
        print(f"Broadcasts per iteration: {plan.broadcasts}")
        print(f"Energy per iteration: {plan.total_cost:.6g}")
        print()
        print(f"{'Node':>4s}  {'Energy':>9s}  Consults / Relays")
        print("-" * 70)
        info, relays = plan.info_sets(), plan.relay_sets()
        for k in range(plan.N):
            print(f"{k:>4d}  {plan.per_node_cost[k]:>9.4g}  {sorted(info[k])} / {sorted(relays[k])}")
        print("=" * 70 + "\n")

    def save_tradeoff(self, name: str, rows: List[Dict[str, Any]]) -> Path:
        """Save the trade-off sweep sorted by budget."""
        df = pd.DataFrame(rows).sort_values("budget", kind="stable")
        df = df[["budget", "broadcasts", "total_cost", "objective", "steady_msd", "convergence_rate"]]
        df["steady_msd"] = self._values(df["steady_msd"].to_numpy())
        df = df.rename(columns={"steady_msd": self._msd("steady_msd")})
        return self._write_csv(df, f"{name}_tradeoff.csv")

    def save_theory(self, name: str, trace: MsdTrace, steady: float, bounds: MsdBounds,
                    beta: float, alpha: float, strategy: str = "") -> Dict[str, Path]:
        """Save the theoretical trace and the bounds / coefficient report.

        Args:
            name: Scenario name
            trace: Theoretical transient trace
            steady: Steady-state MSD (linear)
            bounds: Steady-state MSD bounds
            beta: Optimal balancing coefficient beta
            alpha: alpha = 1 / (beta + 1)
            strategy: Label of the weights analysed

        Returns:
            Dictionary mapping file type to file path
        """
        df = pd.DataFrame({"iteration": np.arange(trace.iterations)})
        df[self._msd("msd_theory")] = self._values(trace.msd)
        csv_path = self._write_csv(df, f"{name}_theory.csv")

        txt_path = self.output_dir / f"{name}_theory.txt"
        with open(txt_path, "w") as f:
            f.write("=" * 70 + "\n")
            f.write("THEORETICAL MSD\n")
            f.write("=" * 70 + "\n")
            if strategy:
                f.write(f"Weights: {strategy}\n")
            f.write(f"beta: {beta:.10g}\n")
            f.write(f"alpha: {alpha:.10g}\n")
            f.write(f"Iterations: {trace.iterations}\n")
            f.write("\n")
            f.write("STEADY STATE\n")
            f.write("-" * 70 + "\n")
            f.write(f"Steady-state MSD: {self._fmt(steady)}\n")
            f.write(f"Transient at last iteration: {self._fmt(trace.msd[-1])}\n")
            f.write("\n")
            f.write("UPPER BOUNDS\n")
            f.write("-" * 70 + "\n")
            f.write(f"msd_bar: {self._fmt(bounds.msd_bar)}\n")
            f.write(f"msd_a: {self._fmt(bounds.msd_a)}\n")
            f.write(f"msd_b: {self._fmt(bounds.msd_b)}\n")
            f.write(f"r1 (spectral radius of I - MR): {bounds.r1:.10g}\n")
            f.write(f"r2 (largest eigenvalue of MSM): {bounds.r2:.10g}\n")
            f.write("=" * 70 + "\n")
        self.logger.info(f"Saved {txt_path}")
        return {"theory_csv": csv_path, "theory_txt": txt_path}

    def save_compare(self, name: str, rows: List[Dict[str, Any]]) -> Path:
        """Save the strategy comparison table."""
        df = self._summary_frame(rows)
        columns = ["strategy", self._msd("steady_msd_sim"), self._msd("steady_msd_theory"),
                   "convergence_rate", "energy_per_iteration", "energy_to_90"]
        return self._write_csv(df[columns], f"{name}_compare.csv")

    def save_scenario(self, name: str, config) -> Path:
        """Save the resolved scenario next to the results."""
        filepath = self.output_dir / f"{name}_scenario.json"
        config.to_json(filepath)
        return filepath
