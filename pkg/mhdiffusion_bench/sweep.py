"""Energy / performance trade-off sweep over network budgets.

For every budget the offline plan is optimized, its steady-state MSD is
evaluated in closed form and a matc simulation measures the convergence rate.
"""

import logging
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from typing import Any, Dict, List, Optional

import numpy as np

from mhdiffusion.core.datamodel import GlobalModel, build_blocks, composite_variances
from mhdiffusion.core.msdtheory import build_dynamics, convergence_stats, steady_state_msd
from mhdiffusion.core.topology import Network
from mhdiffusion.core.weights import balancing_weights
from mhdiffusion.exceptions import NumericalError
from mhdiffusion.utils.helpers import to_db
from mhdiffusion.utils.logger import log_run_details

from .config import ScenarioConfig, StrategyConfig
from .engine import SimulationEngine
from .scenario import Scenario, optimize_plan


def evaluate_budget(model: GlobalModel, net: Network, budget: float, settings: Dict[str, Any],
                    logger: Optional[logging.Logger] = None) -> Dict[str, Any]:
    """
    Optimize, analyze and simulate one budget point.

    Args:
        model: Global model (its network budget is replaced by `budget`)
        net: Network
        budget: Network energy budget per iteration
        settings: variant, method, alpha, iterations, runs, seed, chunk_size
        logger: Optional logger

    Returns:
        Row with budget, broadcasts, total_cost, objective, steady_msd_db, convergence_rate
    """
    logger = logger or logging.getLogger(__name__)
    model = model.with_budgets(network=budget)
    alpha = settings["alpha"]

    plan = optimize_plan(model, net, settings["variant"], settings["method"], alpha=alpha, logger=logger)
    weights = balancing_weights(plan.info_sets(), composite_variances(model.profiles, alpha))
    dyn = build_dynamics(weights, build_blocks(model), model.w_true)
    steady = steady_state_msd(dyn)

    strategy = StrategyConfig(kind="matc", label=f"matc_budget_{budget:g}", alpha=alpha)
    engine = SimulationEngine(model, net, strategy, iterations=settings["iterations"],
                              runs=settings["runs"], seed=settings["seed"],
                              chunk_size=settings["chunk_size"], n_jobs=1, plan=plan, logger=logger)
    trace = engine.run()
    try:
        rate = convergence_stats(trace).rate_db
    except NumericalError as e:
        logger.warning(f"Budget {budget:g}: no convergence rate ({e})")
        rate = float("nan")

    row = {
        "budget": float(budget),
        "broadcasts": plan.broadcasts,
        "total_cost": plan.total_cost,
        "objective": plan.objective_value,
        "steady_msd_db": float(to_db(steady)),
        "steady_msd": steady,
        "convergence_rate": rate,
    }
    log_run_details(logger, "SWEEP", row)
    return row


def _evaluate_budget_worker(model: GlobalModel, net: Network, budget: float,
                            settings: Dict[str, Any]) -> Dict[str, Any]:
    """Process-pool entry point (module level so it pickles)."""
    return evaluate_budget(model, net, budget, settings)


class TradeoffEngine:
    """Sweep engine over network budgets.

    Budget points are independent and run in parallel when n_jobs != 1;
    rows are returned sorted by budget.
    """

    def __init__(self, scenario: Scenario, budgets: Optional[List[float]] = None,
                 logger: Optional[logging.Logger] = None):
        """Initialize trade-off engine.

        Args:
            scenario: Loaded scenario
            budgets: Network budgets to sweep (the scenario's list by default)
            logger: Optional logger
        """
        self.scenario = scenario
        self.config: ScenarioConfig = scenario.config
        self.budgets = sorted(float(b) for b in (budgets if budgets is not None else self.config.budgets or []))
        self.logger = logger or logging.getLogger(__name__)

        if not self.budgets:
            raise ValueError("tradeoff needs at least one budget value")
        if any(b < 0 for b in self.budgets):
            raise ValueError(f"budgets must be nonnegative, got: {self.budgets}")

    def _settings(self) -> Dict[str, Any]:
        return {
            "variant": self.config.variant,
            "method": self.config.method,
            "alpha": self.scenario.alpha,
            "iterations": self.config.iterations,
            "runs": self.config.runs,
            "seed": self.config.seed,
            "chunk_size": self.config.chunk_size,
        }

    def run(self) -> List[Dict[str, Any]]:
        """Run the sweep.

        Returns:
            Rows sorted by budget
        """
        self.logger.info("=" * 70)
        self.logger.info("TRADE-OFF SWEEP")
        self.logger.info("=" * 70)
        self.logger.info(f"Variant: {self.config.variant}, Method: {self.config.method}")
        self.logger.info(f"Budgets: {self.budgets}")
        self.logger.info(f"Parallel workers: {self.config.n_jobs}")
        self.logger.info("=" * 70)

        settings = self._settings()
        if self.config.n_jobs == 1 or len(self.budgets) == 1:
            rows = self._run_sequential(settings)
        else:
            rows = self._run_parallel(settings)

        rows.sort(key=lambda row: row["budget"])
        self._check_monotone(rows)

        self.logger.info("=" * 70)
        self.logger.info("TRADE-OFF SWEEP COMPLETE")
        self.logger.info("=" * 70)
        return rows

    def _run_sequential(self, settings: Dict[str, Any]) -> List[Dict[str, Any]]:
        rows = []
        total = len(self.budgets)
        for i, budget in enumerate(self.budgets, 1):
            self.logger.info(f"[{i}/{total}] Budget {budget:g}")
            rows.append(evaluate_budget(self.scenario.model, self.scenario.net, budget, settings, self.logger))
        return rows

    def _run_parallel(self, settings: Dict[str, Any]) -> List[Dict[str, Any]]:
        n_jobs = self.config.n_jobs
        if n_jobs == -1:
            n_jobs = os.cpu_count()
        self.logger.info(f"Running with {n_jobs} parallel workers")

        rows = []
        total = len(self.budgets)
        with ProcessPoolExecutor(max_workers=n_jobs) as executor:
            futures = {
                executor.submit(_evaluate_budget_worker, self.scenario.model, self.scenario.net,
                                budget, settings): budget
                for budget in self.budgets
            }
            for completed, future in enumerate(as_completed(futures), 1):
                budget = futures[future]
                row = future.result()
                rows.append(row)
                self.logger.info(f"[{completed}/{total}] Completed budget {budget:g} -> "
                                 f"{row['steady_msd_db']:.2f} dB")
        return rows

    def _check_monotone(self, rows: List[Dict[str, Any]]):
        objectives = np.array([row["objective"] for row in rows])
        rises = np.flatnonzero(np.diff(objectives) > 1e-9 * np.maximum(1.0, np.abs(objectives[:-1])))
        for i in rises:
            self.logger.warning(f"Objective rises from budget {rows[i]['budget']:g} to {rows[i + 1]['budget']:g} "
                                f"({objectives[i]:.6g} -> {objectives[i + 1]:.6g})")
