"""Command-line interface for the diffusion workbench."""

import argparse
import logging
from typing import Callable, Dict, List, Optional

import numpy as np

from mhdiffusion.config import LOG_DIR, LOG_LEVEL
from mhdiffusion.core.datamodel import build_blocks
from mhdiffusion.core.msdtheory import build_dynamics, msd_bounds, stability_check, steady_state_msd, transient_msd
from mhdiffusion.core.weights import solve_beta
from mhdiffusion.exceptions import DiffusionError, NumericalError
from mhdiffusion.utils.logger import log_run_details, setup_logger
from mhdiffusion.utils.monitor import monitor

from .config import ADAPTIVE_KINDS, ScenarioConfig, StrategyConfig
from .engine import SimulationEngine, resolve_strategy
from .reporting import WorkbenchReporter, summarize_trace
from .scenario import Scenario, load_scenario, optimize_plan
from .sweep import TradeoffEngine

COMMANDS = ("simulate", "optimize", "tradeoff", "theory", "compare")


def _budget_list(text: str) -> List[float]:
    try:
        values = [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"budgets must be numbers, got: {text!r}")
    if not values or any(v < 0 for v in values):
        raise argparse.ArgumentTypeError(f"budgets must be nonnegative, got: {text!r}")
    return values


def parse_args(argv: Optional[List[str]] = None):
    """Parse command-line arguments.

    Args:
        argv: Argument list (sys.argv[1:] when None)

    Returns:
        Parsed arguments
    """
    parser = argparse.ArgumentParser(
        prog="mhdiffusion_bench",
        description="Energy-constrained multi-hop diffusion workbench",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter
    )
    parser.add_argument("command", choices=COMMANDS, help="Workbench command")

    # Scenario
    parser.add_argument("--config", type=str, required=True, help="Path to JSON scenario file")
    parser.add_argument("--strategy", type=str, help="Strategy label analysed by theory (first static one by default)")

    # Overrides
    parser.add_argument("--seed", type=int, help="Base random seed")
    parser.add_argument("--runs", type=int, help="Monte Carlo runs")
    parser.add_argument("--iters", type=int, help="Iterations per run")
    parser.add_argument("--method", type=str, choices=["exact", "algorithm1"], help="Planning method")
    parser.add_argument("--variant", type=str, choices=["p2", "p3"], help="Planning model")
    parser.add_argument("--budgets", type=_budget_list, help="Network budgets to sweep, e.g. '0,2,4,8'")
    parser.add_argument("--n-jobs", type=int, help="Parallel workers (-1 = all cores, 1 = sequential)")

    # Output settings
    parser.add_argument("--out-dir", type=str, help="Output directory for results")
    parser.add_argument("--linear", action="store_true", help="Write MSD columns as linear values instead of dB")
    parser.add_argument("--log-dir", type=str, nargs="?", const=LOG_DIR,
                        help="Also write a detailed log file to this directory")
    parser.add_argument("--verbose", action="store_true", help="Enable verbose logging")

    return parser.parse_args(argv)


def setup_logging(verbose: bool = False, log_dir: Optional[str] = None) -> logging.Logger:
    """Setup logging configuration.

    Args:
        verbose: Enable verbose (DEBUG) logging, otherwise MHD_LOG_LEVEL applies
        log_dir: Optional directory for a detailed log file

    Returns:
        Workbench logger
    """
    level_name = "DEBUG" if verbose else LOG_LEVEL.upper()
    level = getattr(logging, level_name, logging.INFO)
    logging.basicConfig(
        level=level,
        format="%(asctime)s [%(levelname)s] %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S"
    )
    logging.getLogger().setLevel(level)
    if log_dir:
        file_logger = setup_logger("mhdiffusion_bench", log_dir=log_dir, level=logging.getLevelName(level))
        file_logger.propagate = False
        return file_logger
    return logging.getLogger("mhdiffusion_bench")


def apply_overrides(config: ScenarioConfig, args) -> ScenarioConfig:
    """CLI flags take precedence over scenario values."""
    overrides = {
        "seed": args.seed,
        "runs": args.runs,
        "iterations": args.iters,
        "method": args.method,
        "variant": args.variant,
        "budgets": args.budgets,
        "n_jobs": args.n_jobs,
        "output_dir": args.out_dir,
    }
    for key, value in overrides.items():
        if value is not None:
            setattr(config, key, value)
    if args.linear:
        config.linear = True
    if args.verbose:
        config.verbose = True

    # Re-run validation on the overridden values
    ScenarioConfig.__post_init__(config)
    return config


def _needs_alpha(strategies: List[StrategyConfig]) -> bool:
    return any(
        s.alpha is None and s.weight_rule == "balancing" and s.kind not in ADAPTIVE_KINDS + ("noncoop",)
        for s in strategies
    )


def _plans(scenario: Scenario) -> Dict[str, object]:
    """Plan files referenced by strategies, resolved relative to the scenario."""
    plans = {}
    for strategy in scenario.config.strategies:
        if strategy.plan_file is not None:
            plans[strategy.label] = scenario.load_plan(strategy.plan_file)
    return plans


def _simulate_all(scenario: Scenario, logger: logging.Logger) -> List[tuple]:
    """Simulate every strategy; returns (engine, trace, theory trace, theory steady state)."""
    config = scenario.config
    alpha = scenario.alpha if _needs_alpha(config.strategies) or config.alpha is not None else None
    plans = _plans(scenario)
    outcomes = []
    for strategy in config.strategies:
        engine = SimulationEngine(
            scenario.model,
            scenario.net,
            strategy,
            iterations=config.iterations,
            runs=config.runs,
            seed=config.seed,
            events=config.events,
            chunk_size=config.chunk_size,
            n_jobs=config.n_jobs,
            plan=plans.get(strategy.label),
            alpha=alpha,
            logger=logger,
        )
        trace = engine.run()
        theory, steady = engine.theory()
        outcomes.append((engine, trace, theory, steady))
    return outcomes


def cmd_simulate(scenario: Scenario, reporter: WorkbenchReporter, logger: logging.Logger) -> int:
    """One trace per strategy plus the summary table."""
    config = scenario.config
    rows = []
    for engine, trace, theory, steady in _simulate_all(scenario, logger):
        reporter.save_trace(config.name, trace, theory)
        rows.append(summarize_trace(trace, theory, steady, logger))

    header = {
        "Scenario": config.name,
        "Nodes": scenario.net.node_count,
        "Runs": config.runs,
        "Iterations": config.iterations,
        "Seed": config.seed,
        "Events": len(config.events),
    }
    log_run_details(logger, "SUMMARY", {row["strategy"]: f"{row['steady_msd_sim']:.6g}" for row in rows})
    reporter.save_summary(config.name, rows, header)
    reporter.save_scenario(config.name, config)
    reporter.print_summary(rows, header)
    return 0


def cmd_compare(scenario: Scenario, reporter: WorkbenchReporter, logger: logging.Logger) -> int:
    """Simulated and theoretical figures of every strategy side by side."""
    config = scenario.config
    rows = [summarize_trace(trace, theory, steady, logger)
            for _, trace, theory, steady in _simulate_all(scenario, logger)]
    reporter.save_compare(config.name, rows)
    reporter.print_summary(rows, {"Scenario": config.name}, title="STRATEGY COMPARISON")
    return 0


def cmd_optimize(scenario: Scenario, reporter: WorkbenchReporter, logger: logging.Logger) -> int:
    """Offline plan under the scenario budgets."""
    config = scenario.config
    plan = optimize_plan(scenario.model, scenario.net, config.variant, config.method,
                         alpha=scenario.alpha, logger=logger)
    extra = {"alpha": scenario.alpha}
    if config.method == "exact":
        rounded = optimize_plan(scenario.model, scenario.net, config.variant, "algorithm1",
                                alpha=scenario.alpha, logger=logger)
        extra["algorithm1_objective"] = rounded.objective_value
        extra["algorithm1_broadcasts"] = rounded.broadcasts

    log_run_details(logger, "SOLVER", {
        "status": "optimal" if config.method == "exact" else "rounded",
        "nodes_explored": plan.nodes_explored,
        "lp_solves": plan.lp_solves,
        "lp_bound": plan.lp_bound,
    })
    reporter.save_plan(config.name, plan, extra)
    reporter.print_plan(plan, extra)
    monitor.print_stats()
    return 0


def cmd_tradeoff(scenario: Scenario, reporter: WorkbenchReporter, logger: logging.Logger) -> int:
    """Budget sweep: plan, theoretical steady state and simulated rate per budget."""
    config = scenario.config
    rows = TradeoffEngine(scenario, logger=logger).run()
    reporter.save_tradeoff(config.name, rows)

    print("\n" + "=" * 70)
    print("TRADE-OFF")
    print("=" * 70)
    print(f"{'Budget':>10s} {'Broadcasts':>11s} {'Objective':>12s} {'Steady MSD':>12s} {'Rate dB/it':>11s}")
    print("-" * 70)
    for row in rows:
        print(f"{row['budget']:>10g} {row['broadcasts']:>11d} {row['objective']:>12.6g} "
              f"{row['steady_msd_db']:>9.2f} dB {row['convergence_rate']:>11.4f}")
    print("=" * 70 + "\n")
    monitor.print_stats()
    return 0


def _theory_strategy(config: ScenarioConfig, label: Optional[str]) -> StrategyConfig:
    if label is not None:
        return config.strategy(label)
    for strategy in config.strategies:
        if strategy.kind in ("noncoop", "atc", "matc", "centralized") and not strategy.is_adaptive:
            return strategy
    return StrategyConfig(kind="atc")


def cmd_theory(scenario: Scenario, reporter: WorkbenchReporter, logger: logging.Logger,
               label: Optional[str] = None) -> int:
    """Transient and steady-state theory, bounds and the balancing coefficient."""
    config, model = scenario.config, scenario.model
    for k in np.flatnonzero(~stability_check(model.profiles)):
        logger.warning(f"Node {k} is not mean stable (mu >= 2 / lambda_max)")

    blocks = build_blocks(model)
    coefficient = solve_beta(blocks)
    strategy = _theory_strategy(config, label)
    plans = _plans(scenario)
    resolved = resolve_strategy(model, scenario.net, strategy, plan=plans.get(strategy.label),
                                alpha=scenario.alpha, logger=logger)
    if not resolved.has_theory:
        raise NumericalError(f"strategy '{strategy.label}' has no closed-form MSD (adaptive or asynchronous)")

    dyn = build_dynamics(resolved.weights, blocks, model.w_true)
    trace = transient_msd(dyn, config.iterations)
    steady = steady_state_msd(dyn)
    bounds = msd_bounds(dyn, blocks)

    log_run_details(logger, "THEORY", {
        "steady_state_db": 10.0 * np.log10(steady),
        "alpha": f"{coefficient.alpha:.10g}",
        "beta": f"{coefficient.beta:.10g}",
    })
    paths = reporter.save_theory(config.name, trace, steady, bounds, coefficient.beta,
                                 coefficient.alpha, strategy.label)
    with open(paths["theory_txt"]) as f:
        print("\n" + f.read())
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entry point.

    Returns:
        Exit code: 0 ok, 1 config error, 2 infeasible, 3 numeric failure
    """
    args = parse_args(argv)
    logger = setup_logging(args.verbose, args.log_dir)
    logger.info(f"Loading scenario from: {args.config}")

    try:
        config = apply_overrides(ScenarioConfig.from_json(args.config), args)
        if config.verbose:
            logging.getLogger().setLevel(logging.DEBUG)

        reporter = WorkbenchReporter(output_dir=config.output_dir, linear=config.linear, logger=logger)
        scenario = load_scenario(config, logger)

        commands: Dict[str, Callable[..., int]] = {
            "simulate": cmd_simulate,
            "optimize": cmd_optimize,
            "tradeoff": cmd_tradeoff,
            "compare": cmd_compare,
        }
        if args.command == "theory":
            code = cmd_theory(scenario, reporter, logger, args.strategy)
        else:
            code = commands[args.command](scenario, reporter, logger)

    except DiffusionError as e:
        log_run_details(logger, "ERROR", {"error": f"{type(e).__name__}: {e}",
                                          "exc_info": logger.isEnabledFor(logging.DEBUG)})
        return e.exit_code
    except ValueError as e:
        log_run_details(logger, "ERROR", {"error": f"Invalid input: {e}",
                                          "exc_info": logger.isEnabledFor(logging.DEBUG)})
        return 1
    except (ArithmeticError, np.linalg.LinAlgError) as e:
        log_run_details(logger, "ERROR", {"error": f"Numerical failure: {e}",
                                          "exc_info": logger.isEnabledFor(logging.DEBUG)})
        return 3

    logger.info(f"\n{args.command} complete!")
    return code


if __name__ == "__main__":
    exit(main())
