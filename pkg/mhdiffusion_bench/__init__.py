"""mhdiffusion_bench - Simulation and planning workbench for multi-hop diffusion.

This package drives the mhdiffusion library from JSON scenarios:
- Loads or synthesizes a network and its node profiles
- Plans neighbor selection offline (exact MILP or LP rounding)
- Simulates static, asynchronous and adaptive diffusion strategies
- Sweeps network budgets for the energy / MSD trade-off
- Exports traces, summaries, plans and theory reports

Usage:
    python -m mhdiffusion_bench simulate --config mhdiffusion_bench/scenarios/tree8.json

Package structure:
- config: ScenarioConfig, StrategyConfig and ChangeEvent dataclasses
- scenario: Scenario loading and plan optimization
- exchange: Relay ledgers, delay buffers and distributed relay selection
- engine: SimulationEngine for chunked Monte Carlo runs
- sweep: TradeoffEngine for budget sweeps
- reporting: WorkbenchReporter for results export
- cli: Command-line interface
"""

__version__ = "1.0.0"
__author__ = "mhdiffusion Development Team"

from .config import ChangeEvent, ScenarioConfig, StrategyConfig
from .scenario import Scenario, load_scenario, optimize_plan
from .exchange import DelayBuffer, RelayState, algorithm2_async_step, algorithm2_step
from .engine import SimulationEngine, StrategyPlan, resolve_strategy
from .sweep import TradeoffEngine
from .reporting import WorkbenchReporter, summarize_trace

__all__ = [
    "ChangeEvent",
    "ScenarioConfig",
    "StrategyConfig",
    "Scenario",
    "load_scenario",
    "optimize_plan",
    "DelayBuffer",
    "RelayState",
    "algorithm2_step",
    "algorithm2_async_step",
    "SimulationEngine",
    "StrategyPlan",
    "resolve_strategy",
    "TradeoffEngine",
    "WorkbenchReporter",
    "summarize_trace"
]
