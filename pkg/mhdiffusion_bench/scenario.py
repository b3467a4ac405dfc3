"""Scenario loading: network, node profiles and offline plans."""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from mhdiffusion.config import SYNTH_CONFIG
from mhdiffusion.core.datamodel import GlobalModel, build_blocks, composite_variances, synth_profiles
from mhdiffusion.core.lp_solver import solve_lp
from mhdiffusion.core.milp import Budgets, build_model
from mhdiffusion.core.optimizer import NeighborSelection, round_algorithm1, solve_milp, verify_feasible
from mhdiffusion.core.topology import Network, random_geometric_network, random_tree
from mhdiffusion.core.weights import solve_beta
from mhdiffusion.exceptions import ConfigError, InfeasibleError
from mhdiffusion.utils.logger import log_run_details

from .config import ScenarioConfig


def _local_budget_list(value, n: int) -> list:
    if value is None or np.isscalar(value):
        return [float("inf") if value is None else float(value)] * n
    if len(value) != n:
        raise ConfigError(f"local_budgets has {len(value)} entries for {n} nodes")
    return [float("inf") if c is None else float(c) for c in value]


def balancing_alpha(model: GlobalModel, alpha: Optional[float] = None) -> float:
    """Given alpha, or the LMI-optimal one for the model."""
    if alpha is not None:
        return float(alpha)
    return solve_beta(build_blocks(model)).alpha


def optimize_plan(model: GlobalModel, net: Network, variant: str = "p3", method: str = "exact",
                  alpha: Optional[float] = None,
                  logger: Optional[logging.Logger] = None) -> NeighborSelection:
    """
    Offline neighbor-selection plan under the model's energy budgets.

    Args:
        model: Global model (composite variances and budgets)
        net: Network
        variant: "p2" (multi-hop, simple topologies) or "p3" (two-hop)
        method: "exact" (branch-and-bound) or "algorithm1" (LP rounding)
        alpha: Balancing coefficient (LMI-optimal when None)
        logger: Optional logger instance

    Returns:
        Feasible NeighborSelection

    Raises:
        InfeasibleError: relaxation infeasible or the plan breaks a budget
    """
    logger = logger or logging.getLogger(__name__)
    gammas = composite_variances(model.profiles, balancing_alpha(model, alpha))
    budgets = Budgets.from_model(model)
    milp = build_model(variant, net, gammas, budgets)
    logger.debug(f"Planning model {variant}: {milp.num_variables} variables, {milp.num_constraints} rows")

    if method == "exact":
        plan = solve_milp(milp, net, logger=logger)
    elif method == "algorithm1":
        root = solve_lp(milp, relax=True)
        if not root.ok:
            raise InfeasibleError(f"planning relaxation failed: {root.status.value}",
                                  violations=[f"network budget {budgets.network:g}"])
        plan = round_algorithm1(root, milp, net, budgets)
        plan.lp_bound = root.objective
        plan.lp_solves = 1
    else:
        raise ValueError(f"method must be 'exact' or 'algorithm1', got: {method}")

    report = verify_feasible(plan, net, budgets, variant)
    if not report:
        raise InfeasibleError(f"{method} plan is infeasible", violations=report.violations)

    log_run_details(logger, "PLAN", {
        "variant": variant,
        "method": method,
        "objective": plan.objective_value,
        "broadcasts": plan.broadcasts,
        "total_cost": plan.total_cost,
        "consulted": plan.consulted(),
    })
    return plan


@dataclass
class Scenario:
    """Network and model of a scenario, with the resolved configuration."""

    config: ScenarioConfig
    net: Network
    model: GlobalModel

    @cached_property
    def alpha(self) -> float:
        return balancing_alpha(self.model, self.config.alpha)

    @property
    def gammas(self) -> np.ndarray:
        return composite_variances(self.model.profiles, self.alpha)

    @property
    def budgets(self) -> Budgets:
        return Budgets.from_model(self.model)

    def with_network_budget(self, budget: float) -> "Scenario":
        return Scenario(self.config, self.net, self.model.with_budgets(network=budget))

    def load_plan(self, filepath: str, gammas: Optional[Sequence[float]] = None) -> NeighborSelection:
        return NeighborSelection.from_json(self.config.resolve(filepath), self.net.costs,
                                           self.gammas if gammas is None else gammas)


def _synth_network(kind: str, rng: np.random.Generator, params: dict) -> Network:
    n = int(params.get("nodes", SYNTH_CONFIG[kind]["nodes"]))
    if kind == "tree":
        return random_tree(n, rng)
    settings = SYNTH_CONFIG["random"]
    net = random_geometric_network(n, rng,
                                   side=float(params.get("side", settings["side"])),
                                   radius=float(params.get("radius", settings["radius"])))
    if params.get("unit_costs", False):
        net = net.with_costs([1.0] * n)
    return net


def load_scenario(config: ScenarioConfig, logger: Optional[logging.Logger] = None) -> Scenario:
    """
    Build the network and global model a scenario describes.

    Synthesized pieces draw from one generator seeded with synth.seed (the
    scenario seed when absent): the network first, then the profiles.

    Args:
        config: Scenario configuration
        logger: Optional logger instance

    Returns:
        Scenario

    Raises:
        ConfigError: unreadable inputs or node count mismatch
    """
    logger = logger or logging.getLogger(__name__)
    synth = config.synth or {}
    kind = synth.get("kind", "tree")
    params = dict(synth.get("params", {}))
    rng = np.random.default_rng(int(synth.get("seed", config.seed)))

    if isinstance(config.network, str):
        net = Network.from_json(config.resolve(config.network))
    elif isinstance(config.network, dict):
        net = Network.from_dict(config.network, source="network")
    else:
        net = _synth_network(kind, rng, params)

    if isinstance(config.profiles, str):
        model = GlobalModel.from_json(config.resolve(config.profiles))
    elif isinstance(config.profiles, dict):
        model = GlobalModel.from_dict(config.profiles, source="profiles")
    else:
        params.setdefault("nodes", net.node_count)
        model = synth_profiles(kind, rng, params)

    if model.N != net.node_count:
        raise ConfigError(f"profiles describe {model.N} nodes, network has {net.node_count}")

    if config.local_budgets is not None:
        model = model.with_budgets(local=_local_budget_list(config.local_budgets, model.N))
    if config.network_budget is not None:
        model = model.with_budgets(network=config.network_budget)

    log_run_details(logger, "SCENARIO", {
        "nodes": net.node_count,
        "edges": len(net.edges),
        "M": model.M,
        "simple": net.is_simple,
    })
    return Scenario(config=config, net=net, model=model)
