"""Neighbor-selection planning: exact branch-and-bound, LP rounding, feasibility.

A NeighborSelection holds two boolean N x N maps:
- delta[l, k]: node k consults node l
- pi[l, k]: node k broadcasts the estimate originating at l (pi[k, k] is k's own)
"""

import heapq
import itertools
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np

from mhdiffusion.config import SOLVER_CONFIG
from mhdiffusion.core.lp_solver import LpResult, LpStatus, solve_lp
from mhdiffusion.core.milp import Budgets, MilpModel
from mhdiffusion.core.topology import Network, path_indicator
from mhdiffusion.exceptions import ConfigError, InfeasibleError
from mhdiffusion.utils.monitor import monitor

logger = logging.getLogger(__name__)

BUDGET_TOL = 1e-9


@dataclass
class NeighborSelection:
    """Consultation and relay plan with its energy ledger."""

    delta: np.ndarray
    pi: np.ndarray
    per_node_cost: np.ndarray
    total_cost: float
    objective_value: float
    variant: str = "none"
    method: str = "reference"
    lp_bound: Optional[float] = None
    nodes_explored: int = 0
    lp_solves: int = 0

    def __post_init__(self):
        self.delta = np.asarray(self.delta, dtype=bool)
        self.pi = np.asarray(self.pi, dtype=bool)
        n = self.delta.shape[0]
        if self.delta.shape != (n, n) or self.pi.shape != (n, n):
            raise ValueError("delta and pi must both be N x N")
        self.per_node_cost = np.asarray(self.per_node_cost, dtype=float)

    @classmethod
    def build(cls, delta: np.ndarray, pi: np.ndarray, costs: Sequence[float],
              gammas: Sequence[float], variant: str = "none", method: str = "reference",
              **stats) -> "NeighborSelection":
        """Package a plan, computing its energy ledger and objective."""
        delta = np.asarray(delta, dtype=bool)
        pi = np.asarray(pi, dtype=bool)
        per_node = np.asarray(costs, dtype=float) * pi.sum(axis=0)
        return cls(
            delta=delta,
            pi=pi,
            per_node_cost=per_node,
            total_cost=float(per_node.sum()),
            objective_value=selection_objective(delta, gammas),
            variant=variant,
            method=method,
            **stats,
        )

    @property
    def N(self) -> int:
        return self.delta.shape[0]

    @property
    def broadcasts(self) -> int:
        return int(self.pi.sum())

    def info_sets(self) -> List[frozenset]:
        """Consulted set of every node."""
        return [frozenset(np.flatnonzero(self.delta[:, k]).tolist()) for k in range(self.N)]

    def relay_sets(self) -> List[frozenset]:
        """Origins whose estimates each node broadcasts."""
        return [frozenset(np.flatnonzero(self.pi[:, k]).tolist()) for k in range(self.N)]

    def consulted(self) -> Dict[int, frozenset]:
        return dict(enumerate(self.info_sets()))

    def to_dict(self) -> dict:
        """Plan-file representation."""
        info, relays = self.info_sets(), self.relay_sets()
        return {
            "variant": self.variant,
            "method": self.method,
            "objective": self.objective_value,
            "total_cost": self.total_cost,
            "broadcasts": self.broadcasts,
            "lp_bound": self.lp_bound,
            "nodes_explored": self.nodes_explored,
            "lp_solves": self.lp_solves,
            "nodes": [
                {
                    "node": k,
                    "consults": sorted(info[k]),
                    "relays": sorted(relays[k]),
                    "energy": float(self.per_node_cost[k]),
                }
                for k in range(self.N)
            ],
        }

    @classmethod
    def from_dict(cls, data: dict, costs: Sequence[float], gammas: Sequence[float],
                  source: Optional[str] = None) -> "NeighborSelection":
        """Rebuild a plan; the ledger and objective are recomputed from costs and gammas."""
        try:
            n = len(data["nodes"])
            delta = np.zeros((n, n), dtype=bool)
            pi = np.zeros((n, n), dtype=bool)
            for entry in data["nodes"]:
                k = int(entry["node"])
                delta[list(entry["consults"]), k] = True
                pi[list(entry["relays"]), k] = True
        except (KeyError, TypeError, ValueError, IndexError) as e:
            raise ConfigError(f"invalid plan file: {e}", source=source) from e
        if len(costs) != n:
            raise ConfigError(f"plan has {n} nodes, network has {len(costs)}", source=source)
        return cls.build(delta, pi, costs, gammas,
                         variant=data.get("variant", "none"), method=data.get("method", "reference"),
                         lp_bound=data.get("lp_bound"), nodes_explored=int(data.get("nodes_explored", 0)),
                         lp_solves=int(data.get("lp_solves", 0)))

    def to_json(self, filepath: Union[str, Path]):
        with open(filepath, "w") as f:
            json.dump(self.to_dict(), f, indent=2)

    @classmethod
    def from_json(cls, filepath: Union[str, Path], costs: Sequence[float],
                  gammas: Sequence[float]) -> "NeighborSelection":
        with open(filepath, "r") as f:
            try:
                data = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigError(e.msg, line=e.lineno, source=str(filepath)) from e
        return cls.from_dict(data, costs, gammas, source=str(filepath))


@dataclass
class FeasibilityReport:
    ok: bool
    violations: List[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok


def selection_objective(sel: Union[NeighborSelection, np.ndarray], gammas: Sequence[float]) -> float:
    """
    Planning objective sum_k 1 / sum_{l consulted by k} gamma_l^-2.

    Args:
        sel: Selection or its delta matrix (delta[l, k])
        gammas: Composite variance of every node

    Returns:
        Objective value
    """
    delta = sel.delta if isinstance(sel, NeighborSelection) else np.asarray(sel, dtype=bool)
    inv = 1.0 / np.asarray(gammas, dtype=float)
    totals = inv @ delta
    if np.any(totals <= 0):
        raise ValueError("every node must consult at least itself")
    return float(np.sum(1.0 / totals))


def _received(net: Network, pi: np.ndarray, origin: int) -> set:
    """Nodes holding origin's estimate when only received estimates can be relayed."""
    holders = {origin}
    frontier = [origin]
    while frontier:
        node = frontier.pop()
        if not pi[origin, node]:
            continue
        for j in net.index.direct_reach[node]:
            if j not in holders:
                holders.add(j)
                frontier.append(j)
    return holders


def _receivers_delta(net: Network, pi: np.ndarray, candidates: Sequence[frozenset]) -> np.ndarray:
    n = net.node_count
    delta = np.eye(n, dtype=bool)
    for l in range(n):
        for k in _received(net, pi, l):
            if l in candidates[k]:
                delta[l, k] = True
    return delta


def _relay_closure(net: Network, pi: np.ndarray) -> np.ndarray:
    """Drop relays of estimates the relay never receives."""
    pi = pi.copy()
    for l in range(net.node_count):
        holders = _received(net, pi, l)
        for k in np.flatnonzero(pi[l]):
            if k not in holders:
                pi[l, k] = False
    return pi


def verify_feasible(sel: NeighborSelection, net: Network, budgets: Optional[Budgets] = None,
                    variant: Optional[str] = None) -> FeasibilityReport:
    """
    Check a plan against budgets, self-consultation and relay-path validity.

    Every consultation must be served by a chain of relays starting at its
    origin, and nobody may relay an estimate it never received. Two-hop plans
    may only consult nodes within two hops.

    Args:
        sel: Plan to check
        net: Network
        budgets: Energy budgets (unlimited when omitted)
        variant: "p2", "p3" or None (taken from the plan)

    Returns:
        FeasibilityReport, truthy when feasible
    """
    n = net.node_count
    budgets = budgets or Budgets.unlimited(n)
    variant = (variant or sel.variant).lower()
    violations = []

    if sel.N != n:
        return FeasibilityReport(False, [f"plan has {sel.N} nodes, network has {n}"])

    for k in np.flatnonzero(~np.diag(sel.delta)):
        violations.append(f"node {k} does not consult itself")

    per_node = net.costs * sel.pi.sum(axis=0)
    for k in range(n):
        if per_node[k] > budgets.local[k] + BUDGET_TOL:
            violations.append(f"node {k} spends {per_node[k]:g} over local budget {budgets.local[k]:g}")
    if per_node.sum() > budgets.network + BUDGET_TOL:
        violations.append(f"network spends {per_node.sum():g} over budget {budgets.network:g}")

    for l in range(n):
        holders = _received(net, sel.pi, l)
        for k in np.flatnonzero(sel.delta[l]):
            if k == l:
                continue
            if k not in holders:
                violations.append(f"node {k} consults {l} without a relay path")
            elif variant == "p3" and l not in net.index.two_hop[k]:
                violations.append(f"node {k} consults {l} beyond two hops")
        for k in np.flatnonzero(sel.pi[l]):
            if k not in holders:
                violations.append(f"node {k} relays {l}'s estimate without receiving it")

    return FeasibilityReport(not violations, violations)


def _extract(model: MilpModel, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    n = model.N
    delta = np.zeros((n, n), dtype=bool)
    pi = np.zeros((n, n), dtype=bool)
    for (l, k), idx in model.delta.items():
        delta[l, k] = x[idx] > 0.5
    for (l, k), idx in model.pi.items():
        pi[l, k] = x[idx] > 0.5
    return delta, pi


def _hop(net: Network, l: int, k: int) -> int:
    return 0 if l == k else net.index.hop_distance[(l, k)]


def round_algorithm1(lp_frac: Union[LpResult, np.ndarray], model: MilpModel, net: Network,
                     budgets: Optional[Budgets] = None) -> NeighborSelection:
    """
    Threshold a relaxed LP solution into a feasible plan.

    Relays are admitted level by level in decreasing order of their relaxed
    value. When the network budget breaks, the smallest admitted relays are
    dropped (farthest from the origin first on ties) and the sweep stops.
    Each node then drops its own smallest relays until its local budget holds,
    invalidating the downstream relays that depended on them.

    Args:
        lp_frac: Relaxed LP result or its solution vector
        model: Planning model the LP was solved on
        net: Network of the model
        budgets: Energy budgets (the model's by default)

    Returns:
        NeighborSelection with method "algorithm1"
    """
    x = lp_frac.x if isinstance(lp_frac, LpResult) else np.asarray(lp_frac, dtype=float)
    if x is None:
        raise InfeasibleError("relaxed LP has no solution to round")
    budgets = budgets or model.budgets
    costs = net.costs
    n = model.N
    tol = SOLVER_CONFIG["integrality_tol"]

    relaxed = {pair: float(x[idx]) for pair, idx in model.pi.items()}
    order_key = {pair: (value, -_hop(net, *pair), pair[0], pair[1]) for pair, value in relaxed.items()}
    levels = sorted({round(v, 9) for v in relaxed.values() if v > tol}, reverse=True)

    pi = np.zeros((n, n), dtype=bool)
    for level in levels:
        admitted = np.zeros((n, n), dtype=bool)
        for (l, k), value in relaxed.items():
            if value >= level - 1e-9:
                admitted[l, k] = True
        network_cost = float(np.sum(costs * admitted.sum(axis=0)))
        if network_cost <= budgets.network + BUDGET_TOL:
            pi = admitted
            continue
        active = sorted((pair for pair in relaxed if admitted[pair]), key=order_key.get)
        for l, k in active:
            if network_cost <= budgets.network + BUDGET_TOL:
                break
            admitted[l, k] = False
            network_cost -= costs[k]
        pi = admitted
        break

    for k in range(n):
        while costs[k] * pi[:, k].sum() > budgets.local[k] + BUDGET_TOL:
            l_star = min((l for l in np.flatnonzero(pi[:, k])), key=lambda l: order_key[(l, k)])
            pi[l_star, k] = False
            if model.variant == "p2":
                if l_star == k:
                    pi[k, list(net.index.reachable[k])] = False
                else:
                    for j in net.index.reachable[l_star]:
                        if k in path_indicator(net, l_star, j):
                            pi[l_star, j] = False
            elif l_star == k:
                pi[k, list(net.index.direct_reach[k])] = False

    pi = _relay_closure(net, pi)
    delta = _receivers_delta(net, pi, model.candidates)
    return NeighborSelection.build(delta, pi, costs, model.gammas, variant=model.variant,
                                   method="algorithm1")


def _fractionality(x: np.ndarray, binaries: np.ndarray) -> np.ndarray:
    """Fractionality (distance to the nearest integer) of every binary."""
    values = x[binaries]
    return np.minimum(values - np.floor(values), np.ceil(values) - values)


def solve_milp(model: MilpModel, net: Network,
               max_nodes: int = SOLVER_CONFIG["max_bnb_nodes"],
               logger: Optional[logging.Logger] = None) -> NeighborSelection:
    """
    Exact plan by best-first branch-and-bound over LP relaxations.

    The rounded root relaxation seeds the incumbent. Nodes are expanded in
    order of their LP bound; the most fractional binary is branched on.

    Args:
        model: Planning model
        net: Network of the model
        max_nodes: Node cap; the incumbent is returned with a warning when hit
        logger: Optional logger instance

    Returns:
        NeighborSelection with method "exact"

    Raises:
        InfeasibleError: root relaxation infeasible
    """
    logger = logger or logging.getLogger(__name__)
    tol = SOLVER_CONFIG["integrality_tol"]
    binaries = model.binary_indices
    lp_solves = 0

    def relax(fixings: Dict[int, tuple]) -> LpResult:
        nonlocal lp_solves
        lp_solves += 1
        with monitor.track("lp_solve"):
            return solve_lp(model, relax=True, bounds_override=fixings)

    root = relax({})
    if root.status is LpStatus.INFEASIBLE:
        violated = [f"local budgets {list(model.budgets.local)}", f"network budget {model.budgets.network:g}"]
        raise InfeasibleError("planning relaxation is infeasible", violations=violated)
    if not root.ok:
        raise InfeasibleError(f"root relaxation failed: {root.status.value}")

    best = round_algorithm1(root, model, net)
    best_value = best.objective_value
    counter = itertools.count()
    heap = [(root.objective, next(counter), {}, root)]
    explored = 0

    while heap:
        bound, _, fixings, result = heapq.heappop(heap)
        if bound >= best_value - 1e-9 * max(1.0, abs(best_value)):
            continue
        explored += 1
        if explored > max_nodes:
            logger.warning(f"Branch-and-bound stopped at {max_nodes} nodes; returning incumbent")
            break

        fractionality = _fractionality(result.x, binaries)
        if np.all(fractionality <= tol):
            delta, pi = _extract(model, result.x)
            value = selection_objective(delta, model.gammas)
            if value < best_value:
                best_value = value
                best = NeighborSelection.build(delta, pi, net.costs, model.gammas,
                                               variant=model.variant, method="exact")
            continue

        var = int(binaries[int(np.argmax(fractionality))])
        for fixed in (0.0, 1.0):
            child = {**fixings, var: (fixed, fixed)}
            child_result = relax(child)
            if child_result.ok and child_result.objective < best_value - 1e-9 * max(1.0, abs(best_value)):
                heapq.heappush(heap, (child_result.objective, next(counter), child, child_result))

    best.method = "exact"
    best.lp_bound = root.objective
    best.nodes_explored = explored
    best.lp_solves = lp_solves
    logger.debug(f"Branch-and-bound: {explored} nodes, {lp_solves} LP solves, "
                 f"objective {best.objective_value:.10g}, root bound {root.objective:.10g}")
    return best


def diagonal_selection(net: Network, gammas: Sequence[float]) -> NeighborSelection:
    """Non-cooperative plan: every node consults only itself, nobody broadcasts."""
    n = net.node_count
    return NeighborSelection.build(np.eye(n, dtype=bool), np.zeros((n, n), dtype=bool),
                                   net.costs, gammas, method="noncoop")


def one_hop_selection(net: Network, gammas: Sequence[float]) -> NeighborSelection:
    """Conventional ATC plan: nodes broadcast their own estimate once, consult physical neighbors."""
    n = net.node_count
    pi = np.zeros((n, n), dtype=bool)
    for k in range(n):
        pi[k, k] = bool(net.index.direct_reach[k])
    delta = np.zeros((n, n), dtype=bool)
    for k, members in enumerate(net.index.physical):
        delta[list(members), k] = True
    return NeighborSelection.build(delta, pi, net.costs, gammas, method="one_hop")


def full_consultation_selection(net: Network, gammas: Sequence[float]) -> NeighborSelection:
    """
    Plan where every node consults every node that can reach it.

    Each origin floods along its breadth-first tree; the internal nodes of
    the tree are its relays.

    Args:
        net: Network
        gammas: Composite variance of every node

    Returns:
        NeighborSelection with method "full"
    """
    n = net.node_count
    pi = np.zeros((n, n), dtype=bool)
    delta = np.eye(n, dtype=bool)
    for l in range(n):
        tree = nx.bfs_tree(net.graph, l)
        for node in tree.nodes:
            if tree.out_degree(node) > 0:
                pi[l, node] = True
        delta[l, list(net.index.reachable[l])] = True
    return NeighborSelection.build(delta, pi, net.costs, gammas, method="full")
