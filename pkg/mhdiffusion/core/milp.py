"""Mixed-integer models for information-neighbor planning.

Variables per node k and candidate l in S_k:
- delta[l, k]: k consults l (binary)
- pi[l, k]: k rebroadcasts the estimate originating at l (binary)
- p[l, k]: delta[l, k] * z_k, linearized (continuous)
- z_k: 1 / sum of consulted gamma^-2 (continuous)

The objective is sum_k z_k. Two variants are built:
- "p2": multi-hop candidates, simple topologies only
- "p3": candidates within two hops, any topology
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from mhdiffusion.core.datamodel import GlobalModel
from mhdiffusion.core.topology import Network, path_indicator
from mhdiffusion.exceptions import TopologyError

logger = logging.getLogger(__name__)

Pair = Tuple[int, int]

VARIANTS = ("p2", "p3")


class VarKind(Enum):
    BINARY = "binary"
    CONTINUOUS = "continuous"


class Sense(Enum):
    LE = "<="
    GE = ">="
    EQ = "=="


@dataclass(frozen=True)
class Variable:
    name: str
    kind: VarKind
    lb: float
    ub: float


@dataclass(frozen=True)
class Constraint:
    """One linear row: sum coefs[i] * x_i (sense) rhs."""

    coefs: Dict[int, float]
    sense: Sense
    rhs: float
    tag: str = ""


@dataclass(frozen=True)
class Budgets:
    """Local (per-node) and network-wide energy budgets; inf means unconstrained."""

    local: Tuple[float, ...]
    network: float = float("inf")

    def __post_init__(self):
        local = tuple(float(c) for c in self.local)
        if any(c < 0 for c in local) or self.network < 0:
            raise ValueError("energy budgets must be >= 0")
        object.__setattr__(self, "local", local)
        object.__setattr__(self, "network", float(self.network))

    @classmethod
    def unlimited(cls, n: int) -> "Budgets":
        return cls(tuple(float("inf") for _ in range(n)))

    @classmethod
    def from_model(cls, model: GlobalModel) -> "Budgets":
        return cls(tuple(model.local_budgets), model.network_budget)

    @property
    def N(self) -> int:
        return len(self.local)

    @property
    def local_array(self) -> np.ndarray:
        return np.asarray(self.local, dtype=float)


@dataclass
class MilpModel:
    """Variables, rows and planning data of one (P2)/(P3) instance."""

    variant: str
    candidates: Tuple[frozenset, ...]
    gammas: np.ndarray
    costs: np.ndarray
    budgets: Budgets
    valid_inequalities: bool = True
    variables: List[Variable] = field(default_factory=list)
    constraints: List[Constraint] = field(default_factory=list)
    delta: Dict[Pair, int] = field(default_factory=dict)
    pi: Dict[Pair, int] = field(default_factory=dict)
    p: Dict[Pair, int] = field(default_factory=dict)
    z: Dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        self._dense = None

    @property
    def N(self) -> int:
        return len(self.candidates)

    @property
    def num_variables(self) -> int:
        return len(self.variables)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    def add_variable(self, name: str, kind: VarKind, lb: float, ub: float) -> int:
        self.variables.append(Variable(name, kind, float(lb), float(ub)))
        self._dense = None
        return len(self.variables) - 1

    def add_constraint(self, coefs: Dict[int, float], sense: Sense, rhs: float, tag: str = ""):
        for idx in coefs:
            if not 0 <= idx < len(self.variables):
                raise ValueError(f"constraint '{tag}' references undeclared variable {idx}")
        self.constraints.append(Constraint(dict(coefs), sense, float(rhs), tag))
        self._dense = None

    @property
    def objective(self) -> np.ndarray:
        c = np.zeros(self.num_variables)
        c[list(self.z.values())] = 1.0
        return c

    @property
    def binary_indices(self) -> np.ndarray:
        return np.array([i for i, v in enumerate(self.variables) if v.kind is VarKind.BINARY], dtype=int)

    def count_rows(self, tag: str) -> int:
        return sum(1 for row in self.constraints if row.tag == tag)

    def to_dense(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """
        Dense form of the model.

        Returns:
            (A, b, senses, c, lb, ub); senses holds -1 for <=, 1 for >=, 0 for ==
        """
        if self._dense is None:
            A = np.zeros((self.num_constraints, self.num_variables))
            b = np.zeros(self.num_constraints)
            senses = np.zeros(self.num_constraints, dtype=int)
            code = {Sense.LE: -1, Sense.GE: 1, Sense.EQ: 0}
            for i, row in enumerate(self.constraints):
                for idx, coef in row.coefs.items():
                    A[i, idx] += coef
                b[i] = row.rhs
                senses[i] = code[row.sense]
            lb = np.array([v.lb for v in self.variables])
            ub = np.array([v.ub for v in self.variables])
            self._dense = (A, b, senses, self.objective, lb, ub)
        return self._dense


def _check_gammas(gammas: Sequence[float], n: int) -> np.ndarray:
    gammas = np.asarray(gammas, dtype=float)
    if gammas.shape != (n,):
        raise ValueError(f"expected {n} composite variances, got shape {gammas.shape}")
    if np.any(gammas <= 0) or not np.all(np.isfinite(gammas)):
        raise ValueError(f"composite variances must be finite and > 0, got: {gammas}")
    return gammas


def _declare_selection(model: MilpModel):
    """delta, p and z variables plus normalization and McCormick rows."""
    inv = 1.0 / model.gammas
    for k, members in enumerate(model.candidates):
        rows = sorted(members)
        z_lo = 1.0 / float(np.sum(inv[rows]))
        z_hi = float(np.max(model.gammas[rows]))
        for l in rows:
            model.delta[(l, k)] = model.add_variable(f"delta_{l}_{k}", VarKind.BINARY, 0, 1)
        for l in rows:
            model.p[(l, k)] = model.add_variable(f"p_{l}_{k}", VarKind.CONTINUOUS, 0, z_hi)
        model.z[k] = model.add_variable(f"z_{k}", VarKind.CONTINUOUS, z_lo, z_hi)

    for k, members in enumerate(model.candidates):
        rows = sorted(members)
        z_var = model.z[k]
        z_lo, z_hi = model.variables[z_var].lb, model.variables[z_var].ub
        model.add_constraint({model.p[(l, k)]: inv[l] for l in rows}, Sense.EQ, 1.0, "normalization")
        for l in rows:
            d, p = model.delta[(l, k)], model.p[(l, k)]
            # p = delta * z on the box [0, 1] x [z_lo, z_hi]
            model.add_constraint({p: 1.0, d: -z_lo}, Sense.GE, 0.0, "mccormick")
            model.add_constraint({p: 1.0, d: -z_hi}, Sense.LE, 0.0, "mccormick")
            model.add_constraint({p: 1.0, z_var: -1.0, d: -z_hi}, Sense.GE, -z_hi, "mccormick")
            model.add_constraint({p: 1.0, z_var: -1.0, d: -z_lo}, Sense.LE, -z_lo, "mccormick")


def _add_budget_rows(model: MilpModel):
    relays_of = {k: [] for k in range(model.N)}
    for (l, k), idx in model.pi.items():
        relays_of[k].append(idx)

    for k in range(model.N):
        budget = model.budgets.local[k]
        if np.isinf(budget) or not relays_of[k]:
            continue
        model.add_constraint({idx: model.costs[k] for idx in relays_of[k]}, Sense.LE, budget, "local_budget")

    if not np.isinf(model.budgets.network) and model.pi:
        coefs = {idx: model.costs[k] for (l, k), idx in model.pi.items()}
        model.add_constraint(coefs, Sense.LE, model.budgets.network, "network_budget")


def _add_relay_coupling(model: MilpModel, origin: int, relay: int, served: Sequence[int],
                        scale: float):
    """pi[origin, relay] <= sum delta[origin, j] <= scale * pi[origin, relay]."""
    pi_var = model.pi[(origin, relay)]
    deltas = {model.delta[(origin, j)]: 1.0 for j in served if (origin, j) in model.delta}
    model.add_constraint({pi_var: 1.0, **{d: -1.0 for d in deltas}}, Sense.LE, 0.0, "coupling")
    if deltas:
        model.add_constraint({**deltas, pi_var: -scale}, Sense.LE, 0.0, "coupling")


def _add_consult_self(model: MilpModel):
    for k in range(model.N):
        model.add_constraint({model.delta[(k, k)]: 1.0}, Sense.EQ, 1.0, "valid_self")


def _add_relay_implies_delivery(model: MilpModel, net: Network):
    """A relay of l at k delivers l's estimate to k and to every node k reaches."""
    index = net.index
    for (l, k), pi_var in model.pi.items():
        for j in sorted({k} | index.direct_reach[k]):
            if j != l and (l, j) in model.delta:
                model.add_constraint({pi_var: 1.0, model.delta[(l, j)]: -1.0}, Sense.LE, 0.0, "valid_delivery")


def _served_through(net: Network, origin: int, relay: int, within: Optional[Sequence[frozenset]] = None) -> List[int]:
    """Destinations of origin's estimate whose unique path passes relay (relay == origin: all)."""
    served = []
    for j in sorted(net.index.reachable[origin]):
        if within is not None and origin not in within[j]:
            continue
        if relay == origin or relay in path_indicator(net, origin, j):
            served.append(j)
    return served


def build_p2(net: Network, gammas: Sequence[float], budgets: Budgets,
             valid_inequalities: bool = True) -> MilpModel:
    """
    Multi-hop planning model on a simple topology.

    Args:
        net: Network with at most one directed path per node pair
        gammas: Composite variance of every node
        budgets: Local and network energy budgets
        valid_inequalities: Add the self-consultation, delivery and relay-order rows

    Returns:
        MilpModel tagged "p2"

    Raises:
        TopologyError: topology is not simple
    """
    if not net.is_simple:
        raise TopologyError("multi-hop planning needs a simple topology (unique directed paths)")
    n = net.node_count
    if budgets.N != n:
        raise ValueError(f"expected {n} local budgets, got {budgets.N}")
    index = net.index

    model = MilpModel(
        variant="p2",
        candidates=index.multi_hop,
        gammas=_check_gammas(gammas, n),
        costs=net.costs,
        budgets=budgets,
        valid_inequalities=valid_inequalities,
    )
    _declare_selection(model)

    for k in range(n):
        for l in sorted(index.multi_hop[k]):
            model.pi[(l, k)] = model.add_variable(f"pi_{l}_{k}", VarKind.BINARY, 0, 1)

    for (l, k) in sorted(model.pi):
        _add_relay_coupling(model, l, k, _served_through(net, l, k), float(len(index.reachable[l])))
    _add_budget_rows(model)

    if valid_inequalities:
        _add_consult_self(model)
        _add_relay_implies_delivery(model, net)
        for (l, k), pi_var in sorted(model.pi.items()):
            if l == k:
                continue
            for m in sorted({l} | path_indicator(net, l, k)):
                model.add_constraint({pi_var: 1.0, model.pi[(l, m)]: -1.0}, Sense.LE, 0.0, "valid_relay_order")

    logger.debug(f"P2 model: {model.num_variables} variables, {model.num_constraints} rows")
    return model


def build_p3(net: Network, gammas: Sequence[float], budgets: Budgets,
             valid_inequalities: bool = True) -> MilpModel:
    """
    Two-hop planning model on any topology.

    Relay variables exist only for relay customers. A one-hop consultation
    needs the origin's own broadcast; a two-hop consultation additionally
    needs a relay server of the origin that is a physical neighbor of the
    consulting node.

    Args:
        net: Network
        gammas: Composite variance of every node
        budgets: Local and network energy budgets
        valid_inequalities: Add the self-consultation and delivery rows (plus
            the unique-path coupling rows on simple topologies)

    Returns:
        MilpModel tagged "p3"
    """
    n = net.node_count
    if budgets.N != n:
        raise ValueError(f"expected {n} local budgets, got {budgets.N}")
    index = net.index

    model = MilpModel(
        variant="p3",
        candidates=index.two_hop,
        gammas=_check_gammas(gammas, n),
        costs=net.costs,
        budgets=budgets,
        valid_inequalities=valid_inequalities,
    )
    _declare_selection(model)

    for k in range(n):
        for l in sorted(index.relay_customers[k]):
            model.pi[(l, k)] = model.add_variable(f"pi_{l}_{k}", VarKind.BINARY, 0, 1)

    for k in range(n):
        for l in sorted(index.two_hop[k] - {k}):
            model.add_constraint({model.delta[(l, k)]: 1.0, model.pi[(l, l)]: -1.0},
                                 Sense.LE, 0.0, "origin_broadcast")
            if l in index.physical[k]:
                continue
            servers = sorted(index.relay_servers[l] & (index.physical[k] - {k}))
            model.add_constraint({model.delta[(l, k)]: 1.0, **{model.pi[(l, j)]: -1.0 for j in servers}},
                                 Sense.LE, 0.0, "two_hop_relay")

    for (l, k), pi_var in sorted(model.pi.items()):
        if l != k:
            model.add_constraint({pi_var: 1.0, model.pi[(l, l)]: -1.0}, Sense.LE, 0.0, "relay_received")
    _add_budget_rows(model)

    if valid_inequalities:
        _add_consult_self(model)
        _add_relay_implies_delivery(model, net)
        if net.is_simple:
            for (l, k) in sorted(model.pi):
                served = _served_through(net, l, k, within=index.two_hop)
                _add_relay_coupling(model, l, k, served, float(len(served)))

    logger.debug(f"P3 model: {model.num_variables} variables, {model.num_constraints} rows")
    return model


def build_model(variant: str, net: Network, gammas: Sequence[float], budgets: Budgets,
                valid_inequalities: bool = True) -> MilpModel:
    """Dispatch to build_p2 / build_p3."""
    variant = variant.lower()
    if variant == "p2":
        return build_p2(net, gammas, budgets, valid_inequalities)
    if variant == "p3":
        return build_p3(net, gammas, budgets, valid_inequalities)
    raise ValueError(f"variant must be one of {VARIANTS}, got: {variant}")
