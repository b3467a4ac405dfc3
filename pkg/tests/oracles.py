"""Reference builders and a brute-force planning oracle shared by the tests."""

import itertools
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from mhdiffusion.core.datamodel import GlobalModel, NodeProfile
from mhdiffusion.core.milp import Budgets, MilpModel
from mhdiffusion.core.topology import Network


def chain(n: int, costs: Optional[Sequence[float]] = None) -> Network:
    """Undirected path 0 - 1 - ... - n-1."""
    return Network.from_undirected(n, [(k, k + 1) for k in range(n - 1)], broadcast_cost=costs)


def star(leaves: int, costs: Optional[Sequence[float]] = None) -> Network:
    """Undirected star with center 0."""
    return Network.from_undirected(leaves + 1, [(0, k) for k in range(1, leaves + 1)], broadcast_cost=costs)


def ring(n: int) -> Network:
    return Network.from_undirected(n, [(k, (k + 1) % n) for k in range(n)])


def scalar_model(sigma_v2: Sequence[float], mu: float = 0.1, r: float = 1.0,
                 w_true: float = 1.0, budgets: Optional[Sequence[float]] = None,
                 network_budget: float = float("inf")) -> GlobalModel:
    """M = 1 model with one regressor power for every node."""
    budgets = budgets if budgets is not None else [float("inf")] * len(sigma_v2)
    profiles = [NodeProfile(sigma_v2=s, R_u=np.array([[r]]), mu=mu, energy_budget=c)
                for s, c in zip(sigma_v2, budgets)]
    return GlobalModel(w_true=np.array([w_true]), profiles=tuple(profiles), network_budget=network_budget)


def scalar_steady_msd(mu: float, sigma_v2: float, r: float) -> float:
    """Steady-state MSD of one isolated scalar LMS node."""
    return mu ** 2 * sigma_v2 * r / (1.0 - (1.0 - mu * r) ** 2)


def random_graph(n: int, rng: np.random.Generator, extra_edges: int = 2,
                 costs: Optional[Sequence[float]] = None) -> Network:
    """Connected undirected graph: a random recursive tree plus a few extra links."""
    links = {(int(rng.integers(k)), k) for k in range(1, n)}
    for _ in range(extra_edges):
        l, k = sorted(int(v) for v in rng.choice(n, size=2, replace=False))
        links.add((l, k))
    return Network.from_undirected(n, sorted(links), broadcast_cost=costs)


def _holders(net: Network, relays: np.ndarray, origin: int) -> set:
    """Nodes that end up holding the origin's estimate when `relays` rebroadcast it."""
    holders = {origin}
    frontier = [origin]
    while frontier:
        node = frontier.pop()
        if not relays[node]:
            continue
        for j in np.flatnonzero(net.adjacency[node]):
            if int(j) not in holders:
                holders.add(int(j))
                frontier.append(int(j))
    return holders


def _origin_options(model: MilpModel, net: Network, origin: int) -> list:
    """Every valid relay set of one origin with the consultations it enables."""
    n = model.N
    allowed = sorted(k for (l, k) in model.pi if l == origin)
    options = []
    for size in range(len(allowed) + 1):
        for subset in itertools.combinations(allowed, size):
            relays = np.zeros(n, dtype=bool)
            relays[list(subset)] = True
            holders = _holders(net, relays, origin)
            if any(k not in holders for k in subset):
                continue
            consult = np.array([k == origin or (k in holders and origin in model.candidates[k])
                                for k in range(n)])
            options.append((relays, consult))
    return options


def enumerate_optimum(model: MilpModel, net: Network,
                      budgets: Optional[Budgets] = None) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    Best plan over every combination of per-origin relay sets.

    Each node consults every candidate whose estimate reaches it, which is
    optimal for a fixed relay map since consulting more never raises the
    objective. Branches that break a budget are cut early.

    Returns:
        (objective, delta, pi)
    """
    budgets = budgets or model.budgets
    n = model.N
    inv = 1.0 / model.gammas
    local = budgets.local_array + 1e-9
    network = budgets.network + 1e-9
    options = [_origin_options(model, net, l) for l in range(n)]
    best = {"value": float("inf"), "choice": None}

    def search(origin: int, spent: np.ndarray, weight: np.ndarray, choice: list):
        if origin == n:
            value = float(np.sum(1.0 / weight))
            if value < best["value"] - 1e-12:
                best["value"], best["choice"] = value, list(choice)
            return
        for relays, consult in options[origin]:
            cost = spent + net.costs * relays
            if np.any(cost > local) or cost.sum() > network:
                continue
            choice.append((relays, consult))
            search(origin + 1, cost, weight + inv[origin] * consult, choice)
            choice.pop()

    search(0, np.zeros(n), np.zeros(n), [])
    if best["choice"] is None:
        return float("inf"), None, None
    pi = np.array([relays for relays, _ in best["choice"]])
    delta = np.array([consult for _, consult in best["choice"]])
    return best["value"], delta, pi


def consulted_map(delta: np.ndarray) -> Dict[int, frozenset]:
    return {k: frozenset(np.flatnonzero(delta[:, k]).tolist()) for k in range(delta.shape[0])}
