"""Directed network model and the neighborhood constructions used for planning.

An edge (l, k) means node l transmits directly to node k. Nodes are labelled
0..N-1. Every index is computed once and cached on the (immutable) Network.
"""

import itertools
import json
import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np

from mhdiffusion.exceptions import ConfigError, TopologyError

logger = logging.getLogger(__name__)

NodeSet = FrozenSet[int]
Edge = Tuple[int, int]


@dataclass(frozen=True)
class NeighborhoodIndex:
    """Per-node neighborhood families of a network.

    Attributes:
        physical: {k} plus in-neighbors of k
        multi_hop: {k} plus every node with a directed path to k
        two_hop: {k} plus nodes with a path of length <= 2 to k
        direct_reach: out-neighbors of k
        reachable: nodes reachable from k (k excluded)
        relay_customers: {k} plus in-neighbors l for which k reaches someone l does not
        relay_servers: out-neighbors l that reach someone k does not
        hop_distance: shortest directed hop count for every connected ordered pair
    """

    physical: Tuple[NodeSet, ...]
    multi_hop: Tuple[NodeSet, ...]
    two_hop: Tuple[NodeSet, ...]
    direct_reach: Tuple[NodeSet, ...]
    reachable: Tuple[NodeSet, ...]
    relay_customers: Tuple[NodeSet, ...]
    relay_servers: Tuple[NodeSet, ...]
    hop_distance: Dict[Edge, int]

    def h_hop(self, k: int, h: int) -> NodeSet:
        """Nodes with a directed path of length <= h to k, plus k."""
        if h < 1:
            raise ValueError(f"h must be >= 1, got: {h}")
        return frozenset(
            l for l in self.multi_hop[k]
            if l == k or self.hop_distance[(l, k)] <= h
        )


@dataclass(frozen=True)
class Network:
    """Directed sensor network with per-node broadcast cost."""

    node_count: int
    edges: FrozenSet[Edge]
    broadcast_cost: Optional[Tuple[float, ...]] = None
    coordinates: Optional[Tuple[Tuple[float, float], ...]] = None

    def __post_init__(self):
        """Normalize containers and validate the graph."""
        if int(self.node_count) < 1:
            raise TopologyError(f"node_count must be >= 1, got: {self.node_count}")
        object.__setattr__(self, "node_count", int(self.node_count))

        edges = frozenset((int(l), int(k)) for l, k in self.edges)
        for l, k in edges:
            if l == k:
                raise TopologyError(f"self-loop edge ({l}, {k}) is not allowed")
            if not (0 <= l < self.node_count and 0 <= k < self.node_count):
                raise TopologyError(f"edge ({l}, {k}) references a node outside 0..{self.node_count - 1}")
        object.__setattr__(self, "edges", edges)

        if self.broadcast_cost is None:
            costs = tuple(1.0 for _ in range(self.node_count))
        else:
            costs = tuple(float(c) for c in self.broadcast_cost)
        if len(costs) != self.node_count:
            raise TopologyError(f"broadcast_cost has {len(costs)} entries for {self.node_count} nodes")
        if any(c < 0 or not np.isfinite(c) for c in costs):
            raise TopologyError(f"broadcast costs must be finite and >= 0, got: {costs}")
        object.__setattr__(self, "broadcast_cost", costs)

        if self.coordinates is not None:
            coords = tuple((float(x), float(y)) for x, y in self.coordinates)
            if len(coords) != self.node_count:
                raise TopologyError(f"coordinates has {len(coords)} entries for {self.node_count} nodes")
            object.__setattr__(self, "coordinates", coords)

    @classmethod
    def from_undirected(cls, node_count: int, edges: Iterable[Edge],
                        broadcast_cost: Optional[Sequence[float]] = None,
                        coordinates: Optional[Sequence[Tuple[float, float]]] = None) -> "Network":
        """Build a network where every undirected link becomes two directed edges."""
        directed = set()
        for l, k in edges:
            directed.add((l, k))
            directed.add((k, l))
        return cls(node_count, frozenset(directed), broadcast_cost,
                   None if coordinates is None else tuple(coordinates))

    @classmethod
    def from_dict(cls, data: dict, source: Optional[str] = None) -> "Network":
        """Build a network from its file representation.

        Example JSON:
            {
                "node_count": 3,
                "edges": [[0, 1], [1, 2]],
                "undirected": true,
                "broadcast_cost": "squared_distance",
                "coordinates": [[0, 0], [1, 0], [2, 0]]
            }
        """
        try:
            node_count = int(data["node_count"])
            edges = [tuple(edge) for edge in data.get("edges", [])]
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"invalid network description: {e}", source=source) from e

        coordinates = data.get("coordinates")
        cost_spec = data.get("broadcast_cost")
        undirected = bool(data.get("undirected", False))

        try:
            if undirected:
                net = cls.from_undirected(node_count, edges, coordinates=coordinates)
            else:
                net = cls(node_count, frozenset(edges),
                          coordinates=None if coordinates is None else tuple(coordinates))

            if cost_spec == "squared_distance":
                if net.coordinates is None:
                    raise ConfigError("squared_distance costs need coordinates", source=source)
                net = net.with_costs(squared_distance_costs(net))
            elif cost_spec is not None:
                net = net.with_costs(cost_spec)
        except TopologyError as e:
            raise ConfigError(str(e), source=source) from e

        return net

    @classmethod
    def from_json(cls, filepath: Union[str, Path]) -> "Network":
        """Load a network file."""
        with open(filepath, "r") as f:
            try:
                data = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigError(e.msg, line=e.lineno, source=str(filepath)) from e
        return cls.from_dict(data, source=str(filepath))

    def to_dict(self) -> dict:
        """File representation (directed edge list)."""
        data = {
            "node_count": self.node_count,
            "edges": [list(edge) for edge in sorted(self.edges)],
            "undirected": False,
            "broadcast_cost": list(self.broadcast_cost),
        }
        if self.coordinates is not None:
            data["coordinates"] = [list(xy) for xy in self.coordinates]
        return data

    def to_json(self, filepath: Union[str, Path]):
        """Save the network file."""
        with open(filepath, "w") as f:
            json.dump(self.to_dict(), f, indent=2)

    def with_costs(self, broadcast_cost: Sequence[float]) -> "Network":
        """Copy of this network with other broadcast costs."""
        return Network(self.node_count, self.edges, tuple(broadcast_cost), self.coordinates)

    @cached_property
    def graph(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(range(self.node_count))
        graph.add_edges_from(sorted(self.edges))
        return graph

    @cached_property
    def adjacency(self) -> np.ndarray:
        """Boolean matrix adj[l, k] = True iff l transmits directly to k."""
        adj = np.zeros((self.node_count, self.node_count), dtype=bool)
        for l, k in self.edges:
            adj[l, k] = True
        return adj

    @cached_property
    def costs(self) -> np.ndarray:
        return np.asarray(self.broadcast_cost, dtype=float)

    @cached_property
    def index(self) -> NeighborhoodIndex:
        return build_index(self)

    @cached_property
    def is_simple(self) -> bool:
        return _count_simple(self)

    @cached_property
    def shortest_paths(self) -> Dict[int, Dict[int, List[int]]]:
        return dict(nx.all_pairs_shortest_path(self.graph))


def build_index(net: Network) -> NeighborhoodIndex:
    """
    Compute all neighborhood families of a network.

    Args:
        net: Network

    Returns:
        NeighborhoodIndex with one frozenset per node and family
    """
    graph = net.graph
    n = net.node_count
    lengths = dict(nx.all_pairs_shortest_path_length(graph))

    hop_distance = {
        (l, k): d
        for l, row in lengths.items()
        for k, d in row.items()
        if l != k
    }

    physical = tuple(frozenset({k, *graph.predecessors(k)}) for k in range(n))
    multi_hop = tuple(frozenset({k, *nx.ancestors(graph, k)}) for k in range(n))
    two_hop = tuple(
        frozenset(l for l in multi_hop[k] if l == k or hop_distance[(l, k)] <= 2)
        for k in range(n)
    )
    direct_reach = tuple(frozenset(graph.successors(k)) for k in range(n))
    reachable = tuple(frozenset(nx.descendants(graph, k)) - {k} for k in range(n))

    # A neighbor l is a relay customer of k when k reaches someone other than l
    # that l cannot reach directly; servers are the mirror image.
    relay_customers = tuple(
        frozenset({k} | {
            l for l in physical[k] - {k}
            if not (direct_reach[k] - {l}) <= direct_reach[l]
        })
        for k in range(n)
    )
    relay_servers = tuple(
        frozenset(
            l for l in direct_reach[k]
            if not (direct_reach[l] - {k}) <= direct_reach[k]
        )
        for k in range(n)
    )

    return NeighborhoodIndex(
        physical=physical,
        multi_hop=multi_hop,
        two_hop=two_hop,
        direct_reach=direct_reach,
        reachable=reachable,
        relay_customers=relay_customers,
        relay_servers=relay_servers,
        hop_distance=hop_distance,
    )


def _count_simple(net: Network) -> bool:
    graph = net.graph
    for l, j in itertools.permutations(range(net.node_count), 2):
        paths = itertools.islice(nx.all_simple_paths(graph, l, j), 2)
        if sum(1 for _ in paths) > 1:
            logger.debug(f"Two simple paths found from {l} to {j}")
            return False
    return True


def is_simple_topology(net: Network) -> bool:
    """True iff every ordered node pair is joined by at most one directed simple path."""
    return net.is_simple


def path_indicator(net: Network, l: int, j: int) -> NodeSet:
    """
    Nodes strictly between l and j on the unique directed path l -> j.

    Args:
        net: Network with a simple topology
        l: Origin node
        j: Destination node, reachable from l

    Returns:
        Frozenset of intermediate relays (l and j excluded)

    Raises:
        TopologyError: topology not simple, or j not reachable from l
    """
    if not net.is_simple:
        raise TopologyError("path indicators need a simple topology (unique directed paths)")
    if l == j or j not in net.index.reachable[l]:
        raise TopologyError(f"node {j} is not reachable from node {l}")
    return frozenset(net.shortest_paths[l][j][1:-1])


def h_hop_neighbors(net: Network, k: int, h: int) -> NodeSet:
    """Nodes with a directed path of length <= h into k, plus k itself."""
    return net.index.h_hop(k, h)


def squared_distance_costs(net: Network) -> Tuple[float, ...]:
    """
    Broadcast cost = squared distance to the farthest directly reachable neighbor.

    Args:
        net: Network with coordinates

    Returns:
        One cost per node (0 for nodes without out-neighbors)
    """
    if net.coordinates is None:
        raise TopologyError("squared-distance costs need node coordinates")
    coords = np.asarray(net.coordinates, dtype=float)
    costs = []
    for k in range(net.node_count):
        targets = sorted(net.graph.successors(k))
        if not targets:
            costs.append(0.0)
            continue
        sq = np.sum((coords[targets] - coords[k]) ** 2, axis=1)
        costs.append(float(np.max(sq)))
    return tuple(costs)


def random_tree(node_count: int, rng: np.random.Generator,
                broadcast_cost: Optional[Sequence[float]] = None) -> Network:
    """
    Random recursive tree: node i attaches to a uniformly chosen earlier node.

    Args:
        node_count: Number of nodes
        rng: Random generator
        broadcast_cost: Optional per-node costs (unit costs by default)

    Returns:
        Undirected tree as a Network
    """
    edges = [(int(rng.integers(0, i)), i) for i in range(1, node_count)]
    return Network.from_undirected(node_count, edges, broadcast_cost)


def random_geometric_network(node_count: int, rng: np.random.Generator, side: float = 10.0,
                             radius: float = 3.0, growth: float = 1.1,
                             max_attempts: int = 200) -> Network:
    """
    Nodes placed uniformly in a square, linked when within communication radius.

    The radius grows by `growth` until the graph is connected. Broadcast costs
    are squared distances to the farthest neighbor.

    Args:
        node_count: Number of nodes
        rng: Random generator
        side: Side length of the deployment square
        radius: Initial communication radius
        growth: Radius multiplier applied while disconnected
        max_attempts: Give up after this many radius increases

    Returns:
        Connected undirected Network with coordinates and squared-distance costs
    """
    positions = rng.uniform(0.0, side, size=(node_count, 2))
    diff = positions[:, None, :] - positions[None, :, :]
    dist = np.sqrt(np.sum(diff ** 2, axis=2))

    for _ in range(max_attempts):
        links = [
            (l, k) for l, k in itertools.combinations(range(node_count), 2)
            if dist[l, k] <= radius
        ]
        undirected = nx.Graph()
        undirected.add_nodes_from(range(node_count))
        undirected.add_edges_from(links)
        if nx.is_connected(undirected):
            net = Network.from_undirected(node_count, links,
                                          coordinates=[tuple(p) for p in positions])
            logger.debug(f"Geometric network connected at radius {radius:.3f} with {len(links)} links")
            return net.with_costs(squared_distance_costs(net))
        radius *= growth

    raise TopologyError(f"could not connect {node_count} nodes within {max_attempts} radius increases")
