"""Unit tests for the network model and neighborhood indexes

Tests verify that:
1. Physical, multi-hop and two-hop neighborhoods follow the edge directions
2. Relay customers / servers only keep neighbors that extend coverage
3. Simple-topology detection and path indicators agree with the graph
4. Synthetic networks are connected and carry the documented costs

Usage:
    pytest tests/test_topology.py -v
"""

import itertools
import os
import sys

import numpy as np
import networkx as nx
import pytest

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from mhdiffusion.core.topology import (
    Network,
    h_hop_neighbors,
    is_simple_topology,
    path_indicator,
    random_geometric_network,
    random_tree,
)
from mhdiffusion.exceptions import ConfigError, TopologyError
from tests.oracles import chain, ring, star


def test_chain_neighborhoods():
    """3-node chain: every node reaches every other, 0 and 2 are two hops apart."""
    net = chain(3)
    index = net.index

    assert index.physical[0] == {0, 1}
    assert index.physical[1] == {0, 1, 2}
    assert index.multi_hop[0] == {0, 1, 2}
    assert index.two_hop[2] == {0, 1, 2}
    assert index.direct_reach[1] == {0, 2}
    assert index.reachable[0] == {1, 2}
    assert index.hop_distance[(0, 2)] == 2
    assert index.hop_distance[(1, 0)] == 1


def test_directed_edges_are_one_way():
    """An edge (l, k) lets l transmit to k only."""
    net = Network(3, frozenset({(0, 1), (1, 2)}))

    assert net.index.multi_hop[2] == {0, 1, 2}
    assert net.index.multi_hop[0] == {0}
    assert net.index.reachable[2] == frozenset()
    assert net.adjacency[0, 1] and not net.adjacency[1, 0]


def test_h_hop_neighbors_on_long_chain():
    net = chain(5)

    assert h_hop_neighbors(net, 0, 1) == {0, 1}
    assert h_hop_neighbors(net, 0, 2) == {0, 1, 2}
    assert h_hop_neighbors(net, 2, 2) == {0, 1, 2, 3, 4}
    with pytest.raises(ValueError):
        h_hop_neighbors(net, 0, 0)


def test_relay_customers_and_servers_on_chain():
    """The middle node relays for both ends; the ends relay for nobody."""
    index = chain(3).index

    assert index.relay_customers[1] == {0, 1, 2}
    assert index.relay_customers[0] == {0}
    assert index.relay_customers[2] == {2}
    assert index.relay_servers[0] == {1}
    assert index.relay_servers[2] == {1}
    assert index.relay_servers[1] == frozenset()


def test_relay_customers_on_star():
    """Leaves reach only the center, so only the center relays."""
    index = star(3).index

    assert index.relay_customers[0] == {0, 1, 2, 3}
    for leaf in (1, 2, 3):
        assert index.relay_customers[leaf] == {leaf}
        assert index.relay_servers[leaf] == {0}
    assert index.relay_servers[0] == frozenset()


def test_relay_customers_on_triangle():
    """In a complete graph nobody extends anybody's coverage."""
    net = Network.from_undirected(3, [(0, 1), (1, 2), (0, 2)])

    for k in range(3):
        assert net.index.relay_customers[k] == {k}
        assert net.index.relay_servers[k] == frozenset()


def _random_digraph(rng, n, p=0.4):
    edges = {(l, k) for l in range(n) for k in range(n) if l != k and rng.random() < p}
    return Network(n, frozenset(edges))


@pytest.mark.parametrize("seed", range(20))
def test_relay_sets_match_two_hop_path_enumeration(seed):
    """l is a relay customer of k when some path l -> k -> j cannot be shortcut by l -> j."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 8))
    net = _random_digraph(rng, n)
    edges = net.edges

    customers = [{k} for k in range(n)]
    servers = [set() for _ in range(n)]
    for l, k, j in itertools.permutations(range(n), 3):
        if (l, k) in edges and (k, j) in edges and (l, j) not in edges:
            customers[k].add(l)
        if (k, l) in edges and (l, j) in edges and (k, j) not in edges:
            servers[k].add(l)

    for k in range(n):
        assert net.index.relay_customers[k] == customers[k]
        assert net.index.relay_servers[k] == servers[k]


@pytest.mark.parametrize("seed", range(10))
def test_is_simple_topology_matches_path_count(seed):
    rng = np.random.default_rng(50 + seed)
    n = int(rng.integers(2, 6))
    net = _random_digraph(rng, n, p=0.35)
    graph = nx.DiGraph(list(net.edges))
    graph.add_nodes_from(range(n))
    expected = all(len(list(nx.all_simple_paths(graph, l, k))) <= 1
                   for l in range(n) for k in range(n) if l != k)

    assert is_simple_topology(net) == expected


def test_is_simple_topology_examples():
    assert is_simple_topology(Network(1, frozenset()))
    assert is_simple_topology(random_tree(6, np.random.default_rng(3)))
    # Directed 3-cycle plus the chord 0 -> 2: two routes from 0 to 2
    assert not is_simple_topology(Network(3, frozenset({(0, 1), (1, 2), (2, 0), (0, 2)})))


def test_simple_topology_detection():
    assert chain(4).is_simple
    assert star(3).is_simple
    assert not ring(4).is_simple


def test_path_indicator():
    net = chain(4)

    assert path_indicator(net, 0, 3) == {1, 2}
    assert path_indicator(net, 3, 1) == {2}
    assert path_indicator(net, 0, 1) == frozenset()
    with pytest.raises(TopologyError):
        path_indicator(ring(4), 0, 2)
    with pytest.raises(TopologyError):
        path_indicator(Network(2, frozenset({(0, 1)})), 1, 0)


@pytest.mark.parametrize("edges", [
    [(0, 0)],
    [(0, 3)],
    [(-1, 1)],
])
def test_invalid_edges_rejected(edges):
    with pytest.raises(TopologyError):
        Network(3, frozenset(edges))


def test_invalid_costs_rejected():
    with pytest.raises(TopologyError):
        Network(2, frozenset({(0, 1)}), broadcast_cost=(1.0,))
    with pytest.raises(TopologyError):
        Network(2, frozenset({(0, 1)}), broadcast_cost=(1.0, -2.0))


def test_squared_distance_costs_from_dict():
    """Cost = squared distance to the farthest out-neighbor."""
    net = Network.from_dict({
        "node_count": 3,
        "edges": [[0, 1], [1, 2]],
        "undirected": True,
        "broadcast_cost": "squared_distance",
        "coordinates": [[0, 0], [1, 0], [3, 0]],
    })

    assert net.broadcast_cost == (1.0, 4.0, 4.0)
    assert len(net.edges) == 4


def test_network_file_errors():
    with pytest.raises(ConfigError):
        Network.from_dict({"edges": [[0, 1]]})
    with pytest.raises(ConfigError):
        Network.from_dict({"node_count": 2, "edges": [[0, 1]], "broadcast_cost": "squared_distance"})
    with pytest.raises(ConfigError):
        Network.from_dict({"node_count": 2, "edges": [[0, 5]]})


def test_network_file_round_trip(tmp_path):
    net = chain(3, costs=[1.0, 2.0, 0.5])
    path = tmp_path / "net.json"
    net.to_json(path)

    loaded = Network.from_json(path)
    assert loaded.edges == net.edges
    assert loaded.broadcast_cost == net.broadcast_cost


def test_random_tree_is_a_connected_tree():
    net = random_tree(8, np.random.default_rng(3))

    assert net.node_count == 8
    assert len(net.edges) == 2 * 7
    assert net.is_simple
    assert nx.is_strongly_connected(net.graph)
    assert net.broadcast_cost == tuple([1.0] * 8)


def test_random_geometric_network_is_connected():
    net = random_geometric_network(20, np.random.default_rng(11))

    assert nx.is_strongly_connected(net.graph)
    assert net.coordinates is not None
    assert all(c > 0 for c in net.broadcast_cost)


if __name__ == "__main__":
    pytest.main([__file__, "-v", "--tb=short"])
