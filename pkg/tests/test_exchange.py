"""Unit tests for in-iteration estimate exchange

Tests verify that:
1. Budgets translate into per-iteration broadcast capacity
2. Static plans expose their relay hops, delays and energy ledger
3. Delayed combination renormalizes over the arrived estimates
4. Budget-driven relaying picks the smallest-variance estimates first

Usage:
    pytest tests/test_exchange.py -v
"""

import os
import sys

import numpy as np
import pytest

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from mhdiffusion.core.optimizer import NeighborSelection, full_consultation_selection, one_hop_selection
from mhdiffusion_bench.exchange import (
    NO_PATH,
    DelayBuffer,
    RelayState,
    algorithm2_async_step,
    algorithm2_step,
    broadcast_capacity,
    combine_async,
    energy_ledger,
    plan_broadcasts,
    plan_delays,
    relay_hops,
)
from tests.oracles import chain, star


def _psi(runs, n, m, seed=0):
    return np.random.default_rng(seed).normal(size=(runs, n, m))


def test_broadcast_capacity():
    capacity = broadcast_capacity([0.0, 2.5, np.inf, 3.0], [1.0, 1.0, 1.0, 0.0])
    np.testing.assert_array_equal(capacity, [0, 2, 4, 4])
    assert capacity.dtype.kind == "i"


def test_broadcast_capacity_absorbs_rounding():
    capacity = broadcast_capacity([0.3, 0.7, 0.0, 0.0], [0.1, 0.35, 1.0, 1.0])
    np.testing.assert_array_equal(capacity, [3, 2, 0, 0])
    # Never more broadcasts than there are estimates to send
    np.testing.assert_array_equal(broadcast_capacity([0.3, 0.7], [0.1, 0.35]), [2, 2])


def test_energy_ledger_and_plan_broadcasts():
    net = chain(3, costs=[0.5, 2.0, 1.0])
    sel = one_hop_selection(net, np.ones(3))

    np.testing.assert_array_equal(plan_broadcasts(sel), [1, 1, 1])
    np.testing.assert_allclose(energy_ledger(plan_broadcasts(sel), net.costs), [0.5, 2.0, 1.0])
    np.testing.assert_allclose(energy_ledger([[1, 2, 0]], net.costs), [[0.5, 4.0, 0.0]])


def test_relay_hops_and_delays():
    net = chain(3)
    one_hop = one_hop_selection(net, np.ones(3))
    hops = relay_hops(net, one_hop.pi)
    assert hops[0, 0] == 0
    assert hops[0, 1] == 1
    assert hops[0, 2] == NO_PATH

    full = full_consultation_selection(net, np.ones(3))
    assert relay_hops(net, full.pi)[0, 2] == 2
    delays = plan_delays(full, net)
    assert delays[0, 2] == 1
    assert delays[2, 0] == 1
    assert delays[0, 1] == 0
    np.testing.assert_array_equal(np.diag(delays), 0)


def test_plan_delays_rejects_unserved_consultation():
    net = chain(3)
    delta = np.eye(3, dtype=bool)
    delta[0, 2] = True
    sel = NeighborSelection.build(delta, np.eye(3, dtype=bool), net.costs, np.ones(3))
    with pytest.raises(ValueError):
        plan_delays(sel, net)


def test_delay_buffer():
    buffer = DelayBuffer(2, (1,))
    assert buffer.get(0) is None

    for value in (1.0, 2.0, 3.0):
        buffer.push(np.array([value]))
    assert buffer.get(0)[0] == 3.0
    assert buffer.get(2)[0] == 1.0
    assert buffer.get(3) is None

    buffer.push(np.array([4.0]))
    assert buffer.get(2)[0] == 2.0
    assert buffer.pushed == 4


def _async_weights():
    weights = np.eye(3)
    weights[:, 2] = [0.2, 0.3, 0.5]
    delays = np.zeros((3, 3), dtype=int)
    delays[0, 2] = 1
    return weights, delays


def test_combine_async_renormalizes_missing_estimates():
    weights, delays = _async_weights()
    old, new = _psi(2, 3, 2, seed=1), _psi(2, 3, 2, seed=2)
    buffer = DelayBuffer(1, old.shape)

    buffer.push(old)
    first = combine_async(buffer, weights, delays)
    np.testing.assert_allclose(first[:, 2], (0.3 * old[:, 1] + 0.5 * old[:, 2]) / 0.8)
    np.testing.assert_allclose(first[:, 0], old[:, 0])

    buffer.push(new)
    second = combine_async(buffer, weights, delays)
    np.testing.assert_allclose(second[:, 2], 0.2 * old[:, 0] + 0.3 * new[:, 1] + 0.5 * new[:, 2])


def test_combine_async_without_delays_matches_synchronous():
    weights, _ = _async_weights()
    psi = _psi(4, 3, 2)
    buffer = DelayBuffer(0, psi.shape)
    buffer.push(psi)

    combined = combine_async(buffer, weights, np.zeros((3, 3), dtype=int))
    np.testing.assert_array_equal(combined, np.einsum("lk,rlm->rkm", weights, psi))


def test_algorithm2_chain_relays_two_hops():
    net = chain(3)
    state = RelayState.empty(1, 3)
    gamma = np.ones((1, 3))
    capacity = np.array([3, 3, 3])

    first = algorithm2_step(state, _psi(1, 3, 1), gamma, capacity, 2, net)
    np.testing.assert_array_equal(first.broadcasts[0], [1, 1, 1])
    assert not first.mask[0, 0, 2]
    np.testing.assert_array_equal(state.hops[0, 0, 1], 1)

    second = algorithm2_step(state, _psi(1, 3, 1, seed=3), gamma, capacity, 2, net)
    np.testing.assert_array_equal(second.broadcasts[0], [2, 3, 2])
    assert second.mask.all()
    assert state.hops[0, 0, 2] == 2


def test_one_hop_exchange_broadcasts_own_estimate_only():
    net = chain(3)
    state = RelayState.empty(2, 3)
    gamma = np.ones((2, 3))
    capacity = np.array([3, 3, 3])

    for seed in range(3):
        result = algorithm2_step(state, _psi(2, 3, 1, seed=seed), gamma, capacity, 1, net)
        np.testing.assert_array_equal(result.broadcasts, 1)
        assert not result.mask[:, 0, 2].any()


def test_zero_capacity_keeps_intermediate_estimates():
    net = chain(3)
    psi = _psi(2, 3, 2)
    result = algorithm2_step(RelayState.empty(2, 3), psi, np.ones((2, 3)), np.zeros(3, dtype=int), 2, net)

    np.testing.assert_array_equal(result.broadcasts, 0)
    np.testing.assert_allclose(result.estimates, psi)


def test_star_center_relays_smallest_variance():
    """Center affords one relay: the smallest carried variance wins, lowest index on ties."""
    net = star(3)
    state = RelayState.empty(1, 4)
    gamma = np.array([[5.0, 3.0, 1.0, 1.0]])
    capacity = np.array([2, 1, 1, 1])

    algorithm2_step(state, _psi(1, 4, 1), gamma, capacity, 2, net)
    result = algorithm2_step(state, _psi(1, 4, 1, seed=1), gamma, capacity, 2, net)

    assert result.relays[0, 2, 0]
    assert not result.relays[0, 3, 0]
    assert not result.relays[0, 1, 0]
    assert result.broadcasts[0, 0] == 2
    assert result.mask[0, 2, 1] and result.mask[0, 2, 3]
    assert not result.mask[0, 3, 1]


def test_constant_estimates_are_preserved():
    net = star(3)
    state = RelayState.empty(2, 4)
    psi = np.full((2, 4, 3), 1.5)
    gamma = np.random.default_rng(0).uniform(0.5, 2.0, size=(2, 4))

    for _ in range(3):
        result = algorithm2_step(state, psi, gamma, np.array([4, 4, 4, 4]), 2, net)
        np.testing.assert_allclose(result.estimates, psi)


def test_async_relay_delivers_previous_estimate():
    """Node 2 combines node 0's estimate from the previous iteration via node 1."""
    net = chain(3)
    state = RelayState.empty(1, 3, 1)
    gamma = np.ones((1, 3))
    capacity = np.array([3, 3, 3])
    psi_a, psi_b = _psi(1, 3, 1, seed=4), _psi(1, 3, 1, seed=5)

    first = algorithm2_async_step(state, psi_a, gamma, capacity, 2, net)
    assert not first.mask[0, 0, 2]

    second = algorithm2_async_step(state, psi_b, gamma, capacity, 2, net)
    assert second.mask[0, 0, 2]
    np.testing.assert_allclose(second.estimates[0, 2], (psi_a[0, 0] + psi_b[0, 1] + psi_b[0, 2]) / 3.0)
    assert state.hops[0, 0, 2] == 2


def test_async_one_hop_matches_synchronous():
    net = chain(4)
    sync_state, async_state = RelayState.empty(2, 4), RelayState.empty(2, 4, 2)
    gamma = np.random.default_rng(1).uniform(0.5, 2.0, size=(2, 4))
    capacity = np.array([2, 2, 2, 2])

    for seed in range(3):
        psi = _psi(2, 4, 2, seed=seed)
        sync = algorithm2_step(sync_state, psi, gamma, capacity, 1, net)
        asyn = algorithm2_async_step(async_state, psi, gamma, capacity, 1, net)
        np.testing.assert_array_equal(sync.mask, asyn.mask)
        np.testing.assert_allclose(sync.estimates, asyn.estimates, rtol=1e-12)


if __name__ == "__main__":
    pytest.main([__file__, "-v", "--tb=short"])
