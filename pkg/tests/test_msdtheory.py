"""Unit tests for the theoretical MSD recursion

Tests verify that:
1. Transient and steady-state MSD match the scalar closed forms
2. The upper bounds dominate the steady state
3. Convergence metrics follow the 90% decrease definition

Usage:
    pytest tests/test_msdtheory.py -v
"""

import os
import sys

import numpy as np
import pytest

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from mhdiffusion.core.datamodel import GlobalModel, NodeProfile, build_blocks
from mhdiffusion.core.msdtheory import (
    MsdTrace,
    build_dynamics,
    convergence_stats,
    msd_bounds,
    stability_check,
    steady_state_msd,
    steady_state_value,
    transient_msd,
)
from mhdiffusion.core.weights import WeightMatrix
from mhdiffusion.exceptions import NumericalError
from tests.oracles import scalar_model, scalar_steady_msd


def _scalar_dynamics(mu=0.1, sigma_v2=1.0, r=1.0):
    model = scalar_model([sigma_v2], mu=mu, r=r)
    return build_dynamics(WeightMatrix.identity(1), build_blocks(model), model.w_true)


def _three_node_model(mu=0.05):
    profiles = (
        NodeProfile(sigma_v2=0.1, R_u=np.diag([2.0, 1.0]), mu=mu),
        NodeProfile(sigma_v2=0.3, R_u=np.diag([1.0, 3.0]), mu=mu),
        NodeProfile(sigma_v2=0.2, R_u=np.diag([1.5, 1.5]), mu=mu),
    )
    return GlobalModel(w_true=np.array([1.0, -1.0]) / np.sqrt(2.0), profiles=profiles)


DOUBLY_STOCHASTIC = np.array([
    [0.5, 0.25, 0.25],
    [0.25, 0.5, 0.25],
    [0.25, 0.25, 0.5],
])


def test_scalar_steady_state_closed_form():
    """mu=0.1, sigma^2=1, r=1: steady MSD = 0.01 / 0.19 (about -12.8 dB)."""
    steady = steady_state_msd(_scalar_dynamics())

    assert steady == pytest.approx(0.01 / 0.19, rel=1e-8)
    assert 10 * np.log10(steady) == pytest.approx(-12.79, abs=0.01)


def test_scalar_transient_closed_form():
    """MSD_i = b^(2(i+1)) + y * sum_{j<=i} b^(2j) with b = 1 - mu r, y = mu^2 sigma^2 r."""
    trace = transient_msd(_scalar_dynamics(), 50)
    b2, y = 0.81, 0.01
    expected = [b2 ** (i + 1) + y * sum(b2 ** j for j in range(i + 1)) for i in range(50)]

    assert trace.iterations == 50
    assert trace.label == "theory"
    np.testing.assert_allclose(trace.msd, expected, rtol=1e-10)


def _truncated_series(dyn, terms=500):
    X = np.zeros_like(dyn.Y)
    power = np.eye(dyn.B.shape[0])
    for _ in range(terms):
        X += power @ dyn.Y @ power.T
        power = dyn.B @ power
    return float(np.trace(X)) / dyn.N


@pytest.mark.parametrize("weights, sigma_v2", [
    (np.eye(1), [1.0]),
    (np.array([[0.6, 0.3], [0.4, 0.7]]), [1.0, 2.0]),
    (np.array([[1.0, 0.5], [0.0, 0.5]]), [0.5, 0.25]),
])
def test_steady_state_matches_truncated_series(weights, sigma_v2):
    model = scalar_model(sigma_v2, mu=0.1)
    dyn = build_dynamics(weights, build_blocks(model), model.w_true)

    assert steady_state_msd(dyn) == pytest.approx(_truncated_series(dyn), abs=1e-8)


def test_transient_reaches_steady_state():
    dyn = _scalar_dynamics(mu=0.05)
    trace = transient_msd(dyn, 2000)
    assert trace.msd[-1] == pytest.approx(steady_state_msd(dyn), rel=1e-6)


def test_noncooperative_network_is_average_of_nodes():
    """A = I decouples the nodes; diagonal R_u decouples the components."""
    model = _three_node_model()
    dyn = build_dynamics(np.eye(3), build_blocks(model), model.w_true)

    expected = np.mean([
        sum(scalar_steady_msd(p.mu, p.sigma_v2, r) for r in np.diag(p.R_u))
        for p in model.profiles
    ])
    assert steady_state_msd(dyn) == pytest.approx(expected, rel=1e-8)


def test_cooperation_lowers_steady_state():
    model = _three_node_model()
    blocks = build_blocks(model)
    alone = steady_state_msd(build_dynamics(np.eye(3), blocks, model.w_true))
    together = steady_state_msd(build_dynamics(DOUBLY_STOCHASTIC, blocks, model.w_true))
    assert together < alone


def test_bounds_dominate_steady_state():
    model = _three_node_model()
    blocks = build_blocks(model)
    dyn = build_dynamics(DOUBLY_STOCHASTIC, blocks, model.w_true)
    steady = steady_state_msd(dyn)
    bounds = msd_bounds(dyn, blocks)

    assert steady <= bounds.msd_bar
    assert steady <= bounds.msd_a
    assert steady <= bounds.msd_b
    assert 0.0 < bounds.r1 < 1.0
    assert bounds.r2 == pytest.approx(0.05 ** 2 * 0.3 * 3.0)


def test_dynamics_shape_errors():
    model = _three_node_model()
    with pytest.raises(ValueError):
        build_dynamics(np.eye(2), build_blocks(model), model.w_true)
    with pytest.raises(ValueError):
        build_dynamics(np.eye(3), build_blocks(model), np.ones(3))


def test_unstable_recursion_raises():
    dyn = _scalar_dynamics(mu=2.5)

    with pytest.raises(NumericalError):
        steady_state_msd(dyn)
    with pytest.raises(NumericalError):
        transient_msd(dyn, 500, divergence_limit=1e3)


def test_stability_check():
    profiles = [
        NodeProfile(sigma_v2=1.0, R_u=np.array([[1.0]]), mu=0.1),
        NodeProfile(sigma_v2=1.0, R_u=np.array([[1.0]]), mu=2.5),
    ]
    np.testing.assert_array_equal(stability_check(profiles), [True, False])


def test_steady_state_value_uses_tail():
    series = np.concatenate([np.full(80, 10.0), np.full(20, 1.0)])
    assert steady_state_value(series, 0.2) == pytest.approx(1.0)


def test_convergence_stats_geometric_trace():
    iterations = np.arange(400)
    msd = 0.01 + 0.99 * 0.95 ** iterations
    trace = MsdTrace(msd=msd, energy=np.full(400, 2.0), label="geometric")
    stats = convergence_stats(trace)

    steady = steady_state_value(msd)
    T = int(np.flatnonzero(msd[0] - msd >= 0.9 * (msd[0] - steady))[0])
    assert stats.iterations == T
    assert stats.energy == pytest.approx(2.0 * (T + 1))
    assert stats.rate_db == pytest.approx((10 * np.log10(msd[0]) - 10 * np.log10(msd[T])) / T)
    assert stats.rate_db > 0
    assert stats.steady_state_db == pytest.approx(10 * np.log10(steady))


@pytest.mark.parametrize("msd", [
    np.ones(100),                  # flat: no decrease
    np.linspace(1.0, 0.5, 100),    # still falling at the end
    np.concatenate([[100.0], np.full(98, 1.0), [1.5]]),  # last sample off the tail mean
])
def test_convergence_stats_rejects_unsettled_traces(msd):
    with pytest.raises(NumericalError):
        convergence_stats(MsdTrace(msd=msd))


def test_convergence_stats_settled_step_trace():
    stats = convergence_stats(MsdTrace(msd=np.concatenate([[100.0], np.full(99, 1.0)])))
    assert stats.iterations == 1
    assert stats.steady_state == pytest.approx(1.0)


def test_trace_validation():
    with pytest.raises(ValueError):
        MsdTrace(msd=np.ones(5), energy=np.ones(4))

    trace = MsdTrace(msd=np.array([1.0, 0.1]), energy=np.array([1.0, 2.0]))
    np.testing.assert_allclose(trace.energy_cum, [1.0, 3.0])
    np.testing.assert_allclose(trace.msd_db, [0.0, -10.0])


if __name__ == "__main__":
    pytest.main([__file__, "-v", "--tb=short"])
