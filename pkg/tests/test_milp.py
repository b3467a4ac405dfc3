"""Unit tests for the planning models

Usage:
    pytest tests/test_milp.py -v
"""

import os
import sys

import numpy as np
import pytest

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from mhdiffusion.core.milp import Budgets, Sense, VarKind, build_model, build_p2, build_p3
from mhdiffusion.exceptions import TopologyError
from tests.oracles import chain, ring, star


def test_p2_chain_size():
    """3-chain, no valid inequalities, unlimited budgets: 30 variables, 53 rows."""
    model = build_p2(chain(3), [1.0, 2.0, 4.0], Budgets.unlimited(3), valid_inequalities=False)

    assert model.num_variables == 30
    assert model.num_constraints == 53
    assert model.count_rows("normalization") == 3
    assert model.count_rows("mccormick") == 36
    assert model.count_rows("coupling") == 14
    assert model.count_rows("local_budget") == 0
    assert model.count_rows("network_budget") == 0


def test_p2_variable_kinds():
    model = build_p2(chain(3), [1.0, 2.0, 4.0], Budgets.unlimited(3))

    assert len(model.delta) == 9
    assert len(model.pi) == 9
    assert len(model.p) == 9
    assert len(model.z) == 3
    assert len(model.binary_indices) == 18
    for idx in model.z.values():
        assert model.variables[idx].kind is VarKind.CONTINUOUS
    np.testing.assert_array_equal(np.flatnonzero(model.objective), sorted(model.z.values()))


def test_p2_valid_inequalities():
    model = build_p2(chain(3), [1.0, 2.0, 4.0], Budgets.unlimited(3))

    assert model.count_rows("valid_self") == 3
    assert model.count_rows("valid_delivery") > 0
    # One row per path member: pi[0, 2] and pi[2, 0] have two each
    assert model.count_rows("valid_relay_order") == 8


def test_p2_rejects_non_simple_topology():
    with pytest.raises(TopologyError):
        build_p2(ring(4), np.ones(4), Budgets.unlimited(4))


def test_budget_rows():
    budgets = Budgets((1.0, 2.0, 1.0), network=2.0)
    model = build_p3(chain(3), [1.0, 1.0, 1.0], budgets)

    assert model.count_rows("local_budget") == 3
    assert model.count_rows("network_budget") == 1
    row = next(c for c in model.constraints if c.tag == "network_budget")
    assert row.sense is Sense.LE
    assert row.rhs == 2.0
    assert len(row.coefs) == len(model.pi)


def test_p3_candidates_and_relays():
    """Relay variables exist only for relay customers."""
    net = chain(4)
    model = build_p3(net, np.ones(4), Budgets.unlimited(4))

    assert model.candidates == net.index.two_hop
    expected = {(l, k) for k in range(4) for l in net.index.relay_customers[k]}
    assert set(model.pi) == expected
    assert (0, 3) not in model.delta
    assert model.count_rows("origin_broadcast") == sum(len(s) - 1 for s in net.index.two_hop)
    # Two-hop pairs: (0,2), (1,3), (2,0), (3,1)
    assert model.count_rows("two_hop_relay") == 4


def test_p3_on_star_has_center_relays_only():
    model = build_p3(star(3), np.ones(4), Budgets.unlimited(4))
    assert set(model.pi) == {(0, 0), (1, 1), (2, 2), (3, 3), (1, 0), (2, 0), (3, 0)}


def test_p3_accepts_non_simple_topology():
    model = build_p3(ring(5), np.ones(5), Budgets.unlimited(5))
    assert model.variant == "p3"
    assert model.count_rows("coupling") == 0


def test_build_model_dispatch_and_errors():
    net = chain(3)
    assert build_model("P2", net, np.ones(3), Budgets.unlimited(3)).variant == "p2"
    with pytest.raises(ValueError):
        build_model("p4", net, np.ones(3), Budgets.unlimited(3))
    with pytest.raises(ValueError):
        build_p3(net, [1.0, 0.0, 1.0], Budgets.unlimited(3))
    with pytest.raises(ValueError):
        build_p3(net, np.ones(3), Budgets.unlimited(2))


def test_budgets_validation():
    with pytest.raises(ValueError):
        Budgets((1.0, -1.0))
    with pytest.raises(ValueError):
        Budgets((1.0,), network=-2.0)
    assert np.all(np.isinf(Budgets.unlimited(3).local_array))


def test_dense_form_matches_rows():
    model = build_p3(chain(3), [1.0, 2.0, 4.0], Budgets((1.0, 1.0, 1.0), network=2.0))
    A, b, senses, c, lb, ub = model.to_dense()

    assert A.shape == (model.num_constraints, model.num_variables)
    assert set(np.unique(senses)) <= {-1, 0, 1}
    assert c.sum() == 3.0
    np.testing.assert_array_equal(ub[model.binary_indices], 1.0)


if __name__ == "__main__":
    pytest.main([__file__, "-v", "--tb=short"])
