import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bmac.netmodel import build_network, generate_network, validate_coupling
from bmac.ordering import (OrderSpec, algorithm_o, all_orders, default_order, exhaustive_orders,
                           meb_order, order_to_coupling, pseudo_groups)
from bmac.ordering import _is_pseudo

from helpers import MIXED5_RX, MIXED5_TX, TOPOLOGIES, scalar_net


def mixed5_net():
    return scalar_net(np.ones((5, 5)), MIXED5_TX, MIXED5_RX)


def test_mixed_coupling_from_order():
    net = scalar_net(np.ones((3, 3)), ["A", "A", "B"], ["X", "Y", "Y"])
    order = OrderSpec.from_dicts({"A": (1, 0), "B": (2,)}, {"X": (0,), "Y": (2, 1)})
    assert order_to_coupling(net, order).tolist() == [[0, 0, 1], [1, 0, 0], [1, 1, 0]]


def test_bc_and_singletons():
    bc = scalar_net(np.ones((2, 2)), ["T", "T"], ["R0", "R1"])
    assert order_to_coupling(bc, default_order(bc)).tolist() == [[0, 1], [0, 0]]
    ic = scalar_net(np.ones((3, 3)))
    assert order_to_coupling(ic, default_order(ic)).tolist() == (np.ones((3, 3)) - np.eye(3)).tolist()


def test_bad_order_rejected():
    bc = scalar_net(np.ones((2, 2)), ["T", "T"], ["R0", "R1"])
    with pytest.raises(ValueError):
        order_to_coupling(bc, OrderSpec.from_dicts({"T": (0, 0)}, {}))


def test_pseudo_groups_mixed_example():
    net = mixed5_net()
    order = OrderSpec.from_dicts({"A": (1, 0), "C": (3, 4)}, {"Y": (1, 2, 3)})
    phi = order_to_coupling(net, order)
    groups = pseudo_groups(phi, net)
    assert ("BC", "C", (3, 4)) in {(g.kind, g.node, g.links) for g in groups}
    # the pair at Y is uniform; the maximal group found also absorbs the last-decoded link
    assert _is_pseudo(phi, (1, 2), "MAC")
    (mac,) = [g for g in groups if g.kind == "MAC"]
    assert mac.node == "Y" and {1, 2} <= set(mac.links)


def test_pseudo_groups_plain_cases():
    mac = scalar_net(np.ones((3, 3)), None, ["R"] * 3)
    phi = order_to_coupling(mac, default_order(mac))
    assert [(g.kind, g.links) for g in pseudo_groups(phi, mac)] == [("MAC", (0, 1, 2))]
    ic = scalar_net(np.ones((3, 3)))
    assert pseudo_groups(order_to_coupling(ic, default_order(ic)), ic) == []


@given(st.sampled_from(sorted(TOPOLOGIES)), st.integers(1, 4), st.integers(0, 10_000))
def test_every_order_gives_valid_coupling(topo, L, pick):
    tx, rx = TOPOLOGIES[topo](L)
    net = scalar_net(np.ones((L, L)), tx, rx)
    orders = list(all_orders(net))
    phi = order_to_coupling(net, orders[pick % len(orders)])
    assert validate_coupling(phi, net).valid


def test_meb_ties_keep_index_order():
    net = scalar_net(np.ones((3, 3)), ["T"] * 3, ["R"] * 3)
    assert meb_order(net) == default_order(net)


def test_meb_ranks_by_gain():
    net = scalar_net([[1, 1, 1], [1, 4, 1], [1, 1, 2]], None, ["R"] * 3)
    assert meb_order(net).decode_map["R"] == (1, 2, 0)


def test_two_user_mac_matches_exhaustive_and_meb():
    net = scalar_net([[1.0, 2.0], [1.0, 2.0]], None, ["R", "R"])
    t = [1.0, 1.0]
    order, res = algorithm_o(net, t, tol=1e-12)
    best = min(obj for _, obj, _ in exhaustive_orders(net, t, tol=1e-12))
    assert res.objective == pytest.approx(best, rel=1e-8)
    meb = algorithm_o(net, t, order=meb_order(net), max_rounds=1, tol=1e-12)[1]
    assert meb.objective == pytest.approx(best, rel=1e-8)


def test_mimo_mac_unequal_targets_not_worse_than_meb():
    net = generate_network([2] * 4, [4] * 4, np.zeros((4, 4)), 3, rx_node=["R"] * 4)
    t = np.array([1, 2, 4, 8]) * 8 * math.log(2) / 15
    _, o_res = algorithm_o(net, t, solver="PR", tol=1e-9, max_iter=2000)
    _, meb_res = algorithm_o(net, t, solver="PR", order=meb_order(net), max_rounds=1,
                             tol=1e-9, max_iter=2000)
    assert o_res.objective <= meb_res.objective * (1 + 1e-6)


def test_single_link_is_stable():
    net = build_network([[np.array([[1.0]])]])
    order, res = algorithm_o(net, [1.0])
    assert len(res.info["visited"]) == 1
    assert order == default_order(net)


def test_frozen_node_untouched():
    # a physical MAC: every row sees the same per-transmitter gains
    net = scalar_net([[1.0, 3.0, 5.0]] * 3, None, ["R"] * 3)
    start = default_order(net)
    order, _ = algorithm_o(net, [1.0, 1.0, 1.0], frozen=["R"], tol=1e-10)
    assert order == start
    moved, _ = algorithm_o(net, [1.0, 1.0, 1.0], tol=1e-10)
    assert moved.decode_map["R"] != start.decode_map["R"]


def test_meb_optimal_for_scalar_mac():
    net = scalar_net(np.tile([1.0, 2.0, 0.5, 3.0], (4, 1)), None, ["R"] * 4)
    t = [0.7] * 4
    best = min(obj for _, obj, _ in exhaustive_orders(net, t, tol=1e-13))
    meb = algorithm_o(net, t, order=meb_order(net), max_rounds=1, tol=1e-13)[1]
    assert meb.objective == pytest.approx(best, rel=1e-6)


def test_two_user_unequal_gains_converges_to_meb():
    net = scalar_net([[0.5, 2.0], [0.5, 2.0]], None, ["R", "R"])
    order, _ = algorithm_o(net, [1.0, 1.0], tol=1e-12)
    assert order == meb_order(net)
