import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bmac.errors import PreconditionError
from bmac.netmodel import effective_coupling, generate_network, link_rates, reverse_network, sum_power
from bmac.politewf import check_structure, optimality_report
from bmac.sinr_algs import algorithm_b
from bmac.itree import (algorithm_i, algorithm_s, build_subnetwork, is_itree_indexed, itree_order,
                        permute, unpermute_covs)
from bmac.streams import covariance_transformation

from helpers import TREE4_GAINS, TREE4_RX, TREE4_TX, random_psd, scalar_net

ORDER_A = np.ones((4, 4), int) - np.eye(4, dtype=int)
ORDER_A[1, 0] = ORDER_A[2, 1] = 0
ORDER_B = np.ones((4, 4), int) - np.eye(4, dtype=int)
ORDER_B[1, 2] = 0


def tree4(seed=0, ant=2, gains=TREE4_GAINS):
    return generate_network([ant] * 4, [ant] * 4, gains, seed, TREE4_TX, TREE4_RX)


def test_itree_orders_tree4():
    net = tree4()
    assert itree_order(ORDER_A, net) == [0, 1, 2, 3]
    assert itree_order(ORDER_B, net) is None
    assert itree_order(np.zeros((3, 3))) == [0, 1, 2]


def test_itree_order_is_valid_permutation():
    phi = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0]])  # reversed chain
    order = itree_order(phi)
    _, pphi = permute(scalar_net(np.ones((3, 3))), phi, order)
    assert not np.any(np.tril(pphi, -1))


def test_reverse_of_itree_keeps_pattern():
    rnet, rphi = reverse_network(tree4(), ORDER_A)
    # reverse link l is not interfered by higher-indexed links
    assert not np.any(np.triu(effective_coupling(rnet, rphi), 1))


def test_subnetwork_trivial_cases():
    net = scalar_net([[1.0, 0.5], [0.5, 1.0]])
    phi = np.array([[0, 1], [0, 0]])
    covs = [np.eye(1), 2 * np.eye(1)]
    sub = build_subnetwork(net, phi, covs, 0)
    assert sub.net.noise_cov[0][0, 0].real == pytest.approx(2.0)
    assert sub.power == pytest.approx(1.0)
    full = build_subnetwork(net, phi, covs, 1)
    for w in full.net.noise_cov:
        np.testing.assert_allclose(w, np.eye(1))


@settings(max_examples=20)
@given(st.integers(0, 100_000), st.integers(0, 3))
def test_subnetwork_restriction(seed, i):
    rng = np.random.default_rng(seed)
    net = tree4(seed)
    covs = [random_psd(rng, 2) for _ in range(4)]
    full_r, _ = covariance_transformation(net, ORDER_A, covs)
    sub = build_subnetwork(net, ORDER_A, covs, i)
    sub_r, _ = covariance_transformation(sub.net, sub.phi, covs[:i + 1])
    for a, b in zip(sub_r, full_r[:i + 1]):
        np.testing.assert_allclose(a, b, atol=1e-9)


@settings(max_examples=20)
@given(st.integers(0, 100_000), st.integers(0, 3))
def test_algorithm_s_improves_link(seed, i):
    rng = np.random.default_rng(seed)
    net = tree4(seed)
    covs = [random_psd(rng, 2) for _ in range(4)]
    before = link_rates(net, ORDER_A, covs)
    after_covs = algorithm_s(net, ORDER_A, covs, i)
    after = link_rates(net, ORDER_A, after_covs)
    assert after[i] >= before[i] - 1e-9
    assert np.all(after >= before - 1e-9)
    assert sum_power(net, after_covs) == pytest.approx(sum_power(net, covs), rel=1e-9)


def test_algorithm_s_fixed_point():
    net = tree4(3)
    t = np.full(4, 2.0)
    res = algorithm_i(net, ORDER_A, t, mode="B", tol=1e-10)
    assert res.info["structure_ok"]
    for i in range(4):
        out = algorithm_s(net, ORDER_A, res.covs_f, i)
        np.testing.assert_allclose(link_rates(net, ORDER_A, out), res.rates, atol=1e-6)


def test_algorithm_s_z_channel_power():
    net = scalar_net([[1.0, 0.5], [0.5, 1.0]])
    phi = np.array([[0, 1], [0, 0]])
    covs = [np.eye(1) * 1.3, np.eye(1) * 0.7]
    out = algorithm_s(net, phi, covs, 1)
    assert sum_power(net, out) == pytest.approx(2.0, abs=1e-9)


def test_algorithm_s_rejects_non_itree():
    with pytest.raises(PreconditionError):
        algorithm_s(tree4(), ORDER_B, [np.eye(2)] * 4, 0)


def test_algorithm_i_no_steps_when_structured():
    net = scalar_net([[1.0, 0.5], [0.5, 1.0]])
    phi = np.array([[0, 1], [0, 0]])
    t = [math.log(2)] * 2
    res = algorithm_i(net, phi, t, tol=1e-12)
    assert res.info["s_steps"] == 0
    base = algorithm_b(net, phi, t, tol=1e-12)
    assert res.sum_power == pytest.approx(base.sum_power, rel=1e-9)


def test_algorithm_i_escapes_singular_vector_init():
    """A single-user link stuck at equal-SINR allocation is repaired."""
    gains = np.full((3, 3), -np.inf)
    np.fill_diagonal(gains, 0.0)
    gains[0, 1] = gains[0, 2] = gains[1, 2] = -3.0
    net = generate_network([2] * 3, [2] * 3, gains, seed=11)
    phi = np.ones((3, 3)) - np.eye(3)
    t = np.array([3.0, 3.0, 4.0])
    base = algorithm_b(net, phi, t, init="svd", tol=1e-10)
    assert not check_structure(net, phi, base.covs_f, base.covs_r).satisfied[2]
    res = algorithm_i(net, phi, t, mode="B", init="svd", tol=1e-10)
    assert res.info["s_steps"] > 0
    rep = optimality_report(net, phi, res.covs_f, t)
    assert rep.structure_residual < 1e-5
    assert rep.rate_residual < 1e-5
    assert res.sum_power <= base.sum_power * (1 + 1e-9)


def test_algorithm_i_strong_tree_setting():
    net = tree4(0, ant=4)
    t = np.full(4, 5 * math.log(2))
    res = algorithm_i(net, ORDER_A, t, mode="B", tol=1e-10)
    rep = optimality_report(net, ORDER_A, res.covs_f, t)
    assert rep.structure_residual < 1e-5
    assert rep.rate_residual < 1e-5
    rounds = res.info["rounds"]
    assert all(b <= a * (1 + 1e-9) for a, b in zip(rounds, rounds[1:]))


def test_unpermute_roundtrip():
    order = [2, 0, 1]
    covs = [np.eye(1) * k for k in range(3)]
    permuted = [covs[o] for o in order]
    assert [c[0, 0] for c in unpermute_covs(permuted, order)] == [0, 1, 2]
    assert is_itree_indexed(np.triu(np.ones((3, 3)), 1))
