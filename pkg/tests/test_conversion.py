import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bmac._linalg import crandn
from bmac.conversion import (equal_power_decomposition, equal_sinr_decomposition,
                             rate_to_sinr_targets, sqrt_factor, strategy_from_covariances)
from bmac.errors import PreconditionError
from bmac.netmodel import link_rates, sum_power
from bmac.streams import mmse_sic_receivers, sinr_report, strategy_covariances

from helpers import random_instance, random_psd


def sic_sinrs(G):
    """SINRs of the columns of G, decoded in order, unit white noise."""
    n, M = G.shape
    out = []
    for m in range(M):
        rest = G[:, m + 1:]
        A = np.eye(n) + rest @ rest.conj().T
        out.append(float(np.real(np.vdot(G[:, m], np.linalg.solve(A, G[:, m])))))
    return np.array(out)


def test_rate_to_sinr():
    assert rate_to_sinr_targets([math.log(2)], [1])[0] == pytest.approx(1.0)
    assert rate_to_sinr_targets([5 * math.log(2)], [4])[0] == pytest.approx(2 ** 1.25 - 1)
    assert rate_to_sinr_targets([0.0], [3])[0] == 0.0


def test_rank_one_equal_sinr():
    h = np.array([[1.0], [2.0j]])
    V = equal_sinr_decomposition(h)
    assert abs(V[0, 0]) == pytest.approx(1.0)
    assert sic_sinrs(h @ V)[0] == pytest.approx(5.0)


def test_symmetric_case_equal_already():
    V = equal_sinr_decomposition(2.0 * np.eye(3))
    g = sic_sinrs(2.0 * np.eye(3) @ V)
    np.testing.assert_allclose(g, g[0])


def test_too_few_streams_rejected():
    with pytest.raises(PreconditionError):
        equal_power_decomposition(np.eye(3), 2)
    with pytest.raises(PreconditionError):
        sqrt_factor(np.eye(2), 1)


@given(st.integers(0, 100_000), st.integers(1, 4), st.integers(1, 4))
def test_equal_sinr_property(seed, n, M):
    rng = np.random.default_rng(seed)
    hbar = crandn(rng, (n, M)) * rng.uniform(0.2, 3.0)
    V = equal_sinr_decomposition(hbar)
    np.testing.assert_allclose(V.conj().T @ V, np.eye(M), atol=1e-10)
    g = sic_sinrs(hbar @ V)
    total = float(np.sum(np.log1p(np.linalg.svd(hbar, compute_uv=False) ** 2)))
    np.testing.assert_allclose(g, math.expm1(total / M), rtol=1e-8, atol=1e-10)
    assert float(np.sum(np.log1p(g))) == pytest.approx(total, abs=1e-8)


@pytest.mark.parametrize("sigma,M,power", [
    (np.eye(2), 2, 1.0),
    (np.diag([3.0, 1.0]), 2, 2.0),
    (np.diag([3.0, 1.0]), 4, 1.0),
])
def test_equal_power_examples(sigma, M, power):
    T = equal_power_decomposition(sigma, M)
    np.testing.assert_allclose(T @ T.conj().T, sigma, atol=1e-12)
    np.testing.assert_allclose(np.sum(np.abs(T) ** 2, axis=0), power, atol=1e-12)


@given(st.integers(0, 100_000), st.integers(1, 4), st.integers(0, 3))
def test_equal_power_property(seed, n, extra):
    rng = np.random.default_rng(seed)
    rank = int(rng.integers(1, n + 1))
    S = random_psd(rng, n, rank=rank)
    M = max(rank, rank + extra - 1) if extra else rank
    T = equal_power_decomposition(S, M)
    assert np.linalg.norm(T @ T.conj().T - S) < 1e-10
    np.testing.assert_allclose(np.sum(np.abs(T) ** 2, axis=0), np.trace(S).real / M, atol=1e-10)


@given(st.integers(0, 100_000))
def test_pareto_round_trip(seed):
    """Equal-SINR strategy reproduces the covariances and the link rates."""
    net, phi, covs, _ = random_instance(seed)
    M = [max(1, int(np.linalg.matrix_rank(c, tol=1e-9))) for c in covs]
    strat = strategy_from_covariances(net, phi, covs, M)
    rebuilt = strategy_covariances(strat.T, strat.p)
    for a, b in zip(rebuilt, covs):
        np.testing.assert_allclose(a, b, atol=1e-9)
    R = mmse_sic_receivers(net, phi, strat.T, strat.p)
    _, g = sinr_report(net, phi, strat.T, R, strat.p)
    rates = link_rates(net, phi, covs)
    off = np.cumsum([0] + M)
    for l in range(net.L):
        np.testing.assert_allclose(g[off[l]:off[l + 1]], math.expm1(rates[l] / M[l]),
                                   rtol=1e-6, atol=1e-9)
    assert float(strat.p.sum()) == pytest.approx(sum_power(net, covs), rel=1e-9)
