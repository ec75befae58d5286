import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bmac.errors import InfeasibleError
from bmac.netmodel import FORWARD, REVERSE, build_network, link_rates, sum_power
from bmac.streams import (all_rates_from_sinr, covariance_transformation, crosstalk, direct_gains,
                          dual_powers, mmse_sic_receivers, noise_terms, reverse_transformation,
                          sinr_report, stream_offsets)

from bmac.harness.oracles import oracle_single_user

from helpers import random_instance, scalar_net


def naive_sinr(net, phi, T, R, p):
    """Forward SINRs by explicit summation over every interfering stream."""
    M = [t.shape[1] for t in T]
    off = stream_offsets(M)
    out = []
    for l in range(net.L):
        for m in range(M[l]):
            r = R[l][:, m]
            sig = p[off[l] + m] * abs(np.vdot(r, net.channels[l][l] @ T[l][:, m])) ** 2
            den = float(np.real(np.vdot(r, net.noise_cov[l] @ r)))
            for n in range(m + 1, M[l]):
                den += p[off[l] + n] * abs(np.vdot(r, net.channels[l][l] @ T[l][:, n])) ** 2
            for k in range(net.L):
                if k != l and phi[l][k]:
                    for n in range(M[k]):
                        den += p[off[k] + n] * abs(np.vdot(r, net.channels[l][k] @ T[k][:, n])) ** 2
            out.append(sig / den)
    return np.array(out)


def test_scalar_receiver_is_phase():
    net = build_network([[2.0 * np.exp(0.7j)]])
    R = mmse_sic_receivers(net, [[0]], [np.ones((1, 1), complex)], np.array([1.0]))
    assert abs(R[0][0, 0]) == pytest.approx(1.0)
    assert np.vdot(R[0][:, 0], net.channels[0][0] @ np.ones(1)).imag == pytest.approx(0.0, abs=1e-15)


def test_orthogonal_streams():
    net = build_network([[np.eye(2)]])
    T = [np.eye(2, dtype=complex)]
    R = mmse_sic_receivers(net, [[0]], T, np.array([3.0, 0.5]))
    np.testing.assert_allclose(R[0], np.eye(2), atol=1e-14)


def test_mmse_beats_matched_filter(rng):
    H = (rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))) / math.sqrt(2)
    net = build_network([[H]])
    T = [np.linalg.qr(rng.standard_normal((4, 2)) + 0j)[0]]
    p = np.array([2.0, 1.5])
    R = mmse_sic_receivers(net, [[0]], T, p)
    _, mmse = sinr_report(net, [[0]], T, R, p)
    mf = [(H @ T[0][:, m]) / np.linalg.norm(H @ T[0][:, m]) for m in range(2)]
    mf_sinr = naive_sinr(net, [[0]], T, [np.column_stack(mf)], p)
    assert np.all(mmse >= mf_sinr - 1e-12)


def test_single_stream_snr():
    net = build_network([[1.5]])
    T = [np.ones((1, 1), complex)]
    R = mmse_sic_receivers(net, [[0]], T, np.array([2.0]))
    _, g = sinr_report(net, [[0]], T, R, np.array([2.0]))
    assert g[0] == pytest.approx(2.0 * 2.25)


def test_intra_link_sic_zero():
    net = build_network([[np.eye(2) + 0.3]])
    T = [np.eye(2, dtype=complex)]
    R = mmse_sic_receivers(net, [[0]], T, np.array([1.0, 1.0]))
    psi = crosstalk(net, [[0]], T, R)
    assert psi[1, 0] == 0.0
    assert psi[0, 1] > 0.0


def test_dual_powers_small_cases():
    assert dual_powers(np.zeros((1, 1)), np.array([1.0]), np.array([3.0]))[0] == pytest.approx(3.0)
    psi = np.array([[0.0, 0.5], [0.5, 0.0]])
    np.testing.assert_allclose(dual_powers(psi, np.ones(2), np.ones(2)), [2.0, 2.0])


def test_dual_powers_infeasible_reports_radius():
    psi = np.array([[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(InfeasibleError) as err:
        dual_powers(psi, np.ones(2), np.array([2.0, 2.0]))
    assert err.value.radius == pytest.approx(2.0)


def test_single_user_transformation_keeps_trace():
    H = np.array([[2.0, 0.5], [0.1, 1.0]])
    net = build_network([[H]])
    power, S = oracle_single_user(H, 1.7)
    covs_r, _ = covariance_transformation(net, [[0]], [S])
    assert np.trace(covs_r[0]).real == pytest.approx(power, abs=1e-9)
    assert link_rates(net, [[0]], covs_r, REVERSE)[0] == pytest.approx(
        link_rates(net, [[0]], [S])[0], abs=1e-9)


def test_mac_to_bc_scalar():
    net = scalar_net([[1.0, 1.0], [1.0, 1.0]], ["T0", "T1"], ["R", "R"])
    phi = np.array([[0, 1], [0, 0]])
    covs = [np.eye(1) * 2.0, np.eye(1) * 2.0]
    covs_r, _ = covariance_transformation(net, phi, covs)
    fwd = link_rates(net, phi, covs)
    np.testing.assert_allclose(fwd, [math.log(1 + 2 / 3), math.log(3)])
    np.testing.assert_allclose(link_rates(net, phi, covs_r, REVERSE), fwd, atol=1e-9)


@given(st.integers(0, 100_000), st.booleans())
def test_sinr_matches_naive_oracle(seed, colored):
    net, phi, covs, _ = random_instance(seed, colored=colored)
    _, strat = covariance_transformation(net, phi, covs)
    _, g = sinr_report(net, phi, strat.T, strat.R, strat.p)
    np.testing.assert_allclose(g, naive_sinr(net, phi, strat.T, strat.R, strat.p), rtol=1e-10)


@given(st.integers(0, 100_000), st.booleans())
def test_sinr_duality_and_power_identity(seed, colored):
    net, phi, covs, _ = random_instance(seed, colored=colored)
    covs_r, s = covariance_transformation(net, phi, covs)
    _, fwd = sinr_report(net, phi, s.T, s.R, s.p, FORWARD)
    _, rev = sinr_report(net, phi, s.T, s.R, s.q, REVERSE)
    np.testing.assert_allclose(rev, fwd, rtol=1e-6, atol=1e-12)
    assert sum_power(net, covs_r, REVERSE) == pytest.approx(sum_power(net, covs), rel=1e-9)
    if not colored:
        assert s.q.sum() == pytest.approx(s.p.sum(), rel=1e-9)
    # lossless decomposition
    M = [t.shape[1] for t in s.T]
    np.testing.assert_allclose(all_rates_from_sinr(fwd, M), link_rates(net, phi, covs), atol=1e-8)
    assert np.all(link_rates(net, phi, covs_r, REVERSE) >= link_rates(net, phi, covs) - 1e-9)


@given(st.integers(0, 100_000))
def test_reverse_of_reverse_rates(seed):
    net, phi, covs, _ = random_instance(seed)
    covs_r, _ = covariance_transformation(net, phi, covs)
    back, _ = reverse_transformation(net, phi, covs_r)
    assert np.all(link_rates(net, phi, back) >= link_rates(net, phi, covs_r, REVERSE) - 1e-9)
    assert sum_power(net, back) == pytest.approx(sum_power(net, covs_r, REVERSE), rel=1e-9)
