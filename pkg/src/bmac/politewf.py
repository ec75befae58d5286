"""Polite water-filling: equivalent channels, water levels and checks.

For link ``l`` with forward interference-plus-noise covariance ``Ω_l`` and
reverse covariance ``Ω̂_l`` the equivalent single-user channel is
``Ω_l^{-1/2} H_{l,l} Ω̂_l^{-1/2} = F Δ G^H``.  A forward input has the
polite water-filling structure when
``Ω̂_l^{1/2} Σ_l Ω̂_l^{1/2} = G diag((ν - 1/δ)^+) G^H`` with ``δ = Δ^2``.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from ._linalg import clip_psd, herm, inv_sqrt_psd, numerical_rank, sqrt_psd
from .errors import InfeasibleError
from .netmodel import (FORWARD, REVERSE, as_phi, interference_covariance, link_rates,
                       sum_power)
from .streams import covariance_transformation

__all__ = [
    "EquivalentChannel",
    "PoliteWFReport",
    "OptimalityReport",
    "equivalent_channel",
    "equivalent_channel_from",
    "polite_waterfill",
    "structure_fit",
    "check_structure",
    "direct_reverse",
    "optimality_report",
]

STRUCTURE_RTOL = 1e-6


@dataclass(frozen=True, eq=False)
class EquivalentChannel:
    """Doubly whitened channel and its thin SVD.

    Attributes
    ----------
    omega_f, omega_r : ndarray
        Forward and reverse interference-plus-noise covariances.
    hbar : ndarray
        ``Ω_f^{-1/2} H Ω_r^{-1/2}``.
    F, G : ndarray
        Left and right singular vectors (orthonormal columns).
    sv : ndarray
        Positive singular values, descending.
    """

    omega_f: np.ndarray
    omega_r: np.ndarray
    hbar: np.ndarray
    F: np.ndarray
    sv: np.ndarray
    G: np.ndarray
    isqrt_f: np.ndarray
    isqrt_r: np.ndarray

    @property
    def N(self):
        return len(self.sv)

    @property
    def delta(self):
        """Squared singular values ``δ_j``."""
        return self.sv ** 2


def equivalent_channel_from(H, omega_f, omega_r):
    """Build an :class:`EquivalentChannel` from explicit covariances."""
    isf = inv_sqrt_psd(omega_f)
    isr = inv_sqrt_psd(omega_r)
    hbar = isf @ H @ isr
    U, s, Vh = np.linalg.svd(hbar, full_matrices=False)
    n = numerical_rank(s)
    return EquivalentChannel(herm(omega_f), herm(omega_r), hbar, U[:, :n], s[:n],
                             Vh[:n].conj().T, isf, isr)


def equivalent_channel(net, phi, covs_f, covs_r, l):
    """Equivalent channel of link ``l``.

    Parameters
    ----------
    net, phi
    covs_f : sequence of ndarray
        Forward covariances.
    covs_r : sequence of ndarray
        Reverse covariances, normally the covariance transformation of
        ``covs_f``.
    l : int

    Returns
    -------
    EquivalentChannel
    """
    omega_f = interference_covariance(net, phi, covs_f, l, FORWARD)
    omega_r = interference_covariance(net, phi, covs_r, l, REVERSE)
    return equivalent_channel_from(net.channels[l][l], omega_f, omega_r)


def polite_waterfill(eq, power=None, rate=None, side="reverse"):
    """Water-fill over an equivalent channel.

    Exactly one of ``power`` (budget ``sum d = power``) or ``rate``
    (``sum log(1 + δ d) = rate``) must be given.

    Parameters
    ----------
    eq : EquivalentChannel
    power : float, optional
    rate : float, optional
        In nats.
    side : {'reverse', 'forward'}
        Return ``Ω^{-1/2} F D F^H Ω^{-1/2}`` (reverse input) or
        ``Ω̂^{-1/2} G D G^H Ω̂^{-1/2}`` (forward input).

    Returns
    -------
    cov : ndarray
    nu : float
    d : ndarray
        Power per equivalent-channel eigenmode.
    """
    if (power is None) == (rate is None):
        raise ValueError("give exactly one of power or rate")
    delta = eq.delta
    if rate is not None:
        if rate < 0:
            raise ValueError("rate target must be nonnegative")
        if eq.N == 0 and rate > 0:
            raise InfeasibleError("rate target on a link whose channel is zero")
        d, nu = kernels.waterfill_rate(delta, float(rate))
    else:
        if power < 0:
            raise ValueError("power budget must be nonnegative")
        d, nu = kernels.waterfill_budget(delta, float(power))
    if side == "reverse":
        B = eq.isqrt_f @ eq.F
    elif side == "forward":
        B = eq.isqrt_r @ eq.G
    else:
        raise ValueError("side must be 'reverse' or 'forward'")
    cov = herm((B * d) @ B.conj().T)
    return cov, float(nu), np.asarray(d)


def structure_fit(Q, basis, delta):
    """Distance of ``Q`` to the nearest water-filling matrix on ``basis``.

    Every prefix of the eigenmodes (sorted by ``delta``) is tried as the
    active set; the level is the least-squares fit over that set.

    Returns
    -------
    residual : float
        Frobenius distance.
    nu : float
        Fitted level (0 when ``Q`` is zero).
    """
    Q = herm(Q)
    N = len(delta)
    if N == 0:
        return float(np.linalg.norm(Q)), 0.0
    c = np.real(np.einsum("ij,ik,kj->j", basis.conj(), Q, basis))
    inv = 1.0 / np.asarray(delta)
    best = (float(np.linalg.norm(Q)), 0.0)
    for k in range(1, N + 1):
        nu = float(np.mean(c[:k] + inv[:k]))
        d = np.clip(nu - inv, 0.0, None)
        res = float(np.linalg.norm(Q - (basis * d) @ basis.conj().T))
        if res < best[0]:
            best = (res, nu)
    return best


@dataclass(frozen=True)
class PoliteWFReport:
    """Per-link outcome of :func:`check_structure`.

    Attributes
    ----------
    satisfied : tuple of bool
    nu : ndarray
        Fitted water levels.
    residual : ndarray
        Frobenius distances to the nearest water-filling form.
    relative : ndarray
        ``residual / Tr(Q)`` (zero when ``Q`` is zero).
    """

    satisfied: tuple
    nu: np.ndarray
    residual: np.ndarray
    relative: np.ndarray

    @property
    def all_satisfied(self):
        return all(self.satisfied)


def check_structure(net, phi, covs_f, covs_r=None, side="forward", rtol=STRUCTURE_RTOL):
    """Test each link for the polite water-filling structure.

    Parameters
    ----------
    net, phi
    covs_f : sequence of ndarray
        Forward covariances.
    covs_r : sequence of ndarray, optional
        Reverse covariances; computed by covariance transformation when
        omitted.
    side : {'forward', 'reverse'}
        Which input to test.
    rtol : float
        Structure holds when ``residual <= rtol * Tr(Q)``.

    Returns
    -------
    PoliteWFReport
    """
    if covs_r is None:
        covs_r, _ = covariance_transformation(net, phi, covs_f)
    sat, nus, res, rel = [], [], [], []
    for l in range(net.L):
        eq = equivalent_channel(net, phi, covs_f, covs_r, l)
        if side == "forward":
            s = sqrt_psd(eq.omega_r)
            Q = s @ clip_psd(covs_f[l]) @ s
            basis = eq.G
        else:
            s = sqrt_psd(eq.omega_f)
            Q = s @ clip_psd(covs_r[l]) @ s
            basis = eq.F
        r, nu = structure_fit(Q, basis, eq.delta)
        tr = float(np.real(np.trace(Q)))
        sat.append(bool(r <= rtol * tr + 1e-14))
        nus.append(nu)
        res.append(r)
        rel.append(r / tr if tr > 0 else 0.0 if r == 0 else np.inf)
    return PoliteWFReport(tuple(sat), np.array(nus), np.array(res), np.array(rel))


def direct_reverse(net, phi, covs_f, nu):
    """Reverse covariances from water levels: ``ν_l (Ω_l^{-1} - (HΣH^H + Ω_l)^{-1})``."""
    out = []
    for l in range(net.L):
        omega = interference_covariance(net, phi, covs_f, l, FORWARD)
        H = net.channels[l][l]
        tot = omega + H @ covs_f[l] @ H.conj().T
        out.append(herm(nu[l] * (np.linalg.inv(omega) - np.linalg.inv(herm(tot)))))
    return out


@dataclass(frozen=True)
class OptimalityReport:
    """Optimality conditions for a candidate solution.

    Attributes
    ----------
    structure : PoliteWFReport
        Condition 1.
    alpha : float
        Common rate scaling (1 for the power-minimisation problem).
    rate_residual : float
        Condition 2: ``max_l |I_l / I⁰_l - alpha|``.
    power_residual : float
        Condition 3 for the feasibility problem: ``|sum Tr Σ_l - P_T|``; zero
        otherwise.
    kkt_negative : ndarray
        Per-link norm of the negative part of the KKT multiplier matrix,
        relative to the norm of the reverse covariance it is derived from.
    kkt_slackness : ndarray
        Per-link relative complementary-slackness violation.
    mu : float
        Normalisation ``1 / sum I⁰_l ν_l``.
    """

    structure: PoliteWFReport
    alpha: float
    rate_residual: float
    power_residual: float
    kkt_negative: np.ndarray
    kkt_slackness: np.ndarray
    mu: float

    @property
    def structure_residual(self):
        return float(np.max(self.structure.relative)) if len(self.structure.relative) else 0.0

    @property
    def kkt_residual(self):
        return float(max(np.max(self.kkt_negative, initial=0.0),
                         np.max(self.kkt_slackness, initial=0.0)))


def optimality_report(net, phi, covs, targets, P_T=None, problem="SPMP"):
    """Evaluate the optimality conditions of a solution.

    Parameters
    ----------
    net, phi
    covs : sequence of ndarray
        Forward covariances.
    targets : array_like
        Rate targets ``I⁰`` in nats (for FOP: the target ray).
    P_T : float, optional
        Power budget, required for ``problem='FOP'``.
    problem : {'SPMP', 'FOP'}

    Returns
    -------
    OptimalityReport
    """
    phi = as_phi(phi, net.L)
    targets = np.asarray(targets, dtype=float)
    covs_r, _ = covariance_transformation(net, phi, covs)
    rep = check_structure(net, phi, covs, covs_r)
    rates = link_rates(net, phi, covs)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(targets > 0, rates / np.where(targets > 0, targets, 1.0), 1.0)
    if problem == "FOP":
        if P_T is None:
            raise ValueError("FOP needs P_T")
        alpha = float(ratio[0])
        power_res = abs(sum_power(net, covs) - P_T)
    elif problem == "SPMP":
        alpha = 1.0
        power_res = 0.0
    else:
        raise ValueError("problem must be 'SPMP' or 'FOP'")
    rate_res = float(np.max(np.abs(ratio - alpha)))
    nu = rep.nu
    denom = float(np.sum(targets * nu))
    mu = 1.0 / denom if denom > 0 else np.inf
    omegas, totals = [], []
    for k in range(net.L):
        om = interference_covariance(net, phi, covs, k, FORWARD)
        H = net.channels[k][k]
        omegas.append(om)
        totals.append(herm(om + H @ covs[k] @ H.conj().T))
    neg, slack = [], []
    for l in range(net.L):
        om_r = np.array(net.linear_weight[l], dtype=complex)
        for k in range(net.L):
            if k != l and phi[k, l]:
                Hk = net.channels[k][l]
                mid = np.linalg.inv(omegas[k]) - np.linalg.inv(totals[k])
                om_r = om_r + nu[k] * Hk.conj().T @ mid @ Hk
        H = net.channels[l][l]
        theta = herm(om_r - nu[l] * H.conj().T @ np.linalg.solve(totals[l], H))
        w = np.linalg.eigvalsh(theta)
        scale = float(np.linalg.norm(om_r))
        neg.append(float(np.linalg.norm(np.clip(w, None, 0.0))) / scale)
        tr_s = float(np.real(np.trace(covs[l])))
        slack.append(abs(float(np.real(np.trace(covs[l] @ theta)))) / (scale * tr_s)
                     if tr_s > 0 else 0.0)
    return OptimalityReport(rep, alpha, rate_res, float(power_res), np.array(neg),
                            np.array(slack), float(mu))
