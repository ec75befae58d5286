"""Stream decomposition, MMSE-SIC reception and SINR duality.

A link carrying ``M_l`` streams transmits ``sum_m sqrt(p_{l,m}) t_{l,m} s_{l,m}``.
In the forward direction stream ``m`` is the ``m``-th decoded, so it sees
interference from the streams ``n > m`` of its own link.  In the reverse
direction the decoding order is flipped.

Stream-indexed vectors are flat and link-major: stream ``(l, m)`` sits at
``offsets[l] + m``.
"""

from dataclasses import dataclass
import warnings

import numpy as np

from . import kernels
from ._linalg import clip_psd, herm, thin_eig
from .errors import DimensionError, InfeasibleError
from .netmodel import (FORWARD, REVERSE, _check_direction, interference_covariance,
                       interference_covariances, reverse_network)

__all__ = [
    "StreamStrategy",
    "stream_offsets",
    "strategy_covariances",
    "mmse_sic_receivers",
    "transmit_update",
    "direct_gains",
    "crosstalk",
    "noise_terms",
    "weight_terms",
    "sinr_report",
    "sinrs",
    "dual_powers",
    "primal_powers",
    "spectral_radius",
    "decompose_covariances",
    "covariance_transformation",
    "reverse_transformation",
    "all_rates_from_sinr",
]

COND_WARN = 1e12


@dataclass(frozen=True, eq=False)
class StreamStrategy:
    """Transmit/receive vectors and stream powers.

    Attributes
    ----------
    M : tuple of int
        Streams per link.
    T : tuple of ndarray
        ``T[l]`` has unit-norm columns ``t_{l,m}``.
    R : tuple of ndarray
        ``R[l]`` has unit-norm columns ``r_{l,m}``.
    p : ndarray
        Forward powers, link-major.
    q : ndarray or None
        Reverse powers, same layout.
    """

    M: tuple
    T: tuple
    R: tuple
    p: np.ndarray
    q: np.ndarray = None

    @property
    def offsets(self):
        return stream_offsets(self.M)

    def link_slice(self, l):
        o = self.offsets
        return slice(o[l], o[l + 1])


def stream_offsets(M):
    """Start index of each link's streams, plus the total at the end."""
    return np.concatenate(([0], np.cumsum(np.asarray(M, dtype=int)))).astype(int)


def _split(vec, M):
    o = stream_offsets(M)
    return [np.asarray(vec[o[l]:o[l + 1]], dtype=float) for l in range(len(M))]


def _counts(T):
    return tuple(int(t.shape[1]) for t in T)


def strategy_covariances(vectors, powers):
    """Covariances ``sum_m powers_{l,m} v_{l,m} v_{l,m}^H`` per link."""
    M = _counts(vectors)
    out = []
    for V, pw in zip(vectors, _split(powers, M)):
        out.append(herm((V * pw) @ V.conj().T))
    return out


def _mmse_vectors(H, V, pw, omega, later):
    """Unit-norm MMSE-SIC filters for the columns of ``H @ V``.

    ``later`` selects, for each stream, which same-link streams remain
    as interference: ``'after'`` means indices greater than ``m``
    (forward), ``'before'`` means smaller indices (reverse).
    """
    HV = H @ V
    n = V.shape[1]
    out = np.zeros((H.shape[0], n), dtype=complex)
    for m in range(n):
        idx = range(m + 1, n) if later == "after" else range(0, m)
        A = np.array(omega, dtype=complex)
        for i in idx:
            if pw[i] != 0.0:
                A += pw[i] * np.outer(HV[:, i], HV[:, i].conj())
        A = herm(A)
        r = np.linalg.solve(A, HV[:, m])
        nr = np.linalg.norm(r)
        if nr == 0.0:
            r = np.zeros_like(r)
            r[0] = 1.0
        else:
            r = r / nr
            c = np.vdot(r, HV[:, m])
            if abs(c) > 0:
                r = r * (c / abs(c))
        out[:, m] = r
    return out


def _warn_cond(omega, l):
    if np.linalg.cond(omega) > COND_WARN:
        warnings.warn(f"interference covariance of link {l} is ill-conditioned", RuntimeWarning,
                      stacklevel=3)


def mmse_sic_receivers(net, phi, T, p):
    """Forward MMSE-SIC receive vectors.

    Parameters
    ----------
    net : NetworkSpec
    phi : array_like
    T : sequence of ndarray
        Transmit vectors per link (unit-norm columns).
    p : array_like
        Forward stream powers.

    Returns
    -------
    list of ndarray
    """
    M = _counts(T)
    pw = _split(p, M)
    covs = strategy_covariances(T, p)
    R = []
    for l in range(net.L):
        omega = interference_covariance(net, phi, covs, l, FORWARD)
        _warn_cond(omega, l)
        R.append(_mmse_vectors(net.channels[l][l], T[l], pw[l], omega, "after"))
    return R


def transmit_update(net, phi, R, q):
    """Reverse-link MMSE-SIC filters, used as new transmit vectors.

    Stream ``m`` of a reverse link is interfered by same-link streams with
    smaller index.

    Returns
    -------
    list of ndarray
    """
    M = _counts(R)
    qw = _split(q, M)
    covs_r = strategy_covariances(R, q)
    T = []
    for l in range(net.L):
        omega_r = interference_covariance(net, phi, covs_r, l, REVERSE)
        _warn_cond(omega_r, l)
        T.append(_mmse_vectors(net.channels[l][l].conj().T, R[l], qw[l], omega_r, "before"))
    return T


def direct_gains(net, T, R):
    """Vector of ``|r_{l,m}^H H_{l,l} t_{l,m}|^2``."""
    out = []
    for l in range(net.L):
        G = R[l].conj().T @ net.channels[l][l] @ T[l]
        out.append(np.abs(np.diag(G)) ** 2)
    return np.concatenate(out) if out else np.zeros(0)


def crosstalk(net, phi, T, R):
    """Cross-talk matrix Ψ for fixed transmit and receive vectors.

    ``Ψ[(l,m),(k,n)]`` is the power gain from stream ``(k,n)`` into the
    forward receiver of stream ``(l,m)`` after cancellation.

    Returns
    -------
    ndarray, shape (S, S)
    """
    phi = np.asarray(phi)
    M = _counts(T)
    o = stream_offsets(M)
    psi = np.zeros((o[-1], o[-1]))
    for l in range(net.L):
        for k in range(net.L):
            if M[l] == 0 or M[k] == 0:
                continue
            if k == l:
                G = np.abs(R[l].conj().T @ net.channels[l][l] @ T[l]) ** 2
                psi[o[l]:o[l + 1], o[l]:o[l + 1]] = np.triu(G, 1)
            elif phi[l, k]:
                G = np.abs(R[l].conj().T @ net.channels[l][k] @ T[k]) ** 2
                psi[o[l]:o[l + 1], o[k]:o[k + 1]] = G
    return psi


def noise_terms(net, R):
    """Forward noise seen by each receive vector, ``r^H W_l r``."""
    return np.concatenate([np.real(np.einsum("im,ij,jm->m", R[l].conj(), net.noise_cov[l], R[l]))
                           for l in range(net.L)])


def weight_terms(net, T):
    """Reverse noise seen by each transmit vector, ``t^H Ŵ_l t``."""
    return np.concatenate([np.real(np.einsum("im,ij,jm->m", T[l].conj(), net.linear_weight[l], T[l]))
                           for l in range(net.L)])


def sinrs(psi, gains, powers, noise, direction=FORWARD):
    """SINR vector from cross-talk, direct gains, powers and noise terms."""
    _check_direction(direction)
    A = psi if direction == FORWARD else psi.T
    powers = np.asarray(powers, dtype=float)
    return powers * gains / (noise + A @ powers)


def sinr_report(net, phi, T, R, powers, direction=FORWARD):
    """Cross-talk matrix and per-stream SINRs.

    Parameters
    ----------
    net, phi
    T, R : sequence of ndarray
        Forward transmit and receive vectors.  In the reverse direction
        ``R`` transmits and ``T`` receives.
    powers : array_like
        ``p`` (forward) or ``q`` (reverse).
    direction : {'forward', 'reverse'}

    Returns
    -------
    psi : ndarray
    sinr : ndarray
    """
    psi = crosstalk(net, phi, T, R)
    g = direct_gains(net, T, R)
    noise = noise_terms(net, R) if direction == FORWARD else weight_terms(net, T)
    return psi, sinrs(psi, g, powers, noise, direction)


def spectral_radius(A):
    """Spectral radius of a small nonnegative matrix."""
    if A.size == 0:
        return 0.0
    if A.shape[0] <= 200:
        return float(np.max(np.abs(np.linalg.eigvals(A))))
    x, lam, _, _ = kernels.power_iteration(A + np.eye(A.shape[0]), np.ones(A.shape[0]), 1e-12, 200)
    return lam - 1.0


def _mm_solve(A, gains, targets, rhs):
    targets = np.asarray(targets, dtype=float)
    gains = np.asarray(gains, dtype=float)
    if np.any(targets < 0):
        raise ValueError("target SINRs must be nonnegative")
    d = np.where(targets > 0, targets / np.where(gains > 0, gains, 1.0), 0.0)
    if np.any((targets > 0) & (gains <= 0)):
        raise InfeasibleError("a stream with positive target has zero direct gain", np.inf)
    DA = d[:, None] * A
    rho = spectral_radius(DA)
    if rho >= 1.0 - 1e-14:
        raise InfeasibleError(f"SINR targets infeasible: spectral radius {rho:.6g} >= 1", rho)
    n = len(d)
    M = np.eye(n) - DA
    b = d * rhs
    x = np.linalg.solve(M, b)
    x += np.linalg.solve(M, b - M @ x)
    return np.clip(x, 0.0, None)


def dual_powers(psi, gains, targets, weights=None):
    """Reverse powers achieving ``targets`` for fixed vectors.

    Solves ``(D^{-1} - Ψ^T) q = w`` with ``D = diag(targets / gains)``,
    written as ``(I - DΨ^T) q = D w`` so that zero targets are allowed.

    Parameters
    ----------
    psi : ndarray
        Cross-talk matrix.
    gains : ndarray
        Direct gains ``|r^H H t|^2``.
    targets : ndarray
        Target SINRs.
    weights : ndarray, optional
        Reverse noise terms; all ones by default.

    Returns
    -------
    ndarray

    Raises
    ------
    InfeasibleError
        If the spectral radius of ``DΨ^T`` is at least one.
    """
    w = np.ones(len(gains)) if weights is None else np.asarray(weights, dtype=float)
    return _mm_solve(np.asarray(psi).T, gains, targets, w)


def primal_powers(psi, gains, targets, noise=None):
    """Forward counterpart of :func:`dual_powers`: ``(D^{-1} - Ψ) p = σ``."""
    s = np.ones(len(gains)) if noise is None else np.asarray(noise, dtype=float)
    return _mm_solve(np.asarray(psi), gains, targets, s)


def decompose_covariances(covs, M=None):
    """Eigen-based stream decomposition of each covariance.

    Parameters
    ----------
    covs : sequence of ndarray
    M : sequence of int, optional
        Stream counts.  Each must be at least the numerical rank; extra
        streams get zero power along orthogonal eigenvectors.

    Returns
    -------
    T : list of ndarray
    p : ndarray
    """
    T, p = [], []
    for l, S in enumerate(covs):
        S = clip_psd(S, f"covariance {l}")
        U, w = thin_eig(S)
        r = len(w)
        m = r if M is None else int(M[l])
        if m < r:
            raise DimensionError(f"link {l}: {m} streams cannot carry a rank-{r} covariance")
        if m > S.shape[0]:
            raise DimensionError(f"link {l}: {m} streams exceed {S.shape[0]} antennas")
        if m > r:
            full = np.linalg.eigh(herm(S))[1][:, ::-1]
            U = full[:, :m]
            w = np.concatenate((w, np.zeros(m - r)))
        T.append(U)
        p.append(w)
    return T, (np.concatenate(p) if p else np.zeros(0))


def covariance_transformation(net, phi, covs, M=None, strategy=None):
    """Map forward covariances to reverse covariances.

    The forward covariances are split into streams, MMSE-SIC receivers
    are computed, and reverse powers are chosen to reproduce the forward
    SINRs.  The result satisfies reverse rate >= forward rate per link and
    ``sum Tr(Σ̂_l W_l) = sum Tr(Σ_l Ŵ_l)``.

    Parameters
    ----------
    net : NetworkSpec
    phi : array_like
    covs : sequence of ndarray
        Forward covariances.
    M : sequence of int, optional
        Stream counts (default: numerical ranks).
    strategy : StreamStrategy, optional
        Use these transmit vectors and powers instead of decomposing.

    Returns
    -------
    covs_r : list of ndarray
    strategy : StreamStrategy
        Includes receive vectors and dual powers.
    """
    if strategy is None:
        T, p = decompose_covariances(covs, M)
    else:
        T, p = list(strategy.T), np.asarray(strategy.p, dtype=float)
    R = mmse_sic_receivers(net, phi, T, p)
    psi = crosstalk(net, phi, T, R)
    g = direct_gains(net, T, R)
    gamma = sinrs(psi, g, p, noise_terms(net, R), FORWARD)
    q = dual_powers(psi, g, gamma, weight_terms(net, T))
    covs_r = strategy_covariances(R, q)
    strat = StreamStrategy(_counts(T), tuple(T), tuple(R), p, q)
    return covs_r, strat


def reverse_transformation(net, phi, covs_r, M=None):
    """Map reverse covariances back to forward ones (the dual direction).

    Returns
    -------
    covs_f : list of ndarray
    strategy : StreamStrategy
        Expressed in forward terms: ``T`` are forward transmit vectors,
        ``R`` forward receive vectors, ``p`` forward powers, ``q`` reverse.
    """
    rnet, rphi = reverse_network(net, phi)
    covs_f, s = covariance_transformation(rnet, rphi, covs_r, M)
    # The reverse network decodes its streams in the opposite order; flip
    # the stream order so that the forward convention holds.
    T = tuple(t[:, ::-1] for t in s.R)
    R = tuple(r[:, ::-1] for r in s.T)
    p = np.concatenate(_flip(s.q, s.M)) if len(s.q) else s.q
    q = np.concatenate(_flip(s.p, s.M)) if len(s.p) else s.p
    return covs_f, StreamStrategy(s.M, T, R, p, q)


def _flip(vec, M):
    return [v[::-1] for v in _split(vec, M)]


def all_rates_from_sinr(sinr, M):
    """Per-link sum of ``log(1 + γ)`` over streams."""
    return np.array([float(np.sum(np.log1p(v))) for v in _split(sinr, M)])
