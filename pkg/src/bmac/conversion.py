"""Bridges between rate targets and per-stream SINR targets.

Two constructive decompositions of a covariance ``Σ = Ṫ Ṫ^H`` into a fixed
number of streams are provided: one that makes all MMSE-SIC stream SINRs
equal, and one that spreads power evenly over the streams.
"""

import numpy as np
from scipy import linalg as sla

from ._linalg import clip_psd, eigh_desc, herm, inv_sqrt_psd, numerical_rank
from .errors import PreconditionError
from .netmodel import FORWARD, interference_covariance
from .streams import StreamStrategy

__all__ = [
    "rate_to_sinr_targets",
    "equal_sinr_decomposition",
    "equal_power_decomposition",
    "sqrt_factor",
    "strategy_from_covariances",
]


def rate_to_sinr_targets(rates, M):
    """Per-stream SINR target ``exp(I/M) - 1`` for each link.

    Parameters
    ----------
    rates : array_like
        Rate targets in nats.
    M : array_like of int
        Streams per link.

    Returns
    -------
    ndarray
    """
    rates = np.asarray(rates, dtype=float)
    M = np.asarray(M, dtype=float)
    return np.expm1(rates / M)


def _complement_basis(V):
    """Orthonormal basis of the orthogonal complement of the columns of V."""
    n = V.shape[0]
    if V.shape[1] == 0:
        return np.eye(n, dtype=complex)
    return sla.null_space(V.conj().T, rcond=1e-12)


def equal_sinr_decomposition(hbar, M=None):
    """Unitary ``V`` giving every stream of ``hbar @ V`` the same SINR.

    Streams are decoded in index order with MMSE-SIC under unit white
    noise.  The construction runs backward from the last stream: each new
    vector mixes the top and bottom eigenvectors of the remaining
    compressed SINR operator so that its SINR hits ``exp(I/M) - 1``.

    Parameters
    ----------
    hbar : ndarray, shape (n, M)
        Whitened channel multiplied by a square-root factor of Σ.
    M : int, optional
        Number of streams; must equal ``hbar.shape[1]``.

    Returns
    -------
    ndarray, shape (M, M)
        Unitary matrix.
    """
    hbar = np.atleast_2d(np.asarray(hbar, dtype=complex))
    n, m_cols = hbar.shape
    if M is None:
        M = m_cols
    if M != m_cols:
        raise PreconditionError(f"hbar has {m_cols} columns but M={M}")
    r = numerical_rank(np.linalg.svd(hbar, compute_uv=False))
    if M < r:
        raise PreconditionError(f"M={M} is below the rank {r}")
    total = float(np.sum(np.log1p(np.linalg.svd(hbar, compute_uv=False) ** 2)))
    target = np.expm1(total / M)
    V = np.zeros((M, M), dtype=complex)
    for m in range(M - 1, -1, -1):
        later = V[:, m + 1:]
        Hl = hbar @ later
        A = hbar.conj().T @ np.linalg.solve(np.eye(n) + Hl @ Hl.conj().T, hbar)
        lam, U = eigh_desc(A)
        # Project the eigenvectors onto the complement of the chosen vectors
        # and rebuild the operator there.
        U_hat = U - later @ (later.conj().T @ U)
        A_tilde = herm((U_hat * lam) @ U_hat.conj().T)
        B = _complement_basis(later)
        mu, W = eigh_desc(B.conj().T @ A_tilde @ B)
        u1 = B @ W[:, 0]
        um = B @ W[:, -1]
        hi, lo = float(mu[0]), float(mu[-1])
        if hi - lo <= 1e-14 * max(abs(hi), 1.0):
            v = u1
        else:
            a = float(np.clip((target - lo) / (hi - lo), 0.0, 1.0))
            v = np.sqrt(a) * u1 + np.sqrt(1.0 - a) * um
        V[:, m] = v / np.linalg.norm(v)
    return V


def equal_power_decomposition(sigma, M):
    """Square-root factor of ``sigma`` with ``M`` equal-power columns.

    Parameters
    ----------
    sigma : ndarray, shape (n, n)
        PSD covariance.
    M : int
        Number of streams, at least the rank of ``sigma``.

    Returns
    -------
    ndarray, shape (n, M)
        ``T`` with ``T @ T^H == sigma`` and column norms ``Tr(sigma)/M``.
    """
    sigma = clip_psd(sigma, "sigma")
    n = sigma.shape[0]
    lam, U = eigh_desc(sigma)
    lam = np.clip(lam, 0.0, None)
    if M < numerical_rank(lam):
        raise PreconditionError(f"M={M} is below the rank of sigma")
    k = np.arange(M)
    F = np.exp(-2j * np.pi * np.outer(k, k) / M) / np.sqrt(M)
    F0 = np.zeros((n, M), dtype=complex)
    if M >= n:
        F0[:, :] = F[:n, :]
    else:
        F0[:M, :] = F
    return (U * np.sqrt(lam)) @ F0


def sqrt_factor(sigma, M):
    """Eigen square-root factor ``U D^{1/2}`` with exactly ``M`` columns."""
    sigma = clip_psd(sigma, "sigma")
    lam, U = eigh_desc(sigma)
    lam = np.clip(lam, 0.0, None)
    r = numerical_rank(lam)
    if M < r:
        raise PreconditionError(f"M={M} is below the rank {r}")
    F = U * np.sqrt(lam)
    if M <= F.shape[1]:
        return F[:, :M]
    return np.hstack((F, np.zeros((F.shape[0], M - F.shape[1]), dtype=complex)))


def strategy_from_covariances(net, phi, covs, M, kind="equal_sinr"):
    """Stream strategy with ``M[l]`` streams reproducing ``covs``.

    Parameters
    ----------
    net, phi
    covs : sequence of ndarray
        Forward covariances.
    M : sequence of int
    kind : {'equal_sinr', 'equal_power'}
        ``equal_sinr`` equalises MMSE-SIC SINRs within each link given
        the interference produced by ``covs``.

    Returns
    -------
    StreamStrategy
        With ``R`` left empty and ``q`` unset.
    """
    T, p = [], []
    for l in range(net.L):
        if kind == "equal_power":
            P = equal_power_decomposition(covs[l], int(M[l]))
        elif kind == "equal_sinr":
            Td = sqrt_factor(covs[l], int(M[l]))
            omega = interference_covariance(net, phi, covs, l, FORWARD)
            hbar = inv_sqrt_psd(omega) @ net.channels[l][l] @ Td
            P = Td @ equal_sinr_decomposition(hbar, int(M[l]))
        else:
            raise ValueError(f"unknown decomposition {kind!r}")
        norms = np.linalg.norm(P, axis=0)
        Tl = np.zeros_like(P)
        for m in range(P.shape[1]):
            if norms[m] > 0:
                Tl[:, m] = P[:, m] / norms[m]
            else:
                Tl[:, m] = np.eye(P.shape[0])[:, m % P.shape[0]]
        T.append(Tl)
        p.append(norms ** 2)
    return StreamStrategy(tuple(int(m) for m in M), tuple(T), tuple(), np.concatenate(p))
