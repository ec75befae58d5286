"""Small dense linear-algebra helpers shared across modules."""

import numpy as np
from scipy import linalg as sla

from .errors import DomainError

PSD_RTOL = 1e-10
RANK_RTOL = 1e-10


def herm(a):
    """Return the Hermitian part of a square matrix."""
    a = np.asarray(a)
    return 0.5 * (a + a.conj().T)


def eigh_desc(a):
    """Hermitian eigendecomposition with eigenvalues in descending order."""
    w, v = np.linalg.eigh(herm(a))
    return w[::-1], v[:, ::-1]


def clip_psd(a, name="matrix"):
    """Validate a Hermitian PSD matrix and clip tiny negative eigenvalues.

    Parameters
    ----------
    a : ndarray
        Square matrix, assumed Hermitian up to round-off.
    name : str
        Label used in the error message.

    Returns
    -------
    ndarray
        Hermitian PSD matrix.

    Raises
    ------
    DomainError
        If an eigenvalue is below ``-1e-10 * trace``.
    """
    a = herm(np.asarray(a, dtype=complex))
    if a.size == 0:
        return a
    w, v = np.linalg.eigh(a)
    tr = float(np.sum(np.abs(w)))
    if w[0] < -PSD_RTOL * max(tr, 1e-300) and w[0] < -1e-300:
        raise DomainError(f"{name} is not positive semidefinite (min eigenvalue {w[0]:.3e})")
    if w[0] < 0:
        w = np.clip(w, 0.0, None)
        a = (v * w) @ v.conj().T
    return a


def inv_sqrt_psd(a, floor=1e-14):
    """Inverse square root of a Hermitian positive-definite matrix."""
    w, v = np.linalg.eigh(herm(a))
    w = np.maximum(w, floor * max(w[-1], 1e-300))
    return herm((v / np.sqrt(w)) @ v.conj().T)


def sqrt_psd(a):
    """Principal square root of a Hermitian PSD matrix."""
    w, v = np.linalg.eigh(herm(a))
    w = np.clip(w, 0.0, None)
    return herm((v * np.sqrt(w)) @ v.conj().T)


def logdet_pd(a):
    """Natural log-determinant of a Hermitian positive-definite matrix."""
    c = sla.cholesky(herm(a), lower=True, check_finite=False)
    return 2.0 * float(np.sum(np.log(np.real(np.diag(c)))))


def solve_pd(a, b):
    """Solve ``a x = b`` for Hermitian positive-definite ``a``."""
    return sla.solve(herm(a), b, assume_a="pos", check_finite=False)


def numerical_rank(values, rtol=RANK_RTOL):
    """Count entries above ``rtol`` times the largest entry."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return 0
    top = float(np.max(values))
    if top <= 0.0:
        return 0
    return int(np.sum(values > rtol * top))


def thin_eig(a, rtol=RANK_RTOL):
    """Thin eigendecomposition of a PSD matrix at its numerical rank.

    Returns
    -------
    vectors : ndarray, shape (n, r)
    values : ndarray, shape (r,)
        Eigenvalues in descending order.
    """
    w, v = eigh_desc(a)
    r = numerical_rank(np.clip(w, 0.0, None), rtol)
    return v[:, :r], np.clip(w[:r], 0.0, None)


def rank_of(h, rtol=RANK_RTOL):
    """Numerical rank of an arbitrary matrix via its singular values."""
    if h.size == 0:
        return 0
    return numerical_rank(np.linalg.svd(h, compute_uv=False), rtol)


def crandn(rng, shape):
    """Circularly-symmetric complex Gaussian samples with unit variance."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
