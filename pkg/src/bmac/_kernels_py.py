"""Pure-Python reference implementations of the numerical kernels.

These mirror :mod:`bmac._core` exactly and are selected automatically when
the compiled extension is unavailable.
"""

import math

import numpy as np

__all__ = ["power_iteration", "waterfill_rate", "waterfill_budget", "waterfill_weighted"]


def power_iteration(A, x0, tol=1e-13, max_iter=10000):
    """Dominant eigenpair of a nonnegative matrix by power iteration.

    Parameters
    ----------
    A : ndarray, shape (n, n)
        Entrywise nonnegative matrix.
    x0 : ndarray, shape (n,)
        Positive starting vector.
    tol : float
        Stop when the 1-norm change of the normalised iterate is below tol.
    max_iter : int

    Returns
    -------
    x : ndarray
        Eigenvector normalised to unit 1-norm.
    lam : float
        Eigenvalue estimate.
    iters : int
    converged : bool
    """
    A = np.ascontiguousarray(A, dtype=float)
    x = np.array(x0, dtype=float)
    x /= np.sum(x)
    lam = 0.0
    for it in range(1, max_iter + 1):
        y = A @ x
        lam = float(np.sum(y))
        if lam <= 0.0:
            return x, 0.0, it, True
        y /= lam
        if float(np.sum(np.abs(y - x))) < tol:
            return y, lam, it, True
        x = y
    return x, lam, max_iter, False


def waterfill_rate(delta, target):
    """Water level meeting a rate target (active-set loop).

    Finds ``d_j = (nu - 1/delta_j)^+`` with ``sum log(1 + delta_j d_j) = target``.

    Parameters
    ----------
    delta : ndarray
        Positive channel gains.
    target : float
        Rate in nats, nonnegative.

    Returns
    -------
    d : ndarray
    nu : float
    """
    delta = np.asarray(delta, dtype=float)
    n = delta.shape[0]
    d = np.zeros(n)
    if n == 0:
        return d, 0.0
    if target <= 0.0:
        return d, 1.0 / float(np.max(delta))
    active = np.ones(n, dtype=bool)
    top = int(np.argmax(delta))  # the strongest mode is active for any positive target
    while True:
        k = int(np.sum(active))
        nu = math.exp((target - float(np.sum(np.log(delta[active])))) / k)
        cand = nu - 1.0 / delta
        neg = active & (cand < 0.0)
        neg[top] = False
        if not np.any(neg):
            d[active] = np.maximum(cand[active], 0.0)
            return d, nu
        active &= ~neg


def waterfill_budget(delta, budget):
    """Classical water-filling of a total power ``budget`` over gains ``delta``.

    Returns
    -------
    d : ndarray
    nu : float
    """
    delta = np.asarray(delta, dtype=float)
    n = delta.shape[0]
    d = np.zeros(n)
    if n == 0:
        return d, 0.0
    order = np.argsort(-delta, kind="stable")
    inv = 1.0 / delta[order]
    if budget <= 0.0:
        return d, float(inv[0])
    csum = np.cumsum(inv)
    for k in range(n, 0, -1):
        nu = (budget + csum[k - 1]) / k
        if nu >= inv[k - 1]:
            d[order[:k]] = nu - inv[:k]
            return d, float(nu)
    d[order[0]] = budget
    return d, float(budget + inv[0])


def waterfill_weighted(delta, weight, cap):
    """Level ``nu`` with ``sum weight_j (nu - 1/delta_j)^+ = cap``.

    Used to enforce a trace cap when the trace of each water-filled mode
    carries a positive weight.

    Returns
    -------
    d : ndarray
    nu : float
    """
    delta = np.asarray(delta, dtype=float)
    weight = np.asarray(weight, dtype=float)
    n = delta.shape[0]
    d = np.zeros(n)
    if n == 0:
        return d, 0.0
    order = np.argsort(-delta, kind="stable")
    inv = 1.0 / delta[order]
    w = weight[order]
    if cap <= 0.0:
        return d, float(inv[0])
    sw = 0.0
    swi = 0.0
    for k in range(n):
        sw += w[k]
        swi += w[k] * inv[k]
        nu = (cap + swi) / sw
        if k == n - 1 or nu <= inv[k + 1]:
            d[order[:k + 1]] = np.maximum(nu - inv[:k + 1], 0.0)
            return d, float(nu)
    return d, float(inv[0])
