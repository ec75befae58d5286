"""Independent reference solutions for small cases.

Nothing here imports from the solver modules; every result is computed
from first principles with plain numpy/scipy so that it can serve as a
check on them.
"""

import numpy as np
from scipy.spatial import ConvexHull

__all__ = [
    "oracle_scalar_network",
    "oracle_single_user",
    "oracle_scalar_mac_boundary",
    "oracle_hull",
    "hull_ray_radius",
]


def oracle_scalar_network(gains, targets, coupling, noise=None):
    """Minimal powers of a scalar network with fixed coupling.

    Solves ``p = (I - Γ B)^{-1} Γ σ²/g`` directly, where ``Γ`` holds the
    SINR targets ``e^{I} - 1`` and ``B[l, k] = Φ[l, k] g[l, k] / g[l, l]``.

    Parameters
    ----------
    gains : array_like, shape (L, L)
        Power gains ``|h_{l,k}|^2``.
    targets : array_like, shape (L,)
        Rate targets in nats.
    coupling : array_like, shape (L, L)
    noise : array_like, optional
        Noise powers (default ones).

    Returns
    -------
    powers : ndarray or None
        ``None`` when infeasible.
    total : float
        ``inf`` when infeasible.
    radius : float
        Spectral radius of ``Γ B``.
    """
    g = np.asarray(gains, dtype=float)
    L = g.shape[0]
    phi = np.asarray(coupling, dtype=float) * (1 - np.eye(L))
    gamma = np.expm1(np.asarray(targets, dtype=float))
    sigma = np.ones(L) if noise is None else np.asarray(noise, dtype=float)
    direct = np.diag(g)
    B = phi * g / direct[:, None]
    GB = gamma[:, None] * B
    radius = float(np.max(np.abs(np.linalg.eigvals(GB)))) if L else 0.0
    if radius >= 1:
        return None, float("inf"), radius
    p = np.linalg.solve(np.eye(L) - GB, gamma * sigma / direct)
    return p, float(p.sum()), radius


def oracle_single_user(H, rate, tol=1e-14):
    """Minimum-power input achieving ``rate`` nats on ``y = Hx + n``.

    Bisection on the water level over the squared singular values.

    Returns
    -------
    power : float
    cov : ndarray
    """
    H = np.atleast_2d(np.asarray(H, dtype=complex))
    n = H.shape[1]
    if rate <= 0:
        return 0.0, np.zeros((n, n), complex)
    _, s, Vh = np.linalg.svd(H)
    keep = s > 1e-12 * (s[0] if s.size else 1)
    delta = s[keep] ** 2
    V = Vh[: keep.sum()].conj().T

    def achieved(nu):
        return float(np.sum(np.log(np.maximum(nu * delta, 1.0))))

    lo, hi = 0.0, 1.0 / delta.min()
    while achieved(hi) < rate:
        hi *= 2
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        if achieved(mid) < rate:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * hi:
            break
    nu = 0.5 * (lo + hi)
    d = np.maximum(nu - 1 / delta, 0.0)
    cov = (V * d) @ V.conj().T
    return float(d.sum()), cov


def oracle_scalar_mac_boundary(g1, g2, power, n=4001):
    """Closed-form boundary curves of a two-user scalar MAC under a sum-power limit.

    For each split ``p1 + p2 = power`` and each cancellation order, the
    user decoded last sees no interference.

    Returns
    -------
    ndarray, shape (2 n, 2)
        Rate pairs in nats from both orders.
    """
    p1 = np.linspace(0.0, power, n)
    p2 = power - p1
    # user 1 decoded last
    a = np.column_stack([np.log1p(g1 * p1), np.log1p(g2 * p2 / (1 + g1 * p1))])
    # user 2 decoded last
    b = np.column_stack([np.log1p(g1 * p1 / (1 + g2 * p2)), np.log1p(g2 * p2)])
    return np.vstack([a, b])


def oracle_hull(points):
    """Convex hull of rate pairs together with the origin and axis projections."""
    pts = np.asarray(points, dtype=float)
    extra = np.vstack([[0.0, 0.0], np.column_stack([pts[:, 0], 0 * pts[:, 0]]),
                       np.column_stack([0 * pts[:, 1], pts[:, 1]])])
    return ConvexHull(np.vstack([pts, extra]))


def hull_ray_radius(hull, direction):
    """Largest ``t`` with ``t * direction`` inside ``hull``."""
    d = np.asarray(direction, dtype=float)
    A, b = hull.equations[:, :-1], -hull.equations[:, -1]
    ad = A @ d
    pos = ad > 1e-15
    return float(np.min(b[pos] / ad[pos]))
