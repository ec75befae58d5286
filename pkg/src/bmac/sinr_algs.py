"""Stream-level solvers built on SINR duality.

``algorithm_a`` maximises the common scaling ``α`` of the per-stream SINR
targets under a linear power budget.  ``algorithm_b`` minimises the
weighted sum power subject to the SINR targets.  Both alternate between
forward receive-vector updates and reverse transmit-vector updates.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from ._linalg import crandn, rank_of
from .conversion import rate_to_sinr_targets, strategy_from_covariances
from .errors import ConvergenceError, InfeasibleError, PreconditionError
from .netmodel import FORWARD, as_phi, link_rates, sum_power
from .streams import (StreamStrategy, all_rates_from_sinr, crosstalk, direct_gains,
                      mmse_sic_receivers, noise_terms, primal_powers, dual_powers, sinrs, stream_offsets,
                      strategy_covariances, transmit_update, weight_terms,
                      covariance_transformation)

__all__ = [
    "SolverResult",
    "stream_counts",
    "stream_targets",
    "initial_vectors",
    "solve_extended_eigensystem",
    "algorithm_a",
    "algorithm_b",
]


@dataclass
class SolverResult:
    """Outcome of an iterative solver.

    Attributes
    ----------
    covs_f, covs_r : list of ndarray
        Forward covariances and their reverse counterparts.
    strategy : StreamStrategy or None
    rates : ndarray
        Forward link rates (nats).
    sum_power : float
        Weighted forward sum power.
    objective : float
        ``α`` for the feasibility problem, sum power otherwise.
    trace : list of dict
        One record per iteration.
    converged : bool
    iterations : int
    info : dict
        Solver-specific extras.
    """

    covs_f: list
    covs_r: list
    strategy: object
    rates: np.ndarray
    sum_power: float
    objective: float
    trace: list = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    info: dict = field(default_factory=dict)


def stream_counts(net, targets):
    """Default stream counts: rank of each direct channel, zero for zero targets."""
    return tuple(rank_of(net.channels[l][l]) if targets[l] > 0 else 0 for l in range(net.L))


def stream_targets(targets, M):
    """Per-stream SINR targets, link-major."""
    g = rate_to_sinr_targets(targets, np.maximum(M, 1))
    return np.concatenate([np.full(m, g[l]) for l, m in enumerate(M)]) if sum(M) else np.zeros(0)


def initial_vectors(net, M, init="random", seed=0):
    """Initial unit-norm transmit vectors.

    Parameters
    ----------
    net : NetworkSpec
    M : sequence of int
    init : {'random', 'svd'}
        ``svd`` takes the leading right singular vectors of each direct
        channel.  ``random`` rotates that basis by a seeded random unitary
        of size ``M_l``, which keeps every stream inside the row space of
        the channel while avoiding the fixed point of equal-SINR
        allocation on singular vectors.
    seed : int

    Returns
    -------
    list of ndarray
    """
    rng = np.random.default_rng(seed)
    T = []
    for l in range(net.L):
        m = int(M[l])
        if m == 0:
            T.append(np.zeros((net.tx_antennas[l], 0), dtype=complex))
            continue
        V = np.linalg.svd(net.channels[l][l])[2].conj().T[:, :m]
        if init == "random":
            Q, R = np.linalg.qr(crandn(rng, (m, m)))
            Q = Q * (np.diag(R) / np.abs(np.diag(R)))
            V = V @ Q
        elif init != "svd":
            raise ValueError(f"unknown init {init!r}")
        T.append(V / np.linalg.norm(V, axis=0))
    return T


def solve_extended_eigensystem(D, psi, P_T, side=FORWARD, noise=None, weight=None, x0=None):
    """Dominant eigenpair of the extended coupling matrix.

    For ``side='forward'`` the matrix is
    ``[[DΨ, Dσ], [cᵀDΨ/P_T, cᵀDσ/P_T]]`` with noise terms ``σ`` and power
    weights ``c``; the reverse side uses ``Ψᵀ`` and swaps the roles of the
    two vectors.  Both default to all ones.

    Parameters
    ----------
    D : ndarray
        Diagonal of ``D`` (target SINR over direct gain).
    psi : ndarray
        Cross-talk matrix.
    P_T : float
    side : {'forward', 'reverse'}
    noise, weight : ndarray, optional
        Forward noise terms ``r^H W r`` and power weights ``t^H Ŵ t``.
    x0 : ndarray, optional
        Starting vector for the power iteration.

    Returns
    -------
    powers : ndarray
        Stream powers with ``weightsᵀ powers = P_T``.
    lam : float
        Dominant eigenvalue.
    """
    D = np.asarray(D, dtype=float)
    n = len(D)
    sig = np.ones(n) if noise is None else np.asarray(noise, dtype=float)
    wgt = np.ones(n) if weight is None else np.asarray(weight, dtype=float)
    if side == FORWARD:
        A, s, c = psi, sig, wgt
    else:
        A, s, c = psi.T, wgt, sig
    X = np.empty((n + 1, n + 1))
    DA = D[:, None] * A
    X[:n, :n] = DA
    X[:n, n] = D * s
    X[n, :n] = c @ DA / P_T
    X[n, n] = c @ (D * s) / P_T
    start = np.ones(n + 1) if x0 is None else np.append(np.clip(x0, 1e-300, None), 1.0)
    x, lam, _, ok = kernels.power_iteration(X, start, 1e-14, 10000)
    if not ok:
        if n + 1 < 200:
            w, V = np.linalg.eig(X)
            i = int(np.argmax(np.real(w)))
            lam = float(np.real(w[i]))
            x = np.abs(np.real(V[:, i]))
        else:
            raise ConvergenceError("power iteration did not converge in 10^4 steps")
    if x[n] <= 0:
        raise ConvergenceError("dominant eigenvector has a zero power-constraint component")
    return np.asarray(x[:n]) / x[n], float(lam)


def _init_strategy(net, phi, targets, init, seed, P_T=None, unit_power=False):
    """Transmit vectors, powers, stream counts and per-stream targets."""
    if isinstance(init, StreamStrategy):
        M = tuple(init.M)
        T = [np.asarray(t, dtype=complex) for t in init.T]
        p = np.asarray(init.p, dtype=float).copy()
    elif isinstance(init, (list, tuple)):
        base = stream_counts(net, targets)
        M = tuple(max(base[l], rank_of(np.asarray(init[l]))) if targets[l] > 0 else 0
                  for l in range(net.L))
        s = strategy_from_covariances(net, phi, init, M)
        T, p = [np.asarray(t) for t in s.T], s.p.copy()
    else:
        M = stream_counts(net, targets)
        T = initial_vectors(net, M, init, seed)
        n = sum(M)
        if unit_power or P_T is None:
            p = np.ones(n)
        else:
            w = weight_terms(net, T)
            p = np.full(n, P_T / float(np.sum(w))) if n else np.zeros(0)
    return list(T), p, M, stream_targets(targets, M)


def _check_positive(net, phi, T, p, gamma0):
    R = mmse_sic_receivers(net, phi, T, p)
    psi = crosstalk(net, phi, T, R)
    g = direct_gains(net, T, R)
    s = sinrs(psi, g, p, noise_terms(net, R))
    if np.any((gamma0 > 0) & (s <= 0)):
        raise PreconditionError("initial point leaves a stream with zero SINR")


def _finish(net, phi, T, p, M, objective, trace, converged, it, info=None):
    covs_f = strategy_covariances(T, p)
    covs_r, strat = covariance_transformation(
        net, phi, covs_f, strategy=StreamStrategy(tuple(M), tuple(T), (), p))
    rates = link_rates(net, phi, covs_f)
    return SolverResult(covs_f, covs_r, strat, rates, sum_power(net, covs_f), float(objective),
                        trace, bool(converged), it, dict(info or {}))


def algorithm_a(net, phi, targets, P_T, init="random", tol=1e-8, max_iter=2000, seed=0):
    """Maximise the common scaling of the SINR targets under a power budget.

    Parameters
    ----------
    net : NetworkSpec
    phi : array_like
    targets : array_like
        Rate targets ``I⁰_l`` in nats; converted to per-stream SINR
        targets with ``M_l = rank(H_{l,l})`` streams.
    P_T : float
        Budget of the linear constraint ``sum Tr(Σ_l Ŵ_l)``.
    init : {'random', 'svd'} or StreamStrategy or list of ndarray
        Initial transmit vectors, a full strategy, or covariances to
        warm-start from.
    tol : float
        Relative change of ``α`` that stops the iteration.
    max_iter : int
    seed : int
        Seed for the random initial rotation.

    Returns
    -------
    SolverResult
        ``objective`` is ``α``; ``info['feasible']`` is ``α >= 1``.
    """
    phi = as_phi(phi, net.L)
    targets = np.asarray(targets, dtype=float)
    T, p, M, gamma0 = _init_strategy(net, phi, targets, init, seed, P_T)
    if isinstance(init, (list, tuple)) and not isinstance(init, StreamStrategy):
        w = weight_terms(net, T)
        tot = float(w @ p)
        p = p * (P_T / tot) if tot > 0 else np.full(len(p), P_T / max(float(np.sum(w)), 1e-300))
    _check_positive(net, phi, T, p, gamma0)
    trace, alpha_prev, converged = [], None, False
    q = np.zeros_like(p)
    xq = xp = None
    it = 0
    R = mmse_sic_receivers(net, phi, T, p)
    for it in range(1, max_iter + 1):
        R = mmse_sic_receivers(net, phi, T, p)
        psi = crosstalk(net, phi, T, R)
        g = direct_gains(net, T, R)
        sig = noise_terms(net, R)
        D = gamma0 / g
        q, _ = solve_extended_eigensystem(D, psi, P_T, "reverse", sig, weight_terms(net, T), xq)
        xq = q
        T = transmit_update(net, phi, R, q)
        psi = crosstalk(net, phi, T, R)
        g = direct_gains(net, T, R)
        D = gamma0 / g
        w = weight_terms(net, T)
        p, lam = solve_extended_eigensystem(D, psi, P_T, FORWARD, sig, w, xp)
        xp = p
        alpha = 1.0 / lam
        trace.append({"iteration": it, "objective": alpha, "sum_power": float(w @ p)})
        if alpha_prev is not None and abs(alpha - alpha_prev) <= tol * abs(alpha):
            converged = True
            break
        alpha_prev = alpha
    res = _finish(net, phi, T, p, M, alpha, trace, converged, it)
    res.info["feasible"] = bool(alpha >= 1.0 - tol)
    res.info["alpha"] = float(alpha)
    return res


def algorithm_b(net, phi, targets, init="random", tol=1e-8, max_iter=2000, power_cap=None,
                seed=0):
    """Minimise the weighted sum power subject to rate targets.

    Rate targets are split into equal per-stream SINR targets.  Each
    iteration performs one forward and one reverse half: a receive (or
    transmit) vector update, one step of standard power control, and a
    dual power computation.

    Parameters
    ----------
    net, phi
    targets : array_like
        Rate targets in nats.
    init : {'random', 'svd'} or StreamStrategy or list of ndarray
    tol : float
        Relative change of sum power and SINR mismatch that stop the
        iteration.
    max_iter : int
    power_cap : float, optional
        Declare infeasibility when the sum power exceeds this value.
        Default: ``1e6`` times the total noise power.
    seed : int

    Returns
    -------
    SolverResult
        ``objective`` is the sum power.

    Raises
    ------
    InfeasibleError
        When the sum power exceeds ``power_cap``.
    """
    phi = as_phi(phi, net.L)
    targets = np.asarray(targets, dtype=float)
    if power_cap is None:
        power_cap = 1e6 * float(sum(np.real(np.trace(w)) for w in net.noise_cov))
    T, p, M, gamma0 = _init_strategy(net, phi, targets, init, seed, unit_power=True)
    _check_positive(net, phi, T, p, gamma0)
    trace, prev, converged = [], None, False
    q = np.zeros_like(p)
    it = 0
    R = mmse_sic_receivers(net, phi, T, p)
    for it in range(1, max_iter + 1):
        # forward half
        R = mmse_sic_receivers(net, phi, T, p)
        psi = crosstalk(net, phi, T, R)
        g = direct_gains(net, T, R)
        sig = noise_terms(net, R)
        gam = sinrs(psi, g, p, sig)
        p = _power_control(p, gam, gamma0)
        snap = sinrs(psi, g, p, sig)
        q = dual_powers(psi, g, snap, weight_terms(net, T))
        # reverse half
        T = transmit_update(net, phi, R, q)
        psi = crosstalk(net, phi, T, R)
        g = direct_gains(net, T, R)
        w = weight_terms(net, T)
        gam_r = sinrs(psi, g, q, w, "reverse")
        q = _power_control(q, gam_r, gamma0)
        snap = sinrs(psi, g, q, w, "reverse")
        p = primal_powers(psi, g, snap, sig)
        total = float(w @ p)
        ratio = snap / np.where(gamma0 > 0, gamma0, 1.0)
        ratio = np.where(gamma0 > 0, ratio, 1.0)
        trace.append({"iteration": it, "objective": total, "sum_power": total,
                      "min_sinr_ratio": float(np.min(ratio, initial=1.0)),
                      "max_sinr_ratio": float(np.max(ratio, initial=1.0)),
                      "min_rate": float(np.min(all_rates_from_sinr(snap, M)))})
        if not np.isfinite(total) or total > power_cap:
            raise InfeasibleError(f"sum power {total:.3g} exceeded cap {power_cap:.3g}; "
                                  "targets appear infeasible")
        mismatch = float(np.max(np.abs(ratio - 1.0), initial=0.0))
        if prev is not None and abs(total - prev) <= tol * total and mismatch <= 10 * tol:
            converged = True
            break
        prev = total
    return _finish(net, phi, T, p, M, sum_power(net, strategy_covariances(T, p)), trace,
                   converged, it)


def _power_control(x, gam, gamma0):
    out = np.array(x, dtype=float)
    pos = gamma0 > 0
    out[pos] = x[pos] * gamma0[pos] / gam[pos]
    out[~pos] = 0.0
    return out
