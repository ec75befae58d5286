"""Sum-power minimisation by imposing polite water-filling directly.

``algorithm_pr1`` alternates forward and reverse rate-constrained
water-filling over the equivalent channels of all links and applies to any
coupling.  ``algorithm_pr`` exploits an acyclic interference graph: each
link in turn is water-filled in the reverse direction of its sub-network
and mapped back, which never lowers any other link's rate.
"""

import numpy as np

from ._linalg import logdet_pd
from .errors import InfeasibleError, PreconditionError
from .itree import build_subnetwork, itree_order, permute, sequential_forward, unpermute_covs
from .netmodel import FORWARD, REVERSE, as_phi, interference_covariance, link_rates, sum_power
from .politewf import equivalent_channel_from, polite_waterfill
from .sinr_algs import SolverResult, algorithm_a
from .streams import covariance_transformation

__all__ = ["algorithm_pr", "algorithm_pr1", "feasibility_preflight", "default_power_cap"]


def default_power_cap(net):
    """Divergence guard: ``1e6`` times the total noise power."""
    return 1e6 * float(sum(np.real(np.trace(w)) for w in net.noise_cov))


def feasibility_preflight(net, phi, targets, power):
    """Raise :class:`InfeasibleError` if the targets need more than ``power``."""
    res = algorithm_a(net, phi, targets, power, tol=1e-6, max_iter=500)
    if res.objective < 1.0:
        raise InfeasibleError(f"targets not reachable with power {power:g} (alpha={res.objective:.4g})")
    return res.objective


def _relative_rate_error(rates, targets):
    targets = np.asarray(targets, dtype=float)
    err = np.abs(rates - targets) / np.where(targets > 0, targets, 1.0)
    return float(np.max(err, initial=0.0))


def algorithm_pr1(net, phi, targets, init=None, tol=1e-8, max_iter=500, power_cap=None,
                  init_forward=None, keep_iterates=False, preflight_power=None):
    """Alternating forward/reverse polite water-filling for any coupling.

    Parameters
    ----------
    net, phi
    targets : array_like
        Rate targets in nats.
    init : list of ndarray, optional
        Initial reverse covariances.  Default: ``I / L_R`` per link.
    tol : float
        Stop when the relative rate error and relative power change are
        both below ``tol``.
    max_iter : int
    power_cap : float, optional
        Divergence guard (default :func:`default_power_cap`).
    init_forward : list of ndarray, optional
        Forward covariances used in place of the first forward half.
    keep_iterates : bool
        Store the covariances after every half in ``info['iterates']``.
    preflight_power : float, optional
        Check feasibility at this power before iterating.

    Returns
    -------
    SolverResult
        ``trace`` has one record per full iteration, evaluated after the
        forward half.
    """
    phi = as_phi(phi, net.L)
    targets = np.asarray(targets, dtype=float)
    if preflight_power is not None:
        feasibility_preflight(net, phi, targets, preflight_power)
    cap = default_power_cap(net) if power_cap is None else power_cap
    L = net.L
    if init is None:
        covs_r = [np.eye(n, dtype=complex) / n for n in net.rx_antennas]
    else:
        covs_r = [np.asarray(c, dtype=complex) for c in init]
    omegas = [np.array(w, dtype=complex) for w in net.noise_cov]
    covs_f = None
    trace, iterates = [], []
    prev, flips, last_sign = None, 0, 0
    converged = oscillating = False
    nu_f = np.zeros(L)
    it = 0
    for it in range(1, max_iter + 1):
        # forward half
        omegas_r = [interference_covariance(net, phi, covs_r, l, REVERSE) for l in range(L)]
        if it == 1 and init_forward is not None:
            covs_f = [np.asarray(c, dtype=complex) for c in init_forward]
        else:
            covs_f = []
            for l in range(L):
                eq = equivalent_channel_from(net.channels[l][l], omegas[l], omegas_r[l])
                cov, nu_f[l], _ = polite_waterfill(eq, rate=targets[l], side="forward")
                covs_f.append(cov)
        if keep_iterates:
            iterates.append(("forward", [c.copy() for c in covs_f]))
        # reverse half
        omegas = [interference_covariance(net, phi, covs_f, l, FORWARD) for l in range(L)]
        covs_r = []
        for l in range(L):
            eq = equivalent_channel_from(net.channels[l][l], omegas[l], omegas_r[l])
            cov, _, _ = polite_waterfill(eq, rate=targets[l], side="reverse")
            covs_r.append(cov)
        if keep_iterates:
            iterates.append(("reverse", [c.copy() for c in covs_r]))
        total = sum_power(net, covs_f)
        rates = np.array([_rate_with(net, covs_f, l, omegas[l]) for l in range(L)])
        rate_err = _relative_rate_error(rates, targets)
        trace.append({"iteration": it, "objective": total, "sum_power": total,
                      "rate_error": rate_err, "min_rate": float(np.min(rates))})
        if not np.isfinite(total) or total > cap:
            raise InfeasibleError(f"sum power {total:.3g} exceeded cap {cap:.3g}")
        if prev is not None:
            change = total - prev
            sign = int(np.sign(change))
            if sign != 0 and last_sign != 0 and sign != last_sign:
                flips += 1
            elif sign != 0:
                flips = 0
            last_sign = sign if sign != 0 else last_sign
            if rate_err <= tol and abs(change) <= tol * total:
                converged = True
                break
            if flips > 100:
                oscillating = True
                break
        prev = total
    covs_r_t, strat = covariance_transformation(net, phi, covs_f)
    res = SolverResult(covs_f, covs_r_t, strat, link_rates(net, phi, covs_f),
                       sum_power(net, covs_f), sum_power(net, covs_f), trace, converged, it)
    res.info.update(oscillating=oscillating, pr1_reverse=covs_r, nu=nu_f.copy())
    if keep_iterates:
        res.info["iterates"] = iterates
    return res


def _rate_with(net, covs, l, omega):
    H = net.channels[l][l]
    return max(logdet_pd(omega + H @ covs[l] @ H.conj().T) - logdet_pd(omega), 0.0)


def algorithm_pr(net, phi, targets, init=None, tol=1e-8, max_iter=500, power_cap=None,
                 preflight_power=None):
    """Link-by-link reverse water-filling for acyclic interference graphs.

    Parameters
    ----------
    net, phi
        The interference graph must be acyclic; links are relabeled
        internally.
    targets : array_like
        Rate targets in nats.
    init : list of ndarray, optional
        Initial forward covariances.  Default: ``I / L_T`` per link.
    tol, max_iter, power_cap, preflight_power
        As in :func:`algorithm_pr1`.

    Returns
    -------
    SolverResult
        ``trace`` has one record per sweep over all links.
    """
    phi = as_phi(phi, net.L)
    order = itree_order(phi, net)
    if order is None:
        raise PreconditionError("algorithm_pr needs an acyclic interference graph")
    targets = np.asarray(targets, dtype=float)
    if preflight_power is not None:
        feasibility_preflight(net, phi, targets, preflight_power)
    cap = default_power_cap(net) if power_cap is None else power_cap
    pnet, pphi = permute(net, phi, order)
    tg = targets[order]
    L = net.L
    if init is None:
        covs = [np.eye(n, dtype=complex) / n for n in pnet.tx_antennas]
    else:
        covs = [np.asarray(init[o], dtype=complex) for o in order]
    trace = []
    prev = None
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        for i in range(L):
            sub = build_subnetwork(pnet, pphi, covs, i)
            rev, _ = covariance_transformation(sub.net, sub.phi, covs[:i + 1])
            omega = sub.net.noise_cov[i]
            omega_r = interference_covariance(sub.net, sub.phi, rev, i, REVERSE)
            eq = equivalent_channel_from(pnet.channels[i][i], omega, omega_r)
            new_r, _, _ = polite_waterfill(eq, rate=tg[i], side="reverse")
            covs = sequential_forward(pnet, pphi, list(rev[:i]) + [new_r], i, covs)
        total = sum_power(pnet, covs)
        rates = link_rates(pnet, pphi, covs)
        rate_err = _relative_rate_error(rates, tg)
        trace.append({"iteration": it, "objective": total, "sum_power": total,
                      "rate_error": rate_err, "min_rate": float(np.min(rates))})
        if not np.isfinite(total) or total > cap:
            raise InfeasibleError(f"sum power {total:.3g} exceeded cap {cap:.3g}")
        if prev is not None and rate_err <= tol and abs(total - prev) <= tol * total:
            converged = True
            break
        prev = total
    covs_f = unpermute_covs(covs, order)
    covs_r, strat = covariance_transformation(net, phi, covs_f)
    res = SolverResult(covs_f, covs_r, strat, link_rates(net, phi, covs_f),
                       sum_power(net, covs_f), sum_power(net, covs_f), trace, converged, it)
    res.info["order"] = list(order)
    return res
