"""Networks with acyclic interference graphs and their improvement step.

When the links can be indexed so that no link is interfered by a link
with a smaller index, the first ``i + 1`` links form a sub-network whose
interference from the remaining links acts as colored noise.  This allows
the rate of one link to be raised by single-user water-filling in the
reverse direction without hurting the others.
"""

from dataclasses import dataclass, replace

import numpy as np

from ._linalg import herm, thin_eig
from .errors import PreconditionError
from .netmodel import (FORWARD, REVERSE, _toposort, as_phi, effective_coupling,
                       interference_covariance, link_rates, sum_power)
from .politewf import check_structure, equivalent_channel_from, polite_waterfill
from .streams import _mmse_vectors, covariance_transformation

__all__ = [
    "InterferenceGraph",
    "SubNetwork",
    "interference_graph",
    "itree_order",
    "is_itree_indexed",
    "permute",
    "unpermute_covs",
    "build_subnetwork",
    "sequential_forward",
    "algorithm_s",
    "algorithm_i",
]


@dataclass(frozen=True)
class InterferenceGraph:
    """Directed graph with an edge ``i -> j`` when link ``i`` interferes with ``j``."""

    L: int
    edges: tuple

    def successors(self, i):
        return tuple(j for a, j in self.edges if a == i)


def interference_graph(phi, net=None):
    """Interference graph of a coupling matrix.

    With ``net`` given, couplings through all-zero channels are dropped.
    """
    phi = effective_coupling(net, phi) if net is not None else as_phi(phi)
    L = phi.shape[0]
    return InterferenceGraph(L, tuple((i, j) for j in range(L) for i in range(L) if phi[j, i]))


def itree_order(phi, net=None):
    """Indexing under which no link is interfered by an earlier one.

    Parameters
    ----------
    phi : array_like
    net : NetworkSpec, optional
        Used to ignore couplings through zero channels.

    Returns
    -------
    list of int or None
        ``order[pos]`` is the original link placed at position ``pos``;
        ``None`` when the interference graph has a directed cycle.
    """
    g = interference_graph(phi, net)
    # a victim must precede every link that interferes with it
    return _toposort(list(range(g.L)), [(j, i) for i, j in g.edges])


def is_itree_indexed(phi, net=None):
    """True when the identity indexing already satisfies the iTree property."""
    phi = effective_coupling(net, phi) if net is not None else as_phi(phi)
    return not np.any(np.tril(phi, -1))


def permute(net, phi, order):
    """Relabel links so that new link ``i`` is old link ``order[i]``."""
    order = list(order)
    phi = as_phi(phi, net.L)
    chans = tuple(tuple(net.channels[a][b] for b in order) for a in order)
    pick = lambda seq: tuple(seq[a] for a in order)  # noqa: E731
    new = replace(net, channels=chans, tx_node=pick(net.tx_node), rx_node=pick(net.rx_node),
                  noise_cov=pick(net.noise_cov), linear_weight=pick(net.linear_weight))
    return new, phi[np.ix_(order, order)]


def unpermute_covs(covs, order):
    """Inverse of the relabeling in :func:`permute` for a covariance list."""
    out = [None] * len(order)
    for new, old in enumerate(order):
        out[old] = covs[new]
    return out


@dataclass(frozen=True, eq=False)
class SubNetwork:
    """First ``i + 1`` links of an iTree network with the rest as noise.

    Attributes
    ----------
    net : NetworkSpec
        Restricted network whose noise covariances include the
        interference from the links after ``i``.
    phi : ndarray
    power : float
        ``sum_{l<=i} Tr(Σ_l Ŵ_l)``.
    """

    net: object
    phi: np.ndarray
    power: float


def build_subnetwork(net, phi, covs, i):
    """Sub-network formed by links ``0..i`` (inclusive).

    Parameters
    ----------
    net, phi
    covs : sequence of ndarray
        Forward covariances of all links.
    i : int
        Index of the last link kept.

    Returns
    -------
    SubNetwork
    """
    phi = as_phi(phi, net.L)
    keep = list(range(i + 1))
    W = []
    for l in keep:
        w = np.array(net.noise_cov[l], dtype=complex)
        for j in range(i + 1, net.L):
            if phi[l, j]:
                H = net.channels[l][j]
                w += H @ covs[j] @ H.conj().T
        W.append(herm(w))
    chans = tuple(tuple(net.channels[a][b] for b in keep) for a in keep)
    sub = replace(net, channels=chans, tx_node=net.tx_node[:i + 1], rx_node=net.rx_node[:i + 1],
                  noise_cov=tuple(W), linear_weight=net.linear_weight[:i + 1])
    power = float(sum(np.real(np.trace(covs[l] @ net.linear_weight[l])) for l in keep))
    return SubNetwork(sub, phi[np.ix_(keep, keep)], power)


def sequential_forward(net, phi, covs_r, i, covs_tail):
    """Forward covariances of links ``0..i`` reproducing reverse SINRs.

    Reverse covariances are split into streams; reverse MMSE-SIC filters
    give the forward transmit vectors.  Forward powers are then computed
    one stream at a time, from link ``i`` down to link 0 and from the last
    stream of each link to the first, each stream's interference being
    fully known when its turn comes.

    Parameters
    ----------
    net, phi
    covs_r : sequence of ndarray
        Reverse covariances of links ``0..i``.
    i : int
    covs_tail : sequence of ndarray
        Forward covariances of all links; only entries after ``i`` are used.

    Returns
    -------
    list of ndarray
        Forward covariances of all links (entries after ``i`` copied from
        ``covs_tail``).
    """
    phi = as_phi(phi, net.L)
    Rs, qs, Ts, gh = [], [], [], []
    full_r = list(covs_r[:i + 1]) + [np.zeros((net.rx_antennas[l],) * 2, complex)
                                     for l in range(i + 1, net.L)]
    for l in range(i + 1):
        U, q = thin_eig(covs_r[l])
        Rs.append(U)
        qs.append(q)
    for l in range(i + 1):
        omega_r = interference_covariance(net, phi, full_r, l, REVERSE)
        Hh = net.channels[l][l].conj().T
        T = _mmse_vectors(Hh, Rs[l], qs[l], omega_r, "before")
        Ts.append(T)
        # reverse SINRs with these filters
        HR = Hh @ Rs[l]
        g = np.zeros(len(qs[l]))
        for m in range(len(qs[l])):
            num = qs[l][m] * abs(np.vdot(T[:, m], HR[:, m])) ** 2
            den = float(np.real(np.vdot(T[:, m], omega_r @ T[:, m])))
            den += sum(qs[l][n] * abs(np.vdot(T[:, m], HR[:, n])) ** 2 for n in range(m))
            g[m] = num / den
        gh.append(g)
    out = [None] * net.L
    for j in range(i + 1, net.L):
        out[j] = covs_tail[j]
    for l in range(i, -1, -1):
        omega = np.array(net.noise_cov[l], dtype=complex)
        for k in range(l + 1, net.L):
            if phi[l, k]:
                H = net.channels[l][k]
                omega += H @ out[k] @ H.conj().T
        H = net.channels[l][l]
        R, T = Rs[l], Ts[l]
        G = np.abs(R.conj().T @ H @ T) ** 2
        M = len(qs[l])
        p = np.zeros(M)
        for m in range(M - 1, -1, -1):
            r = R[:, m]
            interf = float(np.real(np.vdot(r, omega @ r))) + float(G[m, m + 1:] @ p[m + 1:])
            p[m] = gh[l][m] * interf / G[m, m]
        out[l] = herm((T * p) @ T.conj().T)
    return out


def _require_itree_indexed(net, phi):
    if not is_itree_indexed(phi, net):
        raise PreconditionError("links are not indexed in an iTree order")


def algorithm_s(net, phi, covs, i):
    """Raise the rate of link ``i`` without lowering any other rate.

    The reverse input of link ``i`` is replaced by the water-filling
    solution over its equivalent channel under the reverse power it
    already uses; the sub-network is then mapped back to the forward
    direction.

    Parameters
    ----------
    net, phi
        Links must be indexed in iTree order.
    covs : sequence of ndarray
        Forward covariances.
    i : int
        Link to improve (0-based).

    Returns
    -------
    list of ndarray
    """
    phi = as_phi(phi, net.L)
    _require_itree_indexed(net, phi)
    covs_r, _ = covariance_transformation(net, phi, covs)
    omega = interference_covariance(net, phi, covs, i, FORWARD)
    omega_r = interference_covariance(net, phi, covs_r, i, REVERSE)
    eq = equivalent_channel_from(net.channels[i][i], omega, omega_r)
    budget = float(np.real(np.trace(covs_r[i] @ omega)))
    new_r, _, _ = polite_waterfill(eq, power=budget, side="reverse")
    rev = list(covs_r[:i]) + [new_r]
    return sequential_forward(net, phi, rev, i, covs)


def algorithm_i(net, phi, targets, mode="B", P_T=None, init="random", tol=1e-8,
                max_iter=2000, max_sweeps=50, seed=0):
    """Base solver followed by structure-restoring improvement steps.

    Parameters
    ----------
    net, phi
        Any coupling whose interference graph is acyclic.
    targets : array_like
        Rate targets in nats.
    mode : {'A', 'B'}
    P_T : float, optional
        Power budget (mode ``A`` only).
    init
        Initial point of the first base-solver run.
    tol, max_iter, seed
        Forwarded to the base solver.
    max_sweeps : int
        Cap on improvement rounds.

    Returns
    -------
    SolverResult
        ``info['s_steps']`` counts improvement steps; ``info['rounds']``
        records the objective after each base-solver run.
    """
    from .sinr_algs import algorithm_a, algorithm_b

    phi = as_phi(phi, net.L)
    order = itree_order(phi, net)
    if order is None:
        raise PreconditionError("interference graph has a directed cycle")
    pnet, pphi = permute(net, phi, order)
    tg = np.asarray(targets, dtype=float)[order]

    def base(start):
        if mode == "A":
            return algorithm_a(pnet, pphi, tg, P_T, init=start, tol=tol, max_iter=max_iter,
                               seed=seed)
        if mode == "B":
            return algorithm_b(pnet, pphi, tg, init=start, tol=tol, max_iter=max_iter, seed=seed)
        raise ValueError("mode must be 'A' or 'B'")

    res = base(init)
    rounds = [res.objective]
    steps = 0
    done = False
    for _ in range(max_sweeps):
        rep = check_structure(pnet, pphi, res.covs_f, res.covs_r)
        bad = [l for l in range(pnet.L) if not rep.satisfied[l] and tg[l] > 0]
        if not bad:
            done = True
            break
        covs = res.covs_f
        for l in bad:
            covs = algorithm_s(pnet, pphi, covs, l)
            steps += 1
        res = base(covs)
        rounds.append(res.objective)
    covs_f = unpermute_covs(res.covs_f, order)
    covs_r = unpermute_covs(res.covs_r, order)
    out = replace(res, covs_f=covs_f, covs_r=covs_r, rates=link_rates(net, phi, covs_f),
                  sum_power=sum_power(net, covs_f))
    out.info = dict(res.info, s_steps=steps, rounds=rounds, order=list(order),
                    structure_ok=done)
    out.converged = bool(res.converged and done)
    return out
