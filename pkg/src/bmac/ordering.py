"""Encoding and decoding orders.

An order assigns every physical transmitter an encoding sequence of its
links (dirty-paper coding: a link encoded later is free of interference
from links encoded earlier) and every physical receiver a decoding
sequence (successive cancellation: a link decoded later is free of the
links decoded earlier).  The coupling matrix follows from the order.
"""

from dataclasses import dataclass
import itertools

import numpy as np

from .netmodel import as_phi
from .politewf import check_structure

__all__ = [
    "OrderSpec",
    "PseudoGroup",
    "default_order",
    "all_orders",
    "order_to_coupling",
    "pseudo_groups",
    "meb_order",
    "solve_with",
    "algorithm_o",
    "exhaustive_orders",
]


@dataclass(frozen=True)
class OrderSpec:
    """Encoding order per transmitter node and decoding order per receiver node.

    Attributes
    ----------
    encode : tuple of (node, tuple of int)
        Links of each transmitter, first encoded first.
    decode : tuple of (node, tuple of int)
        Links of each receiver, first decoded first.
    """

    encode: tuple
    decode: tuple

    @classmethod
    def from_dicts(cls, encode, decode):
        return cls(tuple(sorted((n, tuple(v)) for n, v in encode.items())),
                   tuple(sorted((n, tuple(v)) for n, v in decode.items())))

    @property
    def encode_map(self):
        return dict(self.encode)

    @property
    def decode_map(self):
        return dict(self.decode)

    def describe(self):
        """Compact text form, e.g. ``"enc T0:0>1 | dec R:2>0>1"``."""
        enc = " ".join(f"{n}:{'>'.join(map(str, v))}" for n, v in self.encode if len(v) > 1)
        dec = " ".join(f"{n}:{'>'.join(map(str, v))}" for n, v in self.decode if len(v) > 1)
        return f"enc {enc or '-'} | dec {dec or '-'}"


def default_order(net):
    """Links in index order at every node."""
    return OrderSpec.from_dicts(net.tx_groups(), net.rx_groups())


def all_orders(net):
    """Every combination of per-node permutations."""
    tx = sorted(net.tx_groups().items())
    rx = sorted(net.rx_groups().items())
    tx_perms = [list(itertools.permutations(v)) for _, v in tx]
    rx_perms = [list(itertools.permutations(v)) for _, v in rx]
    for te in itertools.product(*tx_perms):
        for rd in itertools.product(*rx_perms):
            yield OrderSpec(tuple((n, p) for (n, _), p in zip(tx, te)),
                            tuple((n, p) for (n, _), p in zip(rx, rd)))


def _check_order(net, order):
    for groups, seq, what in ((net.tx_groups(), order.encode_map, "encoding"),
                              (net.rx_groups(), order.decode_map, "decoding")):
        for node, links in groups.items():
            got = seq.get(node, links)
            if sorted(got) != sorted(links):
                raise ValueError(f"{what} order at node {node!r} must permute {links}")


def order_to_coupling(net, order):
    """Coupling matrix induced by an order.

    Parameters
    ----------
    net : NetworkSpec
        Only node labels are used.
    order : OrderSpec

    Returns
    -------
    ndarray of int
    """
    _check_order(net, order)
    L = net.L
    phi = np.ones((L, L), dtype=int) - np.eye(L, dtype=int)
    for seqs in (order.encode_map, order.decode_map):
        for seq in seqs.values():
            for a, first in enumerate(seq):
                for later in seq[a + 1:]:
                    phi[later, first] = 0
    return phi


@dataclass(frozen=True)
class PseudoGroup:
    """Co-located links whose interference pattern towards the rest is uniform."""

    node: object
    links: tuple
    kind: str  # "BC" or "MAC"


def _is_pseudo(phi, S, kind):
    others = [r for r in range(phi.shape[0]) if r not in S]
    if not others:
        return True
    if kind == "BC":
        block = phi[np.ix_(others, list(S))]
        return bool(np.all(block == block[:, :1]))
    block = phi[np.ix_(list(S), others)]
    return bool(np.all(block == block[:1, :]))


def pseudo_groups(phi, net):
    """Maximal pseudo BC and pseudo MAC groups.

    At each node the largest qualifying subsets of co-located links are
    selected greedily, without overlap.

    Returns
    -------
    list of PseudoGroup
    """
    phi = as_phi(phi, net.L)
    out = []
    for groups, kind in ((net.tx_groups(), "BC"), (net.rx_groups(), "MAC")):
        for node in sorted(groups, key=str):
            links = groups[node]
            used = set()
            for size in range(len(links), 1, -1):
                for S in itertools.combinations(links, size):
                    if used.intersection(S):
                        continue
                    if _is_pseudo(phi, S, kind):
                        out.append(PseudoGroup(node, tuple(S), kind))
                        used.update(S)
    return out


def meb_order(net):
    """Order ranked by the dominant singular value of each direct channel.

    At a transmitter the link with the ``n``-th smallest value is encoded
    ``n``-th; at a receiver the link with the ``n``-th largest value is
    decoded ``n``-th.  Ties go to the lower link index.
    """
    smax = [float(np.linalg.svd(net.channels[l][l], compute_uv=False)[0]) for l in range(net.L)]
    enc = {n: tuple(sorted(v, key=lambda l: (smax[l], l))) for n, v in net.tx_groups().items()}
    dec = {n: tuple(sorted(v, key=lambda l: (-smax[l], l))) for n, v in net.rx_groups().items()}
    return OrderSpec.from_dicts(enc, dec)


def solve_with(solver, net, phi, targets, P_T=None, **kw):
    """Dispatch to a solver by name ('A', 'B', 'PR', 'PR1')."""
    from .pwf_solvers import algorithm_pr, algorithm_pr1
    from .sinr_algs import algorithm_a, algorithm_b

    if solver == "A":
        if P_T is None:
            raise ValueError("solver A needs P_T")
        return algorithm_a(net, phi, targets, P_T, **kw)
    if solver == "B":
        return algorithm_b(net, phi, targets, **kw)
    if solver == "PR":
        return algorithm_pr(net, phi, targets, **kw)
    if solver == "PR1":
        return algorithm_pr1(net, phi, targets, **kw)
    raise ValueError(f"unknown solver {solver!r}")


def _better(solver, a, b):
    """True when objective ``a`` beats ``b``."""
    if b is None:
        return True
    return a > b if solver == "A" else a < b


def _reorder(order, group, nu):
    key_desc = lambda l: (-nu[l], l)  # noqa: E731
    key_asc = lambda l: (nu[l], l)  # noqa: E731
    if group.kind == "BC":
        seqs, key = dict(order.encode), key_desc
    else:
        seqs, key = dict(order.decode), key_asc
    seq = list(seqs[group.node])
    slots = [i for i, l in enumerate(seq) if l in group.links]
    for i, l in zip(slots, sorted(group.links, key=key)):
        seq[i] = l
    seqs[group.node] = tuple(seq)
    if group.kind == "BC":
        return OrderSpec(tuple(sorted(seqs.items(), key=lambda kv: str(kv[0]))), order.decode)
    return OrderSpec(order.encode, tuple(sorted(seqs.items(), key=lambda kv: str(kv[0]))))


def algorithm_o(net, targets, solver="PR1", P_T=None, order=None, frozen=(), max_rounds=50,
                window=10, **solver_kw):
    """Improve the order by sorting pseudo groups on their water levels.

    Each round solves the problem for the current order, reads the polite
    water-filling levels, encodes the links of every pseudo BC in
    descending level order and decodes the links of every pseudo MAC in
    ascending level order.

    Parameters
    ----------
    net : NetworkSpec
    targets : array_like
        Rate targets in nats.
    solver : {'A', 'B', 'PR', 'PR1'}
    P_T : float, optional
        Budget for solver ``A``.
    order : OrderSpec, optional
        Starting order (default: index order).
    frozen : iterable of node labels
        Nodes whose order must not change.
    max_rounds : int
    window : int
        Number of recent orders remembered for cycle detection.

    Returns
    -------
    order : OrderSpec
        Best order visited.
    result : SolverResult
        Solution for that order; ``info['visited']`` lists the sequence of
        (order, objective) pairs.
    """
    order = default_order(net) if order is None else order
    frozen = set(frozen)
    best = best_obj = best_order = None
    history, visited = [], []
    for _ in range(max_rounds):
        phi = order_to_coupling(net, order)
        res = solve_with(solver, net, phi, targets, P_T, **solver_kw)
        obj = res.objective
        visited.append((order, obj))
        if _better(solver, obj, best_obj):
            best, best_obj, best_order = res, obj, order
        history.append(order)
        nu = check_structure(net, phi, res.covs_f, res.covs_r).nu
        new = order
        for g in pseudo_groups(phi, net):
            if g.node in frozen:
                continue
            new = _reorder(new, g, nu)
        if new == order or new in history[-window:]:
            break
        order = new
    best.info["visited"] = visited
    return best_order, best


def exhaustive_orders(net, targets, solver="PR1", P_T=None, **solver_kw):
    """Solve for every order; list of ``(order, objective, result)``."""
    out = []
    for order in all_orders(net):
        phi = order_to_coupling(net, order)
        res = solve_with(solver, net, phi, targets, P_T, **solver_kw)
        out.append((order, res.objective, res))
    return out
