"""Network description, coupling matrices and link-level rate quantities.

A network carries ``L`` data links.  ``channels[l][k]`` is the channel from
the transmitter of link ``k`` to the receiver of link ``l``.  Links are
virtual: several may share one physical transmitter (a broadcast group)
or one physical receiver (a multiaccess group), which is recorded by the
``tx_node`` and ``rx_node`` labels.

All rates are in nats.
"""

from dataclasses import dataclass, field, replace
import heapq
import itertools

import numpy as np

from ._linalg import clip_psd, crandn, herm, logdet_pd
from .errors import DimensionError, DomainError

__all__ = [
    "NetworkSpec",
    "CouplingVerdict",
    "as_phi",
    "build_network",
    "generate_network",
    "interference_covariance",
    "interference_covariances",
    "link_rate",
    "link_rates",
    "reverse_network",
    "validate_coupling",
    "effective_coupling",
    "sum_power",
    "check_covariances",
]

FORWARD = "forward"
REVERSE = "reverse"


def _check_direction(direction):
    if direction not in (FORWARD, REVERSE):
        raise ValueError(f"direction must be 'forward' or 'reverse', got {direction!r}")


@dataclass(frozen=True, eq=False)
class NetworkSpec:
    """Immutable description of a B-MAC network.

    Parameters
    ----------
    channels : tuple of tuple of ndarray
        ``channels[l][k]`` has shape ``(rx_antennas[l], tx_antennas[k])``.
    tx_node, rx_node : tuple
        Physical node label of each link's transmitter and receiver.
    noise_cov : tuple of ndarray
        Receiver noise covariance ``W_l`` per link.
    linear_weight : tuple of ndarray
        Weight ``Ŵ_l`` of the single linear power constraint
        ``sum_l Tr(Σ_l Ŵ_l) <= P_T``.
    node_power_cap : dict
        Optional per-node power caps, used by the distributed solver only.
    """

    channels: tuple
    tx_node: tuple
    rx_node: tuple
    noise_cov: tuple
    linear_weight: tuple
    node_power_cap: dict = field(default_factory=dict)

    @property
    def L(self):
        return len(self.channels)

    @property
    def tx_antennas(self):
        return tuple(self.channels[0][k].shape[1] for k in range(self.L))

    @property
    def rx_antennas(self):
        return tuple(self.channels[l][0].shape[0] for l in range(self.L))

    def H(self, l, k):
        """Channel from transmitter ``k`` to receiver ``l``."""
        return self.channels[l][k]

    def direct(self, l):
        """Direct channel ``H_{l,l}``."""
        return self.channels[l][l]

    def tx_groups(self):
        """Map each physical transmitter to the tuple of links it serves."""
        return _groups(self.tx_node)

    def rx_groups(self):
        """Map each physical receiver to the tuple of links it serves."""
        return _groups(self.rx_node)

    def with_noise(self, noise_cov):
        """Copy of the network with replaced noise covariances."""
        return replace(self, noise_cov=tuple(herm(np.asarray(w, complex)) for w in noise_cov))


def _groups(labels):
    out = {}
    for l, n in enumerate(labels):
        out.setdefault(n, []).append(l)
    return {n: tuple(v) for n, v in out.items()}


def as_phi(phi, L=None):
    """Validate and normalise a coupling matrix.

    Parameters
    ----------
    phi : array_like
        Square 0/1 matrix with zero diagonal.
    L : int, optional
        Expected size.

    Returns
    -------
    ndarray of int
    """
    a = np.asarray(phi)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"coupling matrix must be square, got shape {a.shape}")
    if L is not None and a.shape[0] != L:
        raise DimensionError(f"coupling matrix has size {a.shape[0]}, network has {L} links")
    if not np.all((a == 0) | (a == 1)):
        raise DomainError("coupling matrix entries must be 0 or 1")
    if np.any(np.diag(a) != 0):
        raise DomainError("coupling matrix diagonal must be zero")
    return a.astype(int)


def build_network(channels, tx_node=None, rx_node=None, noise_cov=None,
                  linear_weight=None, node_power_cap=None):
    """Construct and validate a :class:`NetworkSpec`.

    Parameters
    ----------
    channels : sequence of sequence of array_like
        ``channels[l][k]`` is ``H_{l,k}``.  Scalars are promoted to 1x1.
    tx_node, rx_node : sequence, optional
        Physical node labels.  Default: every link has its own nodes.
    noise_cov, linear_weight : sequence of array_like, optional
        Identity matrices by default.
    node_power_cap : dict, optional

    Returns
    -------
    NetworkSpec
    """
    L = len(channels)
    if L == 0:
        raise DimensionError("network needs at least one link")
    H = []
    for l in range(L):
        if len(channels[l]) != L:
            raise DimensionError(f"row {l} of channels has {len(channels[l])} entries, expected {L}")
        H.append(tuple(np.atleast_2d(np.asarray(channels[l][k], dtype=complex)) for k in range(L)))
    rx = [H[l][0].shape[0] for l in range(L)]
    tx = [H[0][k].shape[1] for k in range(L)]
    for l in range(L):
        for k in range(L):
            if H[l][k].shape != (rx[l], tx[k]):
                raise DimensionError(
                    f"channel ({l},{k}) has shape {H[l][k].shape}, expected {(rx[l], tx[k])}")
    tx_node = tuple(tx_node) if tx_node is not None else tuple(f"T{l}" for l in range(L))
    rx_node = tuple(rx_node) if rx_node is not None else tuple(f"R{l}" for l in range(L))
    if len(tx_node) != L or len(rx_node) != L:
        raise DimensionError("node label lists must have one entry per link")
    for groups, dims, what in ((_groups(tx_node), tx, "transmit"), (_groups(rx_node), rx, "receive")):
        for node, links in groups.items():
            if len({dims[l] for l in links}) != 1:
                raise DimensionError(f"links sharing node {node!r} disagree on {what} antenna count")
    noise = _pd_list(noise_cov, rx, "noise covariance")
    weight = _pd_list(linear_weight, tx, "linear weight")
    caps = dict(node_power_cap or {})
    return NetworkSpec(tuple(H), tx_node, rx_node, noise, weight, caps)


def _pd_list(mats, dims, name):
    if mats is None:
        return tuple(np.eye(n, dtype=complex) for n in dims)
    if len(mats) != len(dims):
        raise DimensionError(f"{name} list has wrong length")
    out = []
    for l, (m, n) in enumerate(zip(mats, dims)):
        m = herm(np.atleast_2d(np.asarray(m, dtype=complex)))
        if m.shape != (n, n):
            raise DimensionError(f"{name} {l} has shape {m.shape}, expected {(n, n)}")
        if np.linalg.eigvalsh(m)[0] <= 0:
            raise DomainError(f"{name} {l} is not positive definite")
        out.append(m)
    return tuple(out)


def generate_network(tx_antennas, rx_antennas, gains_db, seed, tx_node=None, rx_node=None):
    """Draw a Rayleigh-fading network.

    One i.i.d. CN(0,1) matrix is drawn for every pair of physical nodes,
    so that co-located virtual links see physically consistent channels.
    ``H_{l,k}`` is that matrix scaled by ``sqrt(g_{l,k})``.

    Parameters
    ----------
    tx_antennas, rx_antennas : sequence of int
    gains_db : array_like, shape (L, L)
        Power gain of ``H_{l,k}`` in dB.  ``-inf`` produces an all-zero
        channel.
    seed : int
        Seed for :func:`numpy.random.default_rng`.
    tx_node, rx_node : sequence, optional
        Physical node labels.

    Returns
    -------
    NetworkSpec
    """
    L = len(tx_antennas)
    g = np.asarray(gains_db, dtype=float)
    if g.shape != (L, L):
        raise DimensionError(f"gains_db must be {L}x{L}")
    if np.any(np.isnan(g)) or np.any(g == np.inf):
        raise DomainError("gains must be finite dB values or -inf")
    tx_node = tuple(tx_node) if tx_node is not None else tuple(f"T{l}" for l in range(L))
    rx_node = tuple(rx_node) if rx_node is not None else tuple(f"R{l}" for l in range(L))
    rng = np.random.default_rng(seed)
    base = {}
    chans = [[None] * L for _ in range(L)]
    for l in range(L):
        for k in range(L):
            key = (rx_node[l], tx_node[k])
            if key not in base:
                base[key] = crandn(rng, (rx_antennas[l], tx_antennas[k]))
            chans[l][k] = np.sqrt(10.0 ** (g[l, k] / 10.0)) * base[key]
    return build_network(chans, tx_node, rx_node)


def check_covariances(net, covs, direction=FORWARD):
    """Validate shapes and positive semidefiniteness of a covariance set."""
    _check_direction(direction)
    dims = net.tx_antennas if direction == FORWARD else net.rx_antennas
    if len(covs) != net.L:
        raise DimensionError(f"expected {net.L} covariance matrices, got {len(covs)}")
    out = []
    for l, s in enumerate(covs):
        s = np.atleast_2d(np.asarray(s, dtype=complex))
        if s.shape != (dims[l], dims[l]):
            raise DimensionError(f"covariance {l} has shape {s.shape}, expected {(dims[l],) * 2}")
        out.append(clip_psd(s, f"covariance {l}"))
    return out


def _check_shapes(net, covs, direction):
    dims = net.tx_antennas if direction == FORWARD else net.rx_antennas
    if len(covs) != net.L:
        raise DimensionError(f"expected {net.L} covariance matrices, got {len(covs)}")
    for l, s in enumerate(covs):
        if np.shape(s) != (dims[l], dims[l]):
            raise DimensionError(f"covariance {l} has shape {np.shape(s)}, expected {(dims[l],) * 2}")


def interference_covariance(net, phi, covs, l, direction=FORWARD):
    """Interference-plus-noise covariance seen by link ``l``.

    Forward: ``W_l + sum_k phi[l,k] H_{l,k} Σ_k H_{l,k}^H``.
    Reverse: ``Ŵ_l + sum_k phi[k,l] H_{k,l}^H Σ̂_k H_{k,l}``.

    Parameters
    ----------
    net : NetworkSpec
    phi : array_like
    covs : sequence of ndarray
        Forward covariances for ``direction='forward'``, reverse ones
        otherwise.
    l : int
    direction : {'forward', 'reverse'}

    Returns
    -------
    ndarray
    """
    _check_direction(direction)
    phi = np.asarray(phi)
    _check_shapes(net, covs, direction)
    if direction == FORWARD:
        omega = np.array(net.noise_cov[l], dtype=complex)
        for k in range(net.L):
            if k != l and phi[l, k]:
                Hk = net.channels[l][k]
                omega += Hk @ covs[k] @ Hk.conj().T
    else:
        omega = np.array(net.linear_weight[l], dtype=complex)
        for k in range(net.L):
            if k != l and phi[k, l]:
                Hk = net.channels[k][l]
                omega += Hk.conj().T @ covs[k] @ Hk
    return herm(omega)


def interference_covariances(net, phi, covs, direction=FORWARD):
    """List of :func:`interference_covariance` for every link."""
    return [interference_covariance(net, phi, covs, l, direction) for l in range(net.L)]


def _rate(H, S, omega, direction):
    if direction == FORWARD:
        A = H @ S @ H.conj().T
    else:
        A = H.conj().T @ S @ H
    return max(logdet_pd(omega + A) - logdet_pd(omega), 0.0)


def link_rate(net, phi, covs, l, direction=FORWARD, omega=None):
    """Achievable rate of link ``l`` in nats.

    Parameters
    ----------
    net, phi, covs, l, direction
        As in :func:`interference_covariance`.
    omega : ndarray, optional
        Precomputed interference-plus-noise covariance.

    Returns
    -------
    float
    """
    _check_direction(direction)
    S = clip_psd(covs[l], f"covariance {l}")
    if omega is None:
        omega = interference_covariance(net, phi, covs, l, direction)
    return _rate(net.channels[l][l], S, omega, direction)


def link_rates(net, phi, covs, direction=FORWARD):
    """Rates of all links as an array (nats)."""
    return np.array([link_rate(net, phi, covs, l, direction) for l in range(net.L)])


def sum_power(net, covs, direction=FORWARD):
    """Weighted sum power ``sum Tr(Σ_l Ŵ_l)`` (forward) or ``sum Tr(Σ̂_l W_l)``."""
    _check_direction(direction)
    weights = net.linear_weight if direction == FORWARD else net.noise_cov
    return float(sum(np.real(np.trace(s @ w)) for s, w in zip(covs, weights)))


def reverse_network(net, phi):
    """Dual network: conjugate-transposed channels and transposed coupling.

    Noise covariances and constraint weights exchange roles, and
    transmitters become receivers.

    Returns
    -------
    (NetworkSpec, ndarray)
    """
    phi = as_phi(phi, net.L)
    L = net.L
    chans = tuple(tuple(net.channels[k][l].conj().T for k in range(L)) for l in range(L))
    rnet = NetworkSpec(chans, net.rx_node, net.tx_node, net.linear_weight, net.noise_cov,
                       dict(net.node_power_cap))
    return rnet, phi.T.copy()


def effective_coupling(net, phi):
    """Coupling matrix with entries cleared where the channel is exactly zero."""
    phi = as_phi(phi, net.L).copy()
    for l in range(net.L):
        for k in range(net.L):
            if phi[l, k] and not np.any(net.channels[l][k]):
                phi[l, k] = 0
    return phi


@dataclass(frozen=True)
class CouplingVerdict:
    """Outcome of :func:`validate_coupling`.

    Attributes
    ----------
    valid : bool
    encode_orders : dict
        Physical transmitter -> links in encoding order (first encoded first).
    decode_orders : dict
        Physical receiver -> links in decoding order (first decoded first).
    witness : str
        Human-readable reason for rejection, empty when valid.
    """

    valid: bool
    encode_orders: dict
    decode_orders: dict
    witness: str = ""


def _toposort(nodes, edges):
    """Kahn's algorithm with smallest-index tie breaking; None on a cycle."""
    indeg = {n: 0 for n in nodes}
    succ = {n: [] for n in nodes}
    for a, b in edges:
        succ[a].append(b)
        indeg[b] += 1
    heap = [n for n in nodes if indeg[n] == 0]
    heapq.heapify(heap)
    out = []
    while heap:
        n = heapq.heappop(heap)
        out.append(n)
        for m in succ[n]:
            indeg[m] -= 1
            if indeg[m] == 0:
                heapq.heappush(heap, m)
    return out if len(out) == len(nodes) else None


def _find_cycle(nodes, edges):
    succ = {n: [] for n in nodes}
    for a, b in edges:
        succ[a].append(b)
    color = {n: 0 for n in nodes}
    stack = []

    def dfs(n):
        color[n] = 1
        stack.append(n)
        for m in succ[n]:
            if color[m] == 1:
                return stack[stack.index(m):] + [m]
            if color[m] == 0:
                found = dfs(m)
                if found:
                    return found
        color[n] = 2
        stack.pop()
        return None

    for n in nodes:
        if color[n] == 0:
            found = dfs(n)
            if found:
                return found
    return None


def validate_coupling(phi, net, max_choices=14):
    """Check that every zero of ``phi`` is explained by a strict DPC/SIC order.

    A zero ``phi[l,k]`` means link ``l`` does not see link ``k``.  This is
    possible only if both links share a physical transmitter and ``k`` is
    encoded before ``l``, or share a physical receiver and ``k`` is decoded
    before ``l``.  Entries equal to one are always admissible.  The
    resulting precedence constraints must be acyclic at every node.

    Parameters
    ----------
    phi : array_like
    net : NetworkSpec
        Only the node labels are used.
    max_choices : int
        Pairs sharing both nodes may be explained either way; all
        ``2**n`` combinations are searched for up to this many such pairs.

    Returns
    -------
    CouplingVerdict
    """
    phi = as_phi(phi, net.L)
    L = net.L
    tx_edges, rx_edges, either = [], [], []
    for l in range(L):
        for k in range(L):
            if l == k or phi[l, k]:
                continue
            same_tx = net.tx_node[l] == net.tx_node[k]
            same_rx = net.rx_node[l] == net.rx_node[k]
            if same_tx and same_rx:
                either.append((k, l))
            elif same_tx:
                tx_edges.append((k, l))
            elif same_rx:
                rx_edges.append((k, l))
            else:
                return CouplingVerdict(False, {}, {}, (
                    f"link {l} is free of interference from link {k} but they share no node"))
    if len(either) > max_choices:
        raise ValueError("too many doubly co-located pairs for exhaustive order search")
    last = ""
    for choice in itertools.product((0, 1), repeat=len(either)):
        te = tx_edges + [e for e, c in zip(either, choice) if c == 0]
        re_ = rx_edges + [e for e, c in zip(either, choice) if c == 1]
        enc, dec, bad = {}, {}, ""
        for groups, edges, out, what in ((net.tx_groups(), te, enc, "encoding"),
                                         (net.rx_groups(), re_, dec, "decoding")):
            for node, links in groups.items():
                local = [e for e in edges if e[0] in links]
                order = _toposort(list(links), local)
                if order is None:
                    cyc = _find_cycle(list(links), local)
                    bad = f"cyclic {what} precedence at node {node!r}: " + " -> ".join(map(str, cyc))
                    break
                out[node] = tuple(order)
            if bad:
                break
        if not bad:
            return CouplingVerdict(True, enc, dec, "")
        last = bad
    return CouplingVerdict(False, {}, {}, last)
