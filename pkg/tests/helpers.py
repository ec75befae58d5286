"""Random instances shared by the test modules."""

import numpy as np

from bmac._linalg import crandn
from bmac.netmodel import build_network, generate_network
from bmac.ordering import all_orders, order_to_coupling

MIXED5_TX = ["A", "A", "B", "C", "C"]
MIXED5_RX = ["X", "Y", "Y", "Y", "Z"]
TREE4_TX = ["T1", "Y", "Y", "T4"]
TREE4_RX = ["X", "X", "R3", "R4"]
TREE4_GAINS = np.zeros((4, 4))
for a, b in [(2, 0), (3, 0), (3, 1), (3, 2)]:
    TREE4_GAINS[a, b] = -np.inf

TOPOLOGIES = {
    "ic": lambda L: ([f"T{l}" for l in range(L)], [f"R{l}" for l in range(L)]),
    "mac": lambda L: ([f"T{l}" for l in range(L)], ["R"] * L),
    "bc": lambda L: (["T"] * L, [f"R{l}" for l in range(L)]),
    "mixed": lambda L: ([f"T{l // 2}" for l in range(L)], [f"R{(l + 1) // 2}" for l in range(L)]),
}


def random_psd(rng, n, scale=1.0, rank=None):
    A = crandn(rng, (n, rank or n))
    S = A @ A.conj().T
    return scale * S / np.real(np.trace(S)) * n


def random_covs(rng, net, scale=1.0):
    return [random_psd(rng, n, scale) for n in net.tx_antennas]


def random_instance(seed, max_links=4, max_ant=4, colored=False):
    """Random network with a random valid coupling from a random order."""
    rng = np.random.default_rng(seed)
    L = int(rng.integers(1, max_links + 1))
    topo = list(TOPOLOGIES)[int(rng.integers(len(TOPOLOGIES)))]
    tx_node, rx_node = TOPOLOGIES[topo](L)
    tx_ant = {n: int(rng.integers(1, max_ant + 1)) for n in sorted(set(tx_node))}
    rx_ant = {n: int(rng.integers(1, max_ant + 1)) for n in sorted(set(rx_node))}
    tx = [tx_ant[n] for n in tx_node]
    rx = [rx_ant[n] for n in rx_node]
    gains = rng.uniform(-10, 5, (L, L))
    np.fill_diagonal(gains, 0.0)
    net = generate_network(tx, rx, gains, int(rng.integers(1 << 30)), tx_node, rx_node)
    if colored:
        net = build_network(net.channels, net.tx_node, net.rx_node,
                            noise_cov=[np.eye(n) + 0.5 * random_psd(rng, n) for n in rx],
                            linear_weight=[np.eye(n) + 0.5 * random_psd(rng, n) for n in tx])
    orders = list(all_orders(net))
    order = orders[int(rng.integers(len(orders)))]
    phi = order_to_coupling(net, order)
    return net, phi, random_covs(rng, net), rng


def scalar_net(gains, tx_node=None, rx_node=None):
    """Deterministic single-antenna network from a power-gain matrix."""
    g = np.asarray(gains, dtype=float)
    return build_network(np.sqrt(g)[:, :, None, None].tolist(), tx_node, rx_node)
