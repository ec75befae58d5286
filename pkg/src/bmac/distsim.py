"""Simulated time-division-duplex execution of alternating polite water-filling.

Every link has two nodes: its transmitter and its receiver.  A round is a
forward half, in which all transmitters update their input covariances,
followed by a reverse half, in which all receivers update the reverse
covariances.  Each node sees only its own :class:`NodeState`: a whitened
direct channel and a local interference-plus-noise covariance.  These are
assembled by the simulated pilot phase (estimation is exact), which is the
only code allowed to touch the global channel matrices.

Global channel access is logged through :class:`LoggedChannels`, so
:func:`information_audit` can prove that node update code never reads a
global quantity.
"""

import contextlib
import contextvars
import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from ._linalg import crandn, herm, inv_sqrt_psd, numerical_rank
from .netmodel import FORWARD, REVERSE, as_phi, interference_covariance, link_rates, sum_power
from .sinr_algs import SolverResult

__all__ = [
    "NodeState",
    "LoggedChannels",
    "AuditVerdict",
    "PRDRun",
    "node_context",
    "random_init",
    "transmitter_update",
    "receiver_update",
    "run_prd",
    "information_audit",
    "audit_call",
    "trace_csv",
]

_NODE = contextvars.ContextVar("bmac_node", default=None)

# fields a node update may read, per role
ALLOWED = {
    "tx": frozenset({"eff_channel", "interference_cov", "target", "cap"}),
    "rx": frozenset({"eff_channel", "interference_cov", "target", "cap"}),
}


@contextlib.contextmanager
def node_context(label):
    """Mark the enclosed code as running on node ``label``."""
    token = _NODE.set(label)
    try:
        yield
    finally:
        _NODE.reset(token)


class LoggedChannels:
    """Read-only channel array that records every access.

    Behaves like ``channels[l][k]``.  Each lookup is logged together with
    the node context active at the time (``None`` outside node code).
    """

    def __init__(self, channels):
        self._ch = tuple(tuple(row) for row in channels)
        self.log = []

    def __len__(self):
        return len(self._ch)

    def __getitem__(self, l):
        return _LoggedRow(self, l)

    def __iter__(self):
        return (self[l] for l in range(len(self)))

    def _get(self, l, k):
        self.log.append((_NODE.get(), l, k))
        return self._ch[l][k]


class _LoggedRow:
    def __init__(self, parent, l):
        self._p, self._l = parent, l

    def __len__(self):
        return len(self._p._ch[self._l])

    def __getitem__(self, k):
        return self._p._get(self._l, k)

    def __iter__(self):
        return (self[k] for k in range(len(self)))


class _AuditedState:
    """Read proxy over a :class:`NodeState` recording which fields are used."""

    def __init__(self, state, sink):
        object.__setattr__(self, "_s", state)
        object.__setattr__(self, "_sink", sink)

    def __getattr__(self, name):
        s = object.__getattribute__(self, "_s")
        object.__getattribute__(self, "_sink").append((_NODE.get(), name))
        return getattr(s, name)


@dataclass(frozen=True, eq=False)
class NodeState:
    """Everything a node may use for its update.

    Attributes
    ----------
    role : {'tx', 'rx'}
    link : int
    target : float
        Rate target in nats, already multiplied by the safety factor.
    cap : float
        Power cap on the node's covariance trace (``inf`` when absent).
    eff_channel : ndarray
        Transmitter: ``H^H Ω^{-1/2}`` (direct channel whitened by the
        receiver).  Receiver: ``H Ω̂^{-1/2}`` (whitened by the transmitter).
    interference_cov : ndarray
        Transmitter: reverse interference plus noise ``Ω̂``.  Receiver:
        forward interference plus noise ``Ω``.
    cov : ndarray or None
        The node's current covariance, kept for bookkeeping.
    """

    role: str
    link: int
    target: float
    cap: float
    eff_channel: np.ndarray
    interference_cov: np.ndarray
    cov: np.ndarray = None


def _local_waterfill(hbar, isqrt_own, target, cap, side_basis):
    U, s, Vh = np.linalg.svd(hbar, full_matrices=False)
    n = numerical_rank(s)
    delta = s[:n] ** 2
    basis = isqrt_own @ (Vh[:n].conj().T if side_basis == "right" else U[:, :n])
    if target <= 0 or n == 0:
        return np.zeros((isqrt_own.shape[0],) * 2, complex), 0.0
    d, nu = kernels.waterfill_rate(delta, float(target))
    if np.isfinite(cap):
        weight = np.real(np.sum(basis.conj() * basis, axis=0))
        if float(weight @ d) > cap:
            d, nu = kernels.waterfill_weighted(delta, weight, float(cap))
    return herm((basis * d) @ basis.conj().T), float(nu)


def transmitter_update(state):
    """Forward input of one link from its transmitter's local state.

    Water-fills ``Ω^{-1/2} H Ω̂^{-1/2}`` to the target rate and lowers the
    level until the trace meets the cap when the cap would be exceeded.

    Returns
    -------
    cov : ndarray
    nu : float
    """
    isr = inv_sqrt_psd(state.interference_cov)
    hbar = state.eff_channel.conj().T @ isr
    return _local_waterfill(hbar, isr, state.target, state.cap, "right")


def receiver_update(state):
    """Reverse input of one link from its receiver's local state.

    Returns
    -------
    cov : ndarray
    nu : float
    """
    isf = inv_sqrt_psd(state.interference_cov)
    hbar = isf @ state.eff_channel
    return _local_waterfill(hbar, isf, state.target, state.cap, "left")


def random_init(net, seed, scale=None):
    """Random forward covariances for the first round.

    Each link gets ``A A^H`` with ``A`` a square complex Gaussian matrix,
    normalized to trace ``scale[l]`` (default: the number of transmit
    antennas, i.e. unit power per antenna).
    """
    rng = np.random.default_rng(seed)
    out = []
    for l, n in enumerate(net.tx_antennas):
        A = crandn(rng, (n, n))
        S = A @ A.conj().T
        t = float(n if scale is None else np.broadcast_to(scale, (net.L,))[l])
        out.append(herm(S * (t / np.real(np.trace(S)))))
    return out


def _pilot_forward(net, phi, covs_f, covs_r, targets, caps):
    """States for the forward half (simulated estimation, not node code)."""
    states = []
    for l in range(net.L):
        omega = interference_covariance(net, phi, covs_f, l, FORWARD)
        omega_r = interference_covariance(net, phi, covs_r, l, REVERSE)
        eff = (inv_sqrt_psd(omega) @ net.channels[l][l]).conj().T
        states.append(NodeState("tx", l, targets[l], caps[l], eff, omega_r, covs_f[l]))
    return states


def _pilot_reverse(net, phi, covs_f, covs_r_prev, targets):
    states = []
    for l in range(net.L):
        omega = interference_covariance(net, phi, covs_f, l, FORWARD)
        omega_r = interference_covariance(net, phi, covs_r_prev, l, REVERSE)
        eff = net.channels[l][l] @ inv_sqrt_psd(omega_r)
        states.append(NodeState("rx", l, targets[l], np.inf, eff, omega, covs_r_prev[l]))
    return states


@dataclass
class PRDRun:
    """Outcome of :func:`run_prd`.

    Attributes
    ----------
    result : SolverResult
    forward : list of list of ndarray
        Forward covariances of each round, ``forward[k-1]`` for round ``k``.
    reverse : list of list of ndarray
        Reverse covariances after each round's reverse half.
    trace : list of dict
        Rows with keys ``round`` (``k - 0.5`` after the forward half of
        round ``k``, ``k`` after its reverse half), ``sum_power``,
        ``sum_power_dB``, ``min_rate``, ``min_scaled_rate_bits`` and
        ``meets_target``.
    channel_log : list
    field_log : list
        Field reads of node updates as ``(node, field)`` pairs.
    audited : bool
    """

    result: SolverResult
    forward: list
    reverse: list
    trace: list
    channel_log: list = field(default_factory=list)
    field_log: list = field(default_factory=list)
    audited: bool = False


def _trace_row(net, phi, covs_f, label, true_targets):
    rates = link_rates(net, phi, covs_f)
    total = sum_power(net, covs_f)
    pos = true_targets > 0
    ratio = float(np.min(rates[pos] / true_targets[pos])) if np.any(pos) else np.inf
    ref = float(np.max(true_targets)) if np.any(pos) else 0.0
    return {
        "round": label,
        "sum_power": total,
        "sum_power_dB": 10 * np.log10(total) if total > 0 else -np.inf,
        "min_rate": float(np.min(rates)),
        "min_scaled_rate_bits": ratio * ref / np.log(2) if np.any(pos) else 0.0,
        "meets_target": bool(np.all(rates[pos] >= true_targets[pos] * (1 - 1e-9))),
    }


def run_prd(net, phi, targets, rounds, caps=None, beta=1.0, init=None, seed=0, audit=True,
            tx_update=None, rx_update=None, node_order=None, estimator=None):
    """Distributed alternating polite water-filling.

    Parameters
    ----------
    net, phi
    targets : array_like
        True rate targets in nats.
    rounds : int
        Number of full rounds (each a forward and a reverse half).
    caps : array_like, optional
        Per-link cap on ``Tr(Σ_l)``.  Default: infinite.
    beta : float
        Safety factor ``>= 1``; nodes aim at ``beta * targets``.
    init : list of ndarray, optional
        Round-1 forward covariances (default :func:`random_init`).
    seed : int
        Seed for the default init.
    audit : bool
        Log channel and state accesses for :func:`information_audit`.
    tx_update, rx_update : callable, optional
        Replacement node update rules (for testing the audit).
    node_order : sequence of int, optional
        Order in which nodes are visited within a half-round.
    estimator : callable, optional
        ``estimator(state) -> NodeState`` applied to every state produced by
        the pilot phase, e.g. to perturb the estimates.  Default: exact.

    Returns
    -------
    PRDRun
    """
    if rounds < 1:
        raise ValueError("rounds must be at least 1")
    if beta < 1:
        raise ValueError("beta must be at least 1")
    phi = as_phi(phi, net.L)
    L = net.L
    true_t = np.asarray(targets, dtype=float)
    tg = beta * true_t
    caps = np.full(L, np.inf) if caps is None else np.broadcast_to(np.asarray(caps, float), (L,))
    tx_update = tx_update or transmitter_update
    rx_update = rx_update or receiver_update
    order = list(range(L)) if node_order is None else list(node_order)
    logged = LoggedChannels(net.channels) if audit else None
    wnet = replace(net, channels=logged) if audit else net
    field_log = []

    def wrap(s):
        if estimator is not None:
            s = estimator(s)
        return _AuditedState(s, field_log) if audit else s

    covs_f = [np.asarray(c, complex) for c in (init if init is not None else random_init(net, seed))]
    covs_r = [np.eye(n, dtype=complex) / n for n in net.rx_antennas]
    forward, reverse, trace = [], [], []
    for k in range(1, rounds + 1):
        if k > 1:
            states = _pilot_forward(wnet, phi, covs_f, covs_r, tg, caps)
            new = [None] * L
            for l in order:
                with node_context(f"tx{l}"):
                    new[l], _ = tx_update(wrap(states[l]))
            covs_f = new
        forward.append([c.copy() for c in covs_f])
        trace.append(_trace_row(net, phi, covs_f, k - 0.5, true_t))
        states = _pilot_reverse(wnet, phi, covs_f, covs_r, tg)
        new = [None] * L
        for l in order:
            with node_context(f"rx{l}"):
                new[l], _ = rx_update(wrap(states[l]))
        covs_r = new
        reverse.append([c.copy() for c in covs_r])
        row = dict(trace[-1], round=float(k))
        trace.append(row)
    res = SolverResult(covs_f, covs_r, None, link_rates(net, phi, covs_f), sum_power(net, covs_f),
                       sum_power(net, covs_f), trace, False, rounds)
    return PRDRun(res, forward, reverse, trace, logged.log if audit else [], field_log, audit)


@dataclass(frozen=True)
class AuditVerdict:
    """Outcome of an information audit.

    Attributes
    ----------
    passed : bool
    witness : tuple or None
        ``(node, quantity)`` of the first violation found.
    """

    passed: bool
    witness: tuple = None

    def __bool__(self):
        return self.passed


def information_audit(run):
    """Check that no node update read anything outside its local state.

    Parameters
    ----------
    run : PRDRun or list
        A PRD run recorded with auditing, or a raw channel access log from
        :func:`audit_call`.

    Returns
    -------
    AuditVerdict
    """
    if isinstance(run, PRDRun):
        if not run.audited:
            return AuditVerdict(False, (None, "run recorded without auditing"))
        chan_log, fields = run.channel_log, run.field_log
    else:
        chan_log, fields = run, []
    for node, l, k in chan_log:
        if node is not None:
            return AuditVerdict(False, (node, f"H[{l}][{k}]"))
    for node, name in fields:
        role = "tx" if str(node).startswith("tx") else "rx"
        if name not in ALLOWED[role]:
            return AuditVerdict(False, (node, name))
    return AuditVerdict(True)


def audit_call(fn, net, *args, node="central", **kw):
    """Run ``fn(net_logged, *args, **kw)`` as if it were node code.

    Returns the function's result and the channel access log, which can be
    passed to :func:`information_audit`.
    """
    logged = LoggedChannels(net.channels)
    with node_context(node):
        out = fn(replace(net, channels=logged), *args, **kw)
    return out, logged.log


def trace_csv(run):
    """Per-half-round trace as CSV text (round, sum_power_dB, min_scaled_rate_bits)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["round", "sum_power_dB", "min_scaled_rate_bits"])
    for row in run.trace:
        w.writerow([f"{row['round']:.1f}", f"{row['sum_power_dB']:.6f}",
                    f"{row['min_scaled_rate_bits']:.6f}"])
    return buf.getvalue()
