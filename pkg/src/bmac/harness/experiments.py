"""Experiment runners producing deterministic CSV tables.

Rates are handled in nats internally and written in bits; powers are
written in dB relative to unit noise.
"""

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .. import __version__
from ..distsim import run_prd
from ..errors import BmacError
from ..ordering import (algorithm_o, all_orders, default_order, meb_order, order_to_coupling,
                        solve_with)
from .config import config_hash, network_from_template

__all__ = ["run_experiment", "render_csv", "fop_bisection", "ray_boundary", "COLUMNS"]

LN2 = math.log(2)

COLUMNS = {
    "region_sweep": ["order", "ray", "angle_rad", "rate1_bits", "rate2_bits", "alpha"],
    "convergence_trace": ["seed", "solver", "iteration", "sum_power_dB", "min_rate_bits"],
    "power_vs_rate": ["solver", "order", "total_rate_bits", "mean_sum_power_dB", "seeds_ok"],
    "prd_rounds": ["beta", "round", "mean_sum_power_dB", "mean_min_scaled_rate_bits",
                   "fraction_meeting_target"],
    "order_compare": ["seed", "source", "order", "sum_power_dB", "objective"],
}


def _db(x):
    return 10 * math.log10(x) if x > 0 else float("-inf")


def _solver_kw(cfg, solver):
    kw = {"tol": cfg["tol"]}
    if "max_iter" in cfg.data:
        kw["max_iter"] = int(cfg["max_iter"])
    if solver in ("A", "B"):
        kw["seed"] = 0
    return kw


def fop_bisection(net, phi, targets, power, solver="PR1", rtol=1e-6, **kw):
    """Largest ``α`` with ``α * targets`` reachable under sum power ``power``.

    Bisection on ``α`` around a sum-power minimization solver.
    """
    targets = np.asarray(targets, dtype=float)

    def need(a):
        try:
            return solve_with(solver, net, phi, a * targets, **kw).sum_power
        except BmacError:
            return float("inf")

    lo, hi = 0.0, 1.0
    while need(hi) <= power:
        lo, hi = hi, 2 * hi
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if need(mid) <= power:
            lo = mid
        else:
            hi = mid
    return lo


# ---- per-kind runners; each returns a list of rows --------------------------------


def ray_boundary(net, phi, direction, power, tol=1e-9, max_steps=100, **kw):
    """Rate scale ``c`` such that ``c * direction`` lies on the boundary.

    Algorithm A scales SINR targets rather than rates, so its targets are
    rescaled by the achieved rate ratio until its ``α`` equals one.
    """
    d = np.asarray(direction, dtype=float)
    pos = d > 0
    c = 1.0
    for _ in range(max_steps):
        res = solve_with("A", net, phi, c * d, power, tol=tol, **kw)
        ratio = float(np.min(res.rates[pos] / (c * d[pos])))
        c *= ratio
        if abs(res.objective - 1.0) <= tol and abs(ratio - 1.0) <= tol:
            break
    return c


def _region_sweep(cfg):
    net = network_from_template(cfg["network"], cfg.seeds[0])
    orders = list(all_orders(net)) if cfg["orders"] == "all" else [default_order(net)]
    n = int(cfg["rays"])
    solver = cfg["solvers"][0]
    rows = []
    for order in orders:
        phi = order_to_coupling(net, order)
        for i in range(n):
            theta = 0.5 * math.pi * i / (n - 1)
            d = np.array([math.cos(theta), math.sin(theta)])
            d[np.abs(d) < 1e-15] = 0.0
            if solver == "A":
                alpha = ray_boundary(net, phi, d, cfg["power"], tol=cfg["tol"])
            else:
                alpha = fop_bisection(net, phi, d, cfg["power"], solver=solver, tol=cfg["tol"])
            r = alpha * d / LN2
            rows.append([order.describe(), i, theta, r[0], r[1], alpha])
    return rows


def _trace_one(args):
    cfg, seed = args
    net = network_from_template(cfg["network"], seed)
    phi = order_to_coupling(net, default_order(net))
    tg = np.asarray(cfg["targets_bits"]) * LN2
    rows = []
    for solver in cfg["solvers"]:
        res = solve_with(solver, net, phi, tg, **_solver_kw(cfg, solver))
        for rec in res.trace:
            rows.append([seed, solver, rec["iteration"], _db(rec["sum_power"]),
                         rec.get("min_rate", float("nan")) / LN2])
    return rows


def _targets_for(cfg, total_bits, L):
    split = cfg["split"]
    w = np.ones(L) if split == "equal" else np.asarray(split, dtype=float)
    return total_bits * w / w.sum() * LN2


def _order_for(kind, net, tg, solver, cfg):
    if kind == "default":
        return default_order(net)
    if kind == "meb":
        return meb_order(net)
    if kind == "algorithm_o":
        return algorithm_o(net, tg, solver=solver, **_solver_kw(cfg, solver))[0]
    raise ValueError(f"unknown order choice {kind!r}")


def _pvr_one(args):
    cfg, seed = args
    net = network_from_template(cfg["network"], seed)
    out = {}
    for total in cfg["sum_rates_bits"]:
        tg = _targets_for(cfg, float(total), net.L)
        for solver in cfg["solvers"]:
            for okind in cfg["orders"]:
                order = _order_for(okind, net, tg, solver, cfg)
                phi = order_to_coupling(net, order)
                try:
                    p = solve_with(solver, net, phi, tg, **_solver_kw(cfg, solver)).sum_power
                except BmacError:
                    p = float("nan")
                out[(solver, okind, float(total))] = p
    return out


def _prd_one(args):
    cfg, seed, beta = args
    net = network_from_template(cfg["network"], seed)
    phi = order_to_coupling(net, default_order(net))
    tg = np.asarray(cfg["targets_bits"]) * LN2
    run = run_prd(net, phi, tg, int(cfg["rounds"]), caps=cfg["caps"], beta=beta, seed=seed,
                  audit=False)
    return run.trace


def _order_one(args):
    cfg, seed = args
    net = network_from_template(cfg["network"], seed)
    tg = np.asarray(cfg["targets_bits"]) * LN2
    solver = cfg["solvers"][0]
    kw = _solver_kw(cfg, solver)
    P_T = cfg.get("power")
    rows = []
    for order in all_orders(net):
        res = solve_with(solver, net, order_to_coupling(net, order), tg, P_T, **kw)
        rows.append([seed, "exhaustive", order.describe(), _db(res.sum_power), res.objective])
    order, res = algorithm_o(net, tg, solver=solver, P_T=P_T, **kw)
    rows.append([seed, "algorithm_o", order.describe(), _db(res.sum_power), res.objective])
    meb = meb_order(net)
    res = solve_with(solver, net, order_to_coupling(net, meb), tg, P_T, **kw)
    rows.append([seed, "meb", meb.describe(), _db(res.sum_power), res.objective])
    return rows


def _fan_out(fn, jobs, workers):
    """Map over jobs, in parallel when asked; results keep the job order."""
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, jobs))
    return [fn(j) for j in jobs]


def run_experiment(cfg):
    """Run an experiment.

    Parameters
    ----------
    cfg : ExperimentConfig

    Returns
    -------
    columns : list of str
    rows : list of list
    """
    w = int(cfg["workers"])
    kind = cfg.kind
    if kind == "region_sweep":
        rows = _region_sweep(cfg)
    elif kind == "convergence_trace":
        rows = [r for part in _fan_out(_trace_one, [(cfg, s) for s in cfg.seeds], w) for r in part]
    elif kind == "power_vs_rate":
        parts = _fan_out(_pvr_one, [(cfg, s) for s in cfg.seeds], w)
        rows = []
        for key in parts[0]:
            vals = np.array([p[key] for p in parts])
            ok = np.isfinite(vals)
            mean = float(np.mean(vals[ok])) if ok.any() else float("nan")
            rows.append([key[0], key[1], key[2], _db(mean) if ok.any() else mean, int(ok.sum())])
    elif kind == "prd_rounds":
        rows = []
        for beta in cfg["betas"]:
            traces = _fan_out(_prd_one, [(cfg, s, float(beta)) for s in cfg.seeds], w)
            for i, rec in enumerate(traces[0]):
                col = [t[i] for t in traces]
                rows.append([float(beta), rec["round"],
                             _db(float(np.mean([c["sum_power"] for c in col]))),
                             float(np.mean([c["min_scaled_rate_bits"] for c in col])),
                             float(np.mean([c["meets_target"] for c in col]))])
    elif kind == "order_compare":
        rows = [r for part in _fan_out(_order_one, [(cfg, s) for s in cfg.seeds], w) for r in part]
    else:
        raise ValueError(kind)
    return COLUMNS[kind], rows


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".10g")
    return str(v)


def render_csv(cfg, columns, rows):
    """CSV text with a provenance comment line followed by the table."""
    buf = io.StringIO()
    buf.write(f"# bmac {__version__} kind={cfg.kind} config_sha256={config_hash(cfg)} "
              f"seeds={','.join(map(str, cfg.seeds))}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def write_csv(cfg, columns, rows, path):
    """Write :func:`render_csv` output to ``path`` (parent directories created)."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(render_csv(cfg, columns, rows))
    return path
