import math
import os

import numpy as np
import pytest

from bmac.cli import main
from bmac.harness import parse_config, render_csv, run_experiment
from bmac.harness.config import ConfigError, config_hash, network_from_template
from bmac.harness.oracles import (hull_ray_radius, oracle_hull, oracle_scalar_mac_boundary,
                                  oracle_scalar_network, oracle_single_user)

CONFIGS = os.path.join(os.path.dirname(__file__), os.pardir, "configs")
LN2 = math.log(2)


# ----------------------------------------------------------------- oracles

def test_oracle_symmetric_ic():
    p, total, radius = oracle_scalar_network([[1, 0.5], [0.5, 1]], [LN2, LN2], [[0, 1], [1, 0]])
    assert np.allclose(p, [2, 2]) and total == pytest.approx(4.0) and radius < 1


def test_oracle_z_channel():
    p, total, _ = oracle_scalar_network([[1, 0.5], [0.5, 1]], [LN2, LN2], [[0, 0], [1, 0]])
    assert np.allclose(p, [1, 1.5]) and total == pytest.approx(2.5)


def test_oracle_zero_targets_and_infeasible():
    p, total, _ = oracle_scalar_network([[1, 2], [2, 1]], [0, 0], [[0, 1], [1, 0]])
    assert np.all(p == 0) and total == 0
    p, total, radius = oracle_scalar_network([[1, 2], [2, 1]], [LN2, LN2], [[0, 1], [1, 0]])
    assert p is None and total == math.inf and radius >= 1


def test_oracle_single_user_cases():
    assert oracle_single_user(np.array([[1.0]]), math.log(4))[0] == pytest.approx(3.0, abs=1e-10)
    power, cov = oracle_single_user(np.diag([2.0, math.sqrt(0.1)]), math.log(3))
    assert power == pytest.approx(0.5, abs=1e-10)
    assert np.allclose(cov, np.diag([0.5, 0.0]), atol=1e-10)
    assert oracle_single_user(np.eye(2), 0.0)[0] == 0.0


def test_oracles_are_independent_of_solvers():
    src = open(os.path.join(os.path.dirname(__file__), os.pardir, "src", "bmac", "harness",
                            "oracles.py")).read()
    assert "from bmac" not in src and "from .." not in src and "import bmac" not in src


# ------------------------------------------------------------------ config

BASE = {"kind": "convergence_trace",
        "network": {"links": 2, "topology": "interference",
                    "gains_db": {"direct": 0, "cross": -10}},
        "targets_bits": 0.5, "solvers": ["PR1"], "seeds": [0]}


@pytest.mark.parametrize("patch", [
    {"kind": "bogus"},
    {"network": None},
    {"network": {"topology": "mac"}},
    {"solvers": ["Z"]},
    {"targets_bits": None},
    {"targets_bits": -1},
    {"network": {"links": 2, "topology": "moon"}},
    {"network": {"links": 3, "topology": "mixed5"}},
    {"network": {"links": 2, "gains_db": [1, 2, 3]}},
])
def test_config_validation(patch):
    raw = dict(BASE)
    for k, v in patch.items():
        if v is None:
            raw.pop(k)
        else:
            raw[k] = v
    with pytest.raises(ConfigError):
        parse_config(raw)


def test_region_sweep_needs_two_links():
    with pytest.raises(ConfigError):
        parse_config({"kind": "region_sweep", "network": {"links": 3, "topology": "mac"}, "power": 1})


def test_config_defaults_and_hash():
    cfg = parse_config(BASE)
    assert cfg["tol"] == 1e-8 and cfg["workers"] == 1
    assert cfg.seeds == [0]
    assert config_hash(cfg) == config_hash(parse_config(dict(BASE)))
    assert config_hash(cfg) != config_hash(parse_config(dict(BASE, targets_bits=1)))
    assert parse_config(dict(BASE, seeds={"start": 3, "count": 2})).seeds == [3, 4]


def test_deterministic_template():
    net = network_from_template({"links": 2, "topology": "mac", "channel": "deterministic",
                                 "gains_db": [[0, -3], [0, -3]]}, 0)
    assert abs(net.channels[1][1][0, 0]) ** 2 == pytest.approx(10 ** -0.3)
    assert net.rx_node[0] == net.rx_node[1]
    with pytest.raises(ConfigError):
        network_from_template({"links": 2, "channel": "deterministic", "tx_antennas": 2}, 0)


# ------------------------------------------------------------- experiments

def _sweep(gains_db, power, rays=33):
    cfg = parse_config({"kind": "region_sweep", "network": {
        "links": 2, "topology": "mac", "channel": "deterministic", "gains_db": gains_db},
        "power": power, "rays": rays, "orders": "all", "solvers": ["A"], "seeds": [0], "tol": 1e-10})
    cols, rows = run_experiment(cfg)
    i1, i2 = cols.index("rate1_bits"), cols.index("rate2_bits")
    return np.array([[r[i1], r[i2]] for r in rows]) * LN2


@pytest.mark.parametrize("gains_db", [[[0, 0], [0, 0]], [[0, -3], [0, -3]]])
def test_region_sweep_matches_analytic_mac(gains_db):
    g = 10 ** (np.array(gains_db[0]) / 10)
    pts = _sweep(gains_db, 4.0)
    swept = oracle_hull(pts)
    exact = oracle_hull(oracle_scalar_mac_boundary(g[0], g[1], 4.0))
    for th in np.linspace(0, math.pi / 2, 41):
        d = np.array([math.cos(th), math.sin(th)])
        assert hull_ray_radius(swept, d) == pytest.approx(hull_ray_radius(exact, d), abs=1e-3)
    corners = [(math.log1p(4 * g[0]), 0.0), (0.0, math.log1p(4 * g[1]))]
    for c in corners:
        assert np.min(np.linalg.norm(pts - c, axis=1)) < 1e-3


def test_convergence_trace_monotone_after_feasibility():
    cfg = parse_config({"kind": "convergence_trace", "network": {
        "links": 3, "topology": "interference", "tx_antennas": 2, "rx_antennas": 2, "gains_db": 0},
        "targets_bits": 2, "solvers": ["B", "PR1"], "seeds": [0, 1], "max_iter": 80})
    cols, rows = run_experiment(cfg)
    ip, ir = cols.index("sum_power_dB"), cols.index("min_rate_bits")
    for seed in (0, 1):
        for solver in ("B", "PR1"):
            tr = [(r[ip], r[ir]) for r in rows if r[0] == seed and r[1] == solver]
            assert tr
            feas = [p for p, m in tr if m >= 2 - 1e-9]
            assert all(b <= a + 1e-9 for a, b in zip(feas, feas[1:]))


def test_parallel_fan_out_matches_serial():
    raw = {"kind": "prd_rounds", "network": {"links": 2, "topology": "interference",
                                              "tx_antennas": 2, "rx_antennas": 2, "gains_db": 0},
           "targets_bits": 2, "rounds": 2, "betas": [1.0], "seeds": [0, 1, 2]}
    serial = parse_config(raw)
    parallel = parse_config(dict(raw, workers=2))
    assert run_experiment(serial)[1] == run_experiment(parallel)[1]


def test_csv_header_records_provenance():
    cfg = parse_config(BASE)
    text = render_csv(cfg, *run_experiment(cfg))
    head = text.splitlines()[0]
    assert head.startswith("# bmac ") and config_hash(cfg) in head and "seeds=0" in head
    assert text.splitlines()[1] == "seed,solver,iteration,sum_power_dB,min_rate_bits"


# --------------------------------------------------------------------- cli

def test_cli_byte_identical(tmp_path):
    cfg = os.path.join(CONFIGS, "region_sweep_mac.yaml")
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["region_sweep", "--config", cfg, "--out-dir", str(a)]) == 0
    assert main(["region_sweep", "--config", cfg, "--out-dir", str(b)]) == 0
    fa = (a / "region_sweep_mac.csv").read_bytes()
    assert fa == (b / "region_sweep_mac.csv").read_bytes() and len(fa) > 100


def test_cli_overrides_and_errors(tmp_path, capsys):
    cfg = os.path.join(CONFIGS, "convergence_ic.yaml")
    assert main(["region_sweep", "--config", cfg]) == 2
    assert main(["convergence_trace", "--config", str(tmp_path / "missing.yaml")]) == 2
    assert main(["convergence_trace", "--config", cfg, "--seeds", "7", "--solver", "PR1",
                 "--tol", "1e-6", "--out-dir", str(tmp_path)]) == 0
    lines = (tmp_path / "convergence_ic.csv").read_text().splitlines()
    assert "seeds=7" in lines[0]
    assert {ln.split(",")[1] for ln in lines[2:]} == {"PR1"}
