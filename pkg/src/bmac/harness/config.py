"""Experiment configuration: loading, validation and network templates."""

import copy
import hashlib
import json
from dataclasses import dataclass

import numpy as np
import yaml

from ..netmodel import build_network, generate_network

__all__ = ["KINDS", "ConfigError", "ExperimentConfig", "load_config", "parse_config",
           "network_from_template", "config_hash"]

KINDS = ("region_sweep", "convergence_trace", "power_vs_rate", "prd_rounds", "order_compare")
TOPOLOGIES = ("interference", "mac", "bc", "mixed5", "custom")
SOLVERS = ("A", "B", "PR", "PR1")

_DEFAULTS = {
    "region_sweep": {"power": 4.0, "rays": 64, "orders": "all", "solvers": ["A"]},
    "convergence_trace": {"solvers": ["B", "PR1"], "max_iter": 60},
    "power_vs_rate": {"solvers": ["PR1"], "orders": ["default"], "split": "equal",
                      "sum_rates_bits": [4, 8, 12]},
    "prd_rounds": {"rounds": 6, "betas": [1.0], "caps": None},
    "order_compare": {"solvers": ["PR1"]},
}


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description.

    Attributes
    ----------
    kind : str
    data : dict
        Full configuration with defaults filled in.
    """

    kind: str
    data: dict

    def __getitem__(self, key):
        return self.data[key]

    def get(self, key, default=None):
        return self.data.get(key, default)

    @property
    def seeds(self):
        return list(self.data["seeds"])


def _seeds(spec):
    if isinstance(spec, int):
        return [spec]
    if isinstance(spec, dict):
        start, count = int(spec.get("start", 0)), int(spec["count"])
        return list(range(start, start + count))
    return [int(s) for s in spec]


def _gains(template, L):
    g = template.get("gains_db", 0.0)
    if isinstance(g, dict):
        direct, cross = float(g.get("direct", 0.0)), float(g.get("cross", 0.0))
        m = np.full((L, L), cross)
        np.fill_diagonal(m, direct)
        return m
    m = np.array(g, dtype=float) if np.ndim(g) else np.full((L, L), float(g))
    if m.shape != (L, L):
        raise ConfigError(f"gains_db must be a scalar, {{direct, cross}} or a {L}x{L} matrix")
    return m


def _nodes(template, L):
    topo = template.get("topology", "interference")
    if topo == "interference":
        return [f"T{l}" for l in range(L)], [f"R{l}" for l in range(L)]
    if topo == "mac":
        return [f"T{l}" for l in range(L)], ["R"] * L
    if topo == "bc":
        return ["T"] * L, [f"R{l}" for l in range(L)]
    if topo == "mixed5":
        if L != 5:
            raise ConfigError("topology mixed5 has 5 links")
        return ["A", "A", "B", "C", "C"], ["X", "Y", "Y", "Y", "Z"]
    if topo == "custom":
        try:
            return list(template["tx_node"]), list(template["rx_node"])
        except KeyError as exc:
            raise ConfigError("custom topology needs tx_node and rx_node") from exc
    raise ConfigError(f"unknown topology {topo!r}; expected one of {TOPOLOGIES}")


def network_from_template(template, seed):
    """Build a network from a template and a channel seed.

    ``channel: rayleigh`` (default) draws Gaussian channels; ``channel:
    deterministic`` requires single antennas and sets ``h = sqrt(g)``.
    """
    L = int(template["links"])
    ant = lambda v: [int(v)] * L if np.ndim(v) == 0 else [int(x) for x in v]  # noqa: E731
    tx, rx = ant(template.get("tx_antennas", 1)), ant(template.get("rx_antennas", 1))
    gains = _gains(template, L)
    tx_node, rx_node = _nodes(template, L)
    if template.get("channel", "rayleigh") == "deterministic":
        if any(a != 1 for a in tx + rx):
            raise ConfigError("deterministic channels need single antennas")
        lin = np.where(np.isneginf(gains), 0.0, 10 ** (gains / 10))
        return build_network(np.sqrt(lin)[:, :, None, None].tolist(), tx_node, rx_node)
    return generate_network(tx, rx, gains, seed, tx_node=tx_node, rx_node=rx_node)


def parse_config(raw):
    """Validate a configuration mapping and fill in defaults."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a mapping")
    kind = raw.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"kind must be one of {KINDS}, got {kind!r}")
    data = copy.deepcopy(_DEFAULTS[kind])
    data.update(copy.deepcopy(raw))
    if "network" not in data:
        raise ConfigError("missing 'network' template")
    net = data["network"]
    if "links" not in net:
        raise ConfigError("network template needs 'links'")
    L = int(net["links"])
    _nodes(net, L)
    _gains(net, L)
    data["seeds"] = _seeds(data.get("seeds", [0]))
    for s in data.get("solvers", []):
        if s not in SOLVERS:
            raise ConfigError(f"unknown solver {s!r}")
    if kind != "region_sweep" and kind != "power_vs_rate" and "targets_bits" not in data:
        raise ConfigError(f"{kind} needs targets_bits")
    if "targets_bits" in data:
        t = np.broadcast_to(np.asarray(data["targets_bits"], dtype=float), (L,))
        if np.any(t < 0):
            raise ConfigError("targets must be nonnegative")
        data["targets_bits"] = [float(x) for x in t]
    if kind == "region_sweep" and L != 2:
        raise ConfigError("region_sweep needs a two-link network")
    data.setdefault("tol", 1e-8)
    data.setdefault("workers", 1)
    return ExperimentConfig(kind, data)


def load_config(path):
    """Read a YAML configuration file."""
    with open(path, encoding="utf-8") as fh:
        return parse_config(yaml.safe_load(fh))


def config_hash(cfg):
    """sha256 of the canonical JSON form of the configuration."""
    blob = json.dumps(cfg.data, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()
