"""Sectioned key-value config files.

Example::

    [topology]
    n_vms = 7
    links = complete        ; or "0>1 1>0 1>2 ..." (0-based VM indices)
    hosts =                 ; optional host id per VM, e.g. "0 0 1 2 3 4 5"

    [chains]
    s1 = f1 f2 f3
    s2 = f3 f1 f2

    [distributions]
    arrival_mean = 14       ; platform-wide services per slot
    price_lo = 0.1
    price_hi = 1.0          ; or price_mean + price_variance
    capacity_lo = 10
    capacity_hi = 20
    beta_floor = 1e-6

    [algorithm]
    policy = alg1
    placement_mode = two_timescale
    epsilon = 0.1
    ...
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .model import (ConfigError, Scenario, ServiceChain, SimConfig, build_network, make_topology,
                    seed_streams, uniform_from_moments)

SECTIONS = {
    "topology": {"n_vms", "links", "hosts"},
    "distributions": {"arrival_mean", "price_lo", "price_hi", "price_mean", "price_variance",
                      "capacity_lo", "capacity_hi", "beta_floor"},
    "algorithm": {"policy", "placement_mode", "epsilon", "horizon", "t_delta", "theta",
                  "theta_log_base", "seed", "tail_fraction", "strict", "learn"},
}
_INT = {"horizon", "t_delta", "seed"}
_BOOL = {"strict", "learn"}
_STR = {"policy", "placement_mode"}


@dataclass(frozen=True)
class Experiment:
    """Everything a config file describes; capacities are sampled when a scenario is built."""

    cfg: SimConfig
    n_vms: int = 7
    links: np.ndarray | None = None
    host_of: tuple[int, ...] | None = None
    chains: tuple[ServiceChain, ...] = ()
    n_vnfs: int | None = None

    def scenario(self, **overrides) -> Scenario:
        cfg = replace(self.cfg, **overrides) if overrides else self.cfg
        topo_rng, _ = seed_streams(cfg.seed)
        topo = make_topology(self.n_vms, topo_rng, cfg.capacity_lo, cfg.capacity_hi,
                             self.links, self.host_of)
        return Scenario(cfg, build_network(topo, self.chains, self.n_vnfs))

    def with_overrides(self, **overrides) -> "Experiment":
        return replace(self, cfg=replace(self.cfg, **overrides))


def parse_vnf(token: str) -> int:
    t = token.strip().lower()
    if not t.startswith("f") or not t[1:].isdigit() or int(t[1:]) < 1:
        raise ConfigError(f"bad VNF label {token!r}; expected f1, f2, ...")
    return int(t[1:]) - 1


def parse_links(text: str, n_vms: int) -> np.ndarray | None:
    text = text.strip()
    if text in ("", "complete"):
        return None
    links = np.zeros((n_vms, n_vms), dtype=bool)
    for tok in text.replace(",", " ").split():
        try:
            a, b = (int(x) for x in tok.split(">"))
        except ValueError:
            raise ConfigError(f"bad link {tok!r}; expected a>b") from None
        if not (0 <= a < n_vms and 0 <= b < n_vms):
            raise ConfigError(f"link {tok!r} names a VM outside 0..{n_vms - 1}")
        links[a, b] = True
    return links


def _value(key, raw):
    raw = raw.strip()
    try:
        if key in _STR:
            return raw.lower()
        if key in _BOOL:
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if key in _INT:
            return int(raw)
        if key == "theta" and raw.lower() in ("", "auto"):
            return None
        if key == "theta_log_base" and raw.lower() == "e":
            return math.e
        return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def parse_config(text: str) -> Experiment:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    for sec in cp.sections():
        if sec not in SECTIONS and sec != "chains":
            raise ConfigError(f"unknown section [{sec}]")
        if sec in SECTIONS:
            extra = set(cp[sec]) - SECTIONS[sec]
            if extra:
                raise ConfigError(f"unknown key(s) in [{sec}]: {', '.join(sorted(extra))}")

    values = {}
    for sec in ("distributions", "algorithm"):
        if cp.has_section(sec):
            for key, raw in cp[sec].items():
                values[key] = _value(key, raw)
    if "price_variance" in values or "price_mean" in values:
        if "price_lo" in values or "price_hi" in values:
            raise ConfigError("give either price_lo/price_hi or price_mean/price_variance")
        mean = values.pop("price_mean", SimConfig.price_lo / 2 + SimConfig.price_hi / 2)
        values["price_lo"], values["price_hi"] = uniform_from_moments(mean, values.pop("price_variance", 0.0))
    known = {f.name for f in fields(SimConfig)}
    cfg = SimConfig(**{k: v for k, v in values.items() if k in known})

    topo = cp["topology"] if cp.has_section("topology") else {}
    try:
        n_vms = int(topo.get("n_vms", "7"))
    except ValueError:
        raise ConfigError("n_vms must be an integer") from None
    links = parse_links(topo.get("links", "complete"), n_vms)
    hosts = topo.get("hosts", "").strip()
    host_of = tuple(int(h) for h in hosts.replace(",", " ").split()) if hosts else None

    chains = []
    if cp.has_section("chains"):
        for j, (_, raw) in enumerate(cp["chains"].items()):
            chains.append(ServiceChain(j, tuple(parse_vnf(t) for t in raw.replace(",", " ").split())))
    if not chains:
        raise ConfigError("the [chains] section must define at least one chain")
    return Experiment(cfg, n_vms, links, host_of, tuple(chains))


def load_config(path) -> Experiment:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)


DEFAULT_CONFIG = """\
[topology]
n_vms = 7
links = complete

[chains]
s1 = f1 f2 f3
s2 = f3 f1 f2

[distributions]
arrival_mean = 14
price_lo = 0.1
price_hi = 1.0
capacity_lo = 10
capacity_hi = 20
beta_floor = 1e-6

[algorithm]
policy = alg1
placement_mode = two_timescale
epsilon = 0.1
horizon = 10000
t_delta = 5
theta = auto
theta_log_base = e
seed = 1
tail_fraction = 0.25
strict = false
learn = true
"""


def default_experiment() -> Experiment:
    return parse_config(DEFAULT_CONFIG)
