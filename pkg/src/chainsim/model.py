"""Domain model: topology, service chains, run configuration and the i.i.d. state sampler."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

POLICIES = ("alg1", "alg2", "heu")
PLACEMENT_MODES = ("per_slot", "two_timescale")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Topology:
    """VMs with capacities and directed links.

    ``links`` is a boolean adjacency matrix (``links[a, b]`` means a directed
    link a -> b exists). ``l_max`` is zero off-link. ``host_of`` optionally maps
    each VM to a host id; ``zero_price`` flags intra-host links once
    :func:`expand_colocated` has been applied.
    """

    n_vms: int
    links: np.ndarray
    p_max: np.ndarray
    l_max: np.ndarray
    host_of: tuple[int, ...] | None = None
    zero_price: np.ndarray | None = None

    def __post_init__(self):
        n = self.n_vms
        if n < 1:
            raise ConfigError("topology needs at least one VM")
        if self.links.shape != (n, n) or self.l_max.shape != (n, n) or self.p_max.shape != (n,):
            raise ConfigError("topology arrays do not match n_vms")
        if np.any(np.diag(self.links)):
            raise ConfigError("self-links are not allowed")
        if np.any(self.p_max <= 0):
            raise ConfigError("every VM needs p_max > 0")
        if np.any(self.l_max[self.links] <= 0):
            raise ConfigError("every link needs l_max > 0")
        if self.host_of is not None:
            if len(self.host_of) != n:
                raise ConfigError("host_of must name a host for every VM")
            for a in range(n):
                for b in range(n):
                    if a != b and self.host_of[a] == self.host_of[b] and not self.links[a, b]:
                        raise ConfigError(f"VMs {a} and {b} share a host but link [{a},{b}] is missing")
        for arr in (self.links, self.p_max, self.l_max):
            arr.setflags(write=False)

    @property
    def degree_max(self) -> int:
        """Maximum over VMs of max(in-degree, out-degree)."""
        out_deg = self.links.sum(axis=1)
        in_deg = self.links.sum(axis=0)
        return int(max(out_deg.max(), in_deg.max()))

    def link_list(self) -> list[tuple[int, int]]:
        return [(int(a), int(b)) for a, b in zip(*np.nonzero(self.links))]


def complete_links(n_vms: int) -> np.ndarray:
    links = np.ones((n_vms, n_vms), dtype=bool)
    np.fill_diagonal(links, False)
    return links


def make_topology(n_vms, rng, cap_lo=10.0, cap_hi=20.0, links=None, host_of=None) -> Topology:
    """Sample fixed capacities U[cap_lo, cap_hi] once for every VM and link."""
    if links is None:
        links = complete_links(n_vms)
    links = np.asarray(links, dtype=bool)
    p_max = rng.uniform(cap_lo, cap_hi, size=n_vms)
    l_max = np.where(links, rng.uniform(cap_lo, cap_hi, size=(n_vms, n_vms)), 0.0)
    host = tuple(int(h) for h in host_of) if host_of is not None else None
    return Topology(n_vms, links, p_max, l_max, host)


def expand_colocated(topo: Topology) -> Topology:
    """Flag every intra-host link as zero-price (the sampler then uses the price floor)."""
    flags = np.zeros_like(topo.links)
    if topo.host_of is not None:
        hosts = np.asarray(topo.host_of)
        flags = (hosts[:, None] == hosts[None, :]) & topo.links
    flags.setflags(write=False)
    return replace(topo, zero_price=flags)


@dataclass(frozen=True)
class ServiceChain:
    id: int
    vnfs: tuple[int, ...]

    def __post_init__(self):
        if not self.vnfs:
            raise ConfigError(f"chain {self.id} is empty")
        if len(set(self.vnfs)) != len(self.vnfs):
            raise ConfigError(f"chain {self.id} repeats a VNF")
        if min(self.vnfs) < 0:
            raise ConfigError(f"chain {self.id} has a negative VNF id")


def chain_neighbors(chains, i, k):
    """(predecessor, successor) of VNF ``k`` in chain ``i``; None at the chain ends."""
    try:
        vnfs = chains[i].vnfs
        pos = vnfs.index(k)
    except (IndexError, ValueError):
        raise LookupError(f"VNF {k} is not part of chain {i}") from None
    prev = vnfs[pos - 1] if pos > 0 else None
    nxt = vnfs[pos + 1] if pos + 1 < len(vnfs) else None
    return prev, nxt


@dataclass(frozen=True)
class SimConfig:
    epsilon: float = 0.1
    horizon: int = 10_000
    t_delta: int = 5
    theta: float | None = None  # None: 2*sqrt(eps)*log(eps)**2
    theta_log_base: float = math.e
    seed: int = 0
    price_lo: float = 0.1
    price_hi: float = 1.0
    arrival_mean: float = 14.0
    capacity_lo: float = 10.0
    capacity_hi: float = 20.0
    beta_floor: float = 1e-6
    policy: str = "alg1"
    placement_mode: str = "two_timescale"
    tail_fraction: float = 0.25
    strict: bool = False
    learn: bool = True

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be > 0")
        if self.horizon < 0:
            raise ConfigError("horizon must be >= 0")
        if self.t_delta < 1:
            raise ConfigError("t_delta must be >= 1")
        if not 0 < self.tail_fraction <= 1:
            raise ConfigError("tail_fraction must lie in (0, 1]")
        if not 0 < self.price_lo <= self.price_hi:
            raise ConfigError("prices need 0 < price_lo <= price_hi")
        if self.arrival_mean < 0:
            raise ConfigError("arrival_mean must be >= 0")
        if not 0 < self.capacity_lo <= self.capacity_hi:
            raise ConfigError("capacities need 0 < capacity_lo <= capacity_hi")
        if not self.beta_floor > 0:
            raise ConfigError("beta_floor must be > 0")
        if self.policy not in POLICIES:
            raise ConfigError(f"unknown policy {self.policy!r}")
        if self.placement_mode not in PLACEMENT_MODES:
            raise ConfigError(f"unknown placement mode {self.placement_mode!r}")

    @property
    def price_mean(self) -> float:
        return (self.price_lo + self.price_hi) / 2

    def arrival_max(self, n_types: int) -> float:
        """Largest single arrival entry: each type draws U[0, 2 * arrival_mean / n_types]."""
        return 2 * self.arrival_mean / n_types

    @property
    def theta_value(self) -> float:
        if self.theta is not None:
            return self.theta
        return theta_default(self.epsilon, self.theta_log_base)

    def with_price_variance(self, variance: float) -> "SimConfig":
        lo, hi = uniform_from_moments(self.price_mean, variance)
        return replace(self, price_lo=lo, price_hi=hi)


def theta_default(epsilon, log_base=math.e):
    return 2 * math.sqrt(epsilon) * math.log(epsilon, log_base) ** 2


def uniform_from_moments(mean, variance):
    """Support [lo, hi] of the uniform with the given mean and variance (w**2/12 = var)."""
    if variance < 0:
        raise ConfigError("variance must be >= 0")
    half = math.sqrt(12 * variance) / 2
    if half >= mean:
        raise ConfigError(f"variance {variance} needs a non-positive lower price bound at mean {mean}")
    return mean - half, mean + half


@dataclass(frozen=True)
class Network:
    """Dense index arrays derived from a topology and its chains (what the kernels read)."""

    topo: Topology
    chains: tuple[ServiceChain, ...]
    n_vnfs: int
    nxt: np.ndarray  # (I, K) successor VNF or -1
    prv: np.ndarray  # (I, K) predecessor VNF or -1
    first: np.ndarray  # (I,) entry VNF of each chain
    valid_Q: np.ndarray  # (I, K) k is in chain i
    valid_q: np.ndarray  # (I, K) k is in chain i and has a predecessor
    beta_fixed: np.ndarray = field(repr=False, default=None)  # (N, N) True where beta is pinned to the floor

    @property
    def n_types(self) -> int:
        return len(self.chains)

    @property
    def n_vms(self) -> int:
        return self.topo.n_vms

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.n_types, self.n_vnfs, self.n_vms


def build_network(topo: Topology, chains, n_vnfs=None) -> Network:
    chains = tuple(chains)
    if not chains:
        raise ConfigError("at least one service chain is required")
    top = max(max(c.vnfs) for c in chains) + 1
    K = top if n_vnfs is None else n_vnfs
    if K < top:
        raise ConfigError("n_vnfs is smaller than the VNF ids used by the chains")
    I = len(chains)
    nxt = np.full((I, K), -1, dtype=np.int64)
    prv = np.full((I, K), -1, dtype=np.int64)
    valid_Q = np.zeros((I, K), dtype=bool)
    first = np.empty(I, dtype=np.int64)
    for i, c in enumerate(chains):
        first[i] = c.vnfs[0]
        for k in c.vnfs:
            valid_Q[i, k] = True
            p, s = chain_neighbors(chains, i, k)
            prv[i, k] = -1 if p is None else p
            nxt[i, k] = -1 if s is None else s
    valid_q = valid_Q & (prv >= 0)
    if topo.zero_price is None:
        topo = expand_colocated(topo)
    return Network(topo, chains, K, nxt, prv, first, valid_Q, valid_q, topo.zero_price)


@dataclass(frozen=True)
class StateSample:
    """One slot's random state: arrivals (I, K, N), processing prices (N,), routing prices (N, N)."""

    R: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray


class StateSampler:
    """i.i.d. state stream for one run.

    ``arrival_mean`` is the platform-wide mean arrival per slot, shared evenly by
    the service types. Each slot, every type's arrival is drawn
    U[0, 2*arrival_mean/I] and lands on the chain's entry VNF queue at one VM
    chosen uniformly. Prices are drawn
    independently per VM and per link (off-link entries are drawn and then
    ignored so the stream does not depend on adjacency).
    """

    def __init__(self, net: Network, cfg: SimConfig, rng: np.random.Generator):
        self.net = net
        self.cfg = cfg
        self.rng = rng

    def sample(self) -> StateSample:
        net, cfg, rng = self.net, self.cfg, self.rng
        I, K, N = net.shape
        R = np.zeros((I, K, N))
        totals = rng.uniform(0.0, cfg.arrival_max(I), size=I)
        where = rng.integers(0, N, size=I)
        R[np.arange(I), net.first, where] = totals
        alpha = rng.uniform(cfg.price_lo, cfg.price_hi, size=N)
        beta = rng.uniform(cfg.price_lo, cfg.price_hi, size=(N, N))
        beta[net.beta_fixed] = cfg.beta_floor
        return StateSample(R, alpha, beta)


def sample_state(rng, cfg: SimConfig, net: Network) -> StateSample:
    return StateSampler(net, cfg, rng).sample()


def seed_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent (topology, state) generators for one seed."""
    topo_ss, state_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(topo_ss), np.random.default_rng(state_ss)


PAPER_CHAINS = (ServiceChain(0, (0, 1, 2)), ServiceChain(1, (2, 0, 1)))


@dataclass(frozen=True)
class Scenario:
    cfg: SimConfig
    net: Network


def default_scenario(cfg: SimConfig | None = None, n_vms=7, links=None, host_of=None,
                     chains=PAPER_CHAINS) -> Scenario:
    """N VMs (complete graph by default) and the two three-VNF chains used in the experiments."""
    cfg = cfg or SimConfig()
    topo_rng, _ = seed_streams(cfg.seed)
    topo = make_topology(n_vms, topo_rng, cfg.capacity_lo, cfg.capacity_hi, links, host_of)
    return Scenario(cfg, build_network(topo, chains))
