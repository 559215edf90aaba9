import numpy as np
import pytest
from hypothesis import settings

from chainsim.dynamics import QueueState
from chainsim.model import (PAPER_CHAINS, ServiceChain, SimConfig, StateSampler, build_network,
                            make_topology, seed_streams)

settings.register_profile("chainsim", deadline=None, max_examples=60)
settings.load_profile("chainsim")

_ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = []


@pytest.fixture(scope="session")
def acceptance_log(pytestconfig):
    return pytestconfig.stash[_ACCEPTANCE_KEY]


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(lines):
        terminalreporter.write_line(line)


def small_network(n_vms=3, seed=0, links=None, host_of=None, chains=PAPER_CHAINS):
    topo = make_topology(n_vms, np.random.default_rng(seed), 10, 20, links, host_of)
    return build_network(topo, chains)


def random_state(net, rng, scale=200.0):
    Q = rng.uniform(0, scale, net.shape) * net.valid_Q[:, :, None]
    q = rng.uniform(0, scale, net.shape) * net.valid_q[:, :, None]
    return QueueState(Q, q)


def random_sample(net, seed, cfg=None):
    cfg = cfg or SimConfig(seed=seed)
    return StateSampler(net, cfg, seed_streams(seed)[1]).sample()


@pytest.fixture
def net3():
    return small_network()


@pytest.fixture
def line_chains():
    return (ServiceChain(0, (0, 1)), ServiceChain(1, (1,)))
