"""Time the numba and numpy decision kernels on identical inputs.

    python benchmarks/bench_kernels.py --vms 7 11 21 --reps 200

Both backends are checked for bitwise-equal output before timing. The numba
kernels are warmed up once so compile time is reported separately.
"""
import argparse
import time

import numpy as np

from chainsim import algorithms as alg
from chainsim.dual_core import MultiplierView
from chainsim.dynamics import QueueState
from chainsim.kernels import BACKENDS, HAS_NUMBA
from chainsim.model import SimConfig, StateSampler, default_scenario, seed_streams


def make_inputs(n_vms, seed=0):
    cfg = SimConfig(seed=seed)
    sc = default_scenario(cfg, n_vms=n_vms)
    net = sc.net
    rng = np.random.default_rng(seed)
    state = QueueState(rng.uniform(0, 500, net.shape) * net.valid_Q[:, :, None],
                       rng.uniform(0, 500, net.shape) * net.valid_q[:, :, None])
    s = StateSampler(net, cfg, seed_streams(seed)[1]).sample()
    return cfg, net, state, s


def time_backend(name, cfg, net, state, s, reps):
    view = MultiplierView.from_queues(state, cfg.epsilon)
    t0 = time.perf_counter()
    d = alg.decide(view, s.alpha, s.beta, net, cfg.epsilon, backend=name)
    first = time.perf_counter() - t0
    t0 = time.perf_counter()
    for _ in range(reps):
        alg.decide(view, s.alpha, s.beta, net, cfg.epsilon, backend=name)
    return d, first, (time.perf_counter() - t0) / reps


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--vms", type=int, nargs="+", default=[5, 7, 11, 21])
    ap.add_argument("--reps", type=int, default=200)
    args = ap.parse_args(argv)

    if not HAS_NUMBA:
        print("numba is not importable; only the numpy backend can run")
    print(f"{'N':>4} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8} {'first numba s':>14}  equal")
    for n in args.vms:
        cfg, net, state, s = make_inputs(n)
        d_np, _, t_np = time_backend("numpy", cfg, net, state, s, args.reps)
        if not HAS_NUMBA:
            print(f"{n:>4} {t_np * 1e3:>10.3f}")
            continue
        d_nb, first, t_nb = time_backend("numba", cfg, net, state, s, args.reps)
        print(f"{n:>4} {t_np * 1e3:>10.3f} {t_nb * 1e3:>10.3f} {t_np / t_nb:>8.1f} {first:>14.3f}  "
              f"{d_np.equals(d_nb)}")


if __name__ == "__main__":
    main()
