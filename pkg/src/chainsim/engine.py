"""One simulation run: sample state, decide, step queues, record."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import algorithms as alg
from .dynamics import Decision, QueueState, slot_cost, step_queues, total_backlog
from .model import Scenario, SimConfig, StateSample, StateSampler, seed_streams

TRACE_HEADER = ("t", "cost", "avg_cost", "backlog", "policy", "epsilon", "seed")


@dataclass
class Trace:
    cfg: SimConfig
    t: np.ndarray
    cost: np.ndarray
    avg_cost: np.ndarray
    backlog: np.ndarray  # after the slot's update
    placement: np.ndarray  # (T, N)
    truncated: np.ndarray  # any max{., 0} fired in the slot
    dev_Q: np.ndarray  # max |Q(t) - Q(tau)| at the start of slot t, tau its window anchor
    dev_q: np.ndarray
    proc_rate: np.ndarray  # total processing rate applied in the slot
    route_rate: np.ndarray  # total routing rate (u + v) applied in the slot
    learn: alg.LearnState | None = None
    final_state: QueueState | None = None
    history: list = field(default_factory=list)

    def __len__(self):
        return len(self.t)


@dataclass(frozen=True)
class SlotRecord:
    """Start-of-slot snapshot plus what was applied; kept only when history is requested."""

    t: int
    state: QueueState
    sample: StateSample
    hold: alg.PlacementHold | None
    learn: alg.LearnState | None
    decision: Decision
    virtual: Decision | None


def policy_decide(cfg, net, state, s, hold, t, learn, backend=None):
    if cfg.policy == "alg1":
        return alg.alg1_decide(net, state, s, cfg, hold, t, backend), None
    if cfg.policy == "heu":
        return alg.heu_decide(net, state, s, cfg, hold, t, backend), None
    return alg.alg2_decide(net, state, learn, s, cfg, hold, t, backend)


def policy_place(cfg, net, state, s, t, learn, backend=None):
    view = None
    if cfg.policy == "alg2":
        view = alg.effective_multiplier(learn, state, cfg, net)
    return alg.twoscale_place(net, state, s, cfg, t, view=view,
                              mean_prices=cfg.policy == "heu", backend=backend)


def run(scenario: Scenario, history=False, backend=None) -> Trace:
    """Execute ``cfg.horizon`` slots; deterministic given the config seed."""
    cfg, net = scenario.cfg, scenario.net
    T, N = cfg.horizon, net.n_vms
    _, state_rng = seed_streams(cfg.seed)
    sampler = StateSampler(net, cfg, state_rng)
    state = QueueState.zeros(net)
    learn = alg.LearnState.zeros(net) if cfg.policy == "alg2" else None
    two_scale = cfg.placement_mode == "two_timescale"
    hold = None
    anchor = state

    cost = np.zeros(T)
    backlog = np.zeros(T)
    placement = np.zeros((T, N), dtype=np.int64)
    truncated = np.zeros(T, dtype=bool)
    dev_Q = np.zeros(T)
    dev_q = np.zeros(T)
    proc = np.zeros(T)
    route = np.zeros(T)
    records = []

    for t in range(T):
        if t % cfg.t_delta == 0:
            anchor = state
        dev_Q[t] = np.abs(state.Q - anchor.Q).max()
        dev_q[t] = np.abs(state.q - anchor.q).max()
        s = sampler.sample()
        if two_scale and t % cfg.t_delta == 0:
            hold = policy_place(cfg, net, state, s, t, learn, backend)
        d, virtual = policy_decide(cfg, net, state, s, hold if two_scale else None, t, learn, backend)
        if history:
            records.append(SlotRecord(t, state, s, hold if two_scale else None, learn, d, virtual))
        cost[t] = slot_cost(d, s)
        proc[t] = d.p.sum()
        route[t] = d.u.sum() + d.v.sum()
        placement[t] = d.placement
        state, truncated[t] = step_queues(state, d, s, net, check=False)
        backlog[t] = total_backlog(state)
        if learn is not None and cfg.learn:
            learn = alg.alg2_update(learn, virtual, s, net)

    ts = np.arange(1, T + 1)
    avg = np.cumsum(cost) / ts if T else np.zeros(0)
    return Trace(cfg, ts, cost, avg, backlog, placement, truncated, dev_Q, dev_q, proc, route,
                 learn, state, records)


@dataclass(frozen=True)
class SteadyState:
    mean_cost: float
    mean_backlog: float
    mean_proc_rate: float
    mean_route_rate: float


def steady_state_stats(trace: Trace, tail_fraction: float | None = None) -> SteadyState:
    """Means over the final ceil(tail_fraction * T) slots."""
    if len(trace) == 0:
        raise ValueError("steady-state statistics need a non-empty trace")
    frac = trace.cfg.tail_fraction if tail_fraction is None else tail_fraction
    if not 0 < frac <= 1:
        raise ValueError("tail_fraction must lie in (0, 1]")
    m = math.ceil(frac * len(trace))
    sl = slice(len(trace) - m, None)
    return SteadyState(float(trace.cost[sl].mean()), float(trace.backlog[sl].mean()),
                       float(trace.proc_rate[sl].mean()), float(trace.route_rate[sl].mean()))


def fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return f"{x:.9g}"
    return str(x)


def write_trace_csv(trace: Trace, path) -> Path:
    path = Path(path)
    cfg = trace.cfg
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for j in range(len(trace)):
            w.writerow([int(trace.t[j]), fmt(trace.cost[j]), fmt(trace.avg_cost[j]),
                        fmt(trace.backlog[j]), cfg.policy, fmt(float(cfg.epsilon)), cfg.seed])
    return path


def read_trace_csv(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["t"] = int(r["t"])
        for key in ("cost", "avg_cost", "backlog", "epsilon"):
            r[key] = float(r[key])
        r["seed"] = int(r["seed"])
    return rows
