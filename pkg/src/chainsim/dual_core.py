"""Closed-form per-slot minimizers, queue-price objectives, placement and greedy scheduling.

Everything here works on one start-of-slot snapshot. The functions are the
readable scalar versions; :mod:`chainsim.kernels` holds the array versions the
simulator runs, and the test suite checks the two against each other.

A multiplier view holds the two dual families ``m1`` (one per Q queue) and
``m2`` (one per q queue). For the queue-driven policy it is ``eps * (Q, q)``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .dynamics import Decision, QueueState, flows, slot_cost
from .model import Network, StateSample


@dataclass(frozen=True)
class MultiplierView:
    m1: np.ndarray
    m2: np.ndarray

    @classmethod
    def from_queues(cls, state: QueueState, epsilon: float) -> "MultiplierView":
        return cls(epsilon * state.Q, epsilon * state.q)

    def scaled(self, c: float) -> "MultiplierView":
        return MultiplierView(c * self.m1, c * self.m2)


def _check_price(price):
    if not price > 0:
        raise ValueError(f"price must be positive, got {price}")


def opt_rate(delta, price, cap):
    """Minimizer of ``price*r**2 - delta*r`` over [0, cap]."""
    _check_price(price)
    return min(max(delta / (2.0 * price), 0.0), cap)


def objective_value(delta, price, epsilon, cap=None):
    """Queue-price objective ``(price*r**2 - delta*r) / epsilon`` at the optimal rate.

    Without ``cap`` this is the interior closed form ``-delta**2 / (4*price*epsilon)``
    (zero when delta <= 0). With ``cap`` the objective is evaluated at the
    clamped rate, i.e. the value actually achievable.
    """
    _check_price(price)
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if cap is None:
        return -delta * delta / (4.0 * price * epsilon) if delta > 0 else 0.0
    r = opt_rate(delta, price, cap)
    return (price * r * r - delta * r) / epsilon


class Kind(Enum):
    PROCESS = 0
    ROUTE_U = 1
    ROUTE_V = 2


@dataclass(frozen=True)
class Candidate:
    kind: Kind
    i: int
    k: int
    b: int | None  # destination VM for routing
    objective: float
    rate: float

    @property
    def queue(self):
        return (1 if self.kind is Kind.ROUTE_V else 0, self.i, self.k)

    @property
    def resource(self):
        return 0 if self.kind is Kind.PROCESS else 1 + self.b

    @property
    def inert(self) -> bool:
        return not self.objective < 0

    def sort_key(self):
        return (self.objective, self.k, self.i, -1 if self.b is None else self.b, self.kind.value)


def _process_delta(view, net, i, k, n):
    nk = net.nxt[i, k]
    return view.m1[i, k, n] - view.m2[i, nk, n] if nk >= 0 else view.m1[i, k, n]


def _cap(base, backlog, idx):
    return base if backlog is None else min(base, backlog[idx])


def placement_select(view: MultiplierView, s: StateSample, n: int, net: Network, epsilon: float,
                     state: QueueState | None = None, strict=False) -> int:
    """VNF minimizing the summed processing objective at VM n; lowest k wins ties."""
    capQ = state.Q if strict else None
    best_k, best = 0, None
    for k in range(net.n_vnfs):
        total = 0.0
        for i in range(net.n_types):
            if not net.valid_Q[i, k]:
                continue
            delta = _process_delta(view, net, i, k, n)
            total += objective_value(delta, s.alpha[n], epsilon,
                                     _cap(net.topo.p_max[n], capQ, (i, k, n)))
        if best is None or total < best:
            best_k, best = k, total
    return best_k


def build_candidates(view: MultiplierView, state: QueueState | None, s: StateSample, net: Network,
                     n: int, place_k: int, epsilon: float, strict=False) -> list[Candidate]:
    """All processing and routing candidates of VM n, inert ones included.

    ``state`` only matters in strict mode, where each rate is additionally
    capped at the backlog of its source queue.
    """
    capQ = state.Q if strict else None
    capq = state.q if strict else None
    topo = net.topo
    out = []
    for k in range(net.n_vnfs):
        for i in range(net.n_types):
            if net.valid_Q[i, k] and k == place_k:
                delta = _process_delta(view, net, i, k, n)
                cap = _cap(topo.p_max[n], capQ, (i, k, n))
                out.append(Candidate(Kind.PROCESS, i, k, None,
                                     objective_value(delta, s.alpha[n], epsilon, cap),
                                     opt_rate(delta, s.alpha[n], cap)))
            for b in range(net.n_vms):
                if not topo.links[n, b]:
                    continue
                price = s.beta[n, b]
                if net.valid_Q[i, k]:
                    delta = view.m1[i, k, n] - view.m1[i, k, b]
                    cap = _cap(topo.l_max[n, b], capQ, (i, k, n))
                    out.append(Candidate(Kind.ROUTE_U, i, k, b,
                                         objective_value(delta, price, epsilon, cap),
                                         opt_rate(delta, price, cap)))
                if net.valid_q[i, k]:
                    delta = view.m2[i, k, n] - view.m1[i, k, b]
                    cap = _cap(topo.l_max[n, b], capq, (i, k, n))
                    out.append(Candidate(Kind.ROUTE_V, i, k, b,
                                         objective_value(delta, price, epsilon, cap),
                                         opt_rate(delta, price, cap)))
    return out


def greedy_assign(candidates) -> list[Candidate]:
    """Most negative objective first, one queue per resource and one resource per queue."""
    chosen = []
    used_q, used_r = set(), set()
    for c in sorted((c for c in candidates if not c.inert), key=Candidate.sort_key):
        if c.queue in used_q or c.resource in used_r:
            continue
        used_q.add(c.queue)
        used_r.add(c.resource)
        chosen.append(c)
    return chosen


def exact_assign(candidates) -> tuple[float, list[Candidate]]:
    """Exhaustive minimum-total one-to-one assignment; only for small instances."""
    active = [c for c in candidates if not c.inert]
    queues = sorted({c.queue for c in active})
    resources = sorted({c.resource for c in active})
    table = {(c.queue, c.resource): c for c in active}
    best, best_set = 0.0, []
    for r in range(1, min(len(queues), len(resources)) + 1):
        for qs in itertools.combinations(queues, r):
            for rs in itertools.permutations(resources, r):
                picks = [table.get(pair) for pair in zip(qs, rs)]
                if any(c is None for c in picks):
                    continue
                total = sum(c.objective for c in picks)
                if total < best:
                    best, best_set = total, picks
    return best, best_set


def apply_candidates(decision: Decision, n: int, chosen) -> None:
    for c in chosen:
        if c.kind is Kind.PROCESS:
            decision.p[c.i, c.k, n] = c.rate
        elif c.kind is Kind.ROUTE_U:
            decision.u[c.i, c.k, n, c.b] = c.rate
        else:
            decision.v[c.i, c.k, n, c.b] = c.rate


def reference_decide(view: MultiplierView, s: StateSample, net: Network, epsilon: float,
                     place=None, state: QueueState | None = None, strict=False) -> Decision:
    """Whole-network decision built from the scalar functions in this module."""
    if place is None:
        place = [placement_select(view, s, n, net, epsilon, state, strict) for n in range(net.n_vms)]
    d = Decision.zeros(net, place)
    for n in range(net.n_vms):
        cands = build_candidates(view, state, s, net, n, int(place[n]), epsilon, strict)
        apply_candidates(d, n, greedy_assign(cands))
    return d


def instantaneous_lagrangian(d: Decision, view: MultiplierView, s: StateSample, net: Network) -> float:
    """Cost plus multiplier-weighted net flow of every queue, with ``view`` as the multipliers."""
    f = flows(d, net)
    first = view.m1 * (f.q_in + s.R - f.q_out)
    second = np.where(net.valid_q[:, :, None], view.m2 * (f.proc_gain - f.v_out), 0.0)
    return slot_cost(d, s) + float(first.sum() + second.sum())
