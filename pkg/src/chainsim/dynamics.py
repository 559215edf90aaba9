"""Queue evolution, feasibility checking and the per-slot cost."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Network, StateSample, Topology


@dataclass(frozen=True)
class QueueState:
    """Q[i,k,n]: awaiting VNF k at VM n. q[i,k,n]: processed at n, awaiting k downstream."""

    Q: np.ndarray
    q: np.ndarray

    @classmethod
    def zeros(cls, net: Network) -> "QueueState":
        return cls(np.zeros(net.shape), np.zeros(net.shape))


@dataclass(frozen=True)
class Decision:
    """One slot's placement and rates.

    e: (K, N) one-hot placement; p: (I, K, N); u, v: (I, K, N, N) indexed
    [i, k, a, b] for the rate over link a -> b.
    """

    e: np.ndarray
    p: np.ndarray
    u: np.ndarray
    v: np.ndarray

    @classmethod
    def zeros(cls, net: Network, place=None) -> "Decision":
        I, K, N = net.shape
        e = np.zeros((K, N), dtype=np.int8)
        e[np.zeros(N, dtype=np.int64) if place is None else np.asarray(place), np.arange(N)] = 1
        return cls(e, np.zeros((I, K, N)), np.zeros((I, K, N, N)), np.zeros((I, K, N, N)))

    @property
    def placement(self) -> np.ndarray:
        return np.argmax(self.e, axis=0)

    def equals(self, other: "Decision") -> bool:
        return all(np.array_equal(getattr(self, f), getattr(other, f)) for f in ("e", "p", "u", "v"))


@dataclass(frozen=True)
class Flows:
    """Per-queue flow totals of one decision, shared by the queue laws and the dual updates."""

    q_out: np.ndarray  # Q departures: sum_b u[i,k,n,b] + p[i,k,n] e[k,n]
    q_in: np.ndarray  # Q arrivals from links: sum_a u[i,k,a,n] + sum_c v[i,k,c,n]
    v_out: np.ndarray  # q departures: sum_d v[i,k,n,d]
    proc_gain: np.ndarray  # q gain: p[i,k',n] e[k',n] with k' the predecessor of k


def flows(d: Decision, net: Network) -> Flows:
    pe = d.p * d.e[None, :, :]
    u_out = d.u.sum(axis=3)
    q_in = d.u.sum(axis=2) + d.v.sum(axis=2)
    v_out = d.v.sum(axis=3)
    gain = np.zeros(net.shape)
    ii, kk = np.nonzero(net.valid_q)
    gain[ii, kk] = pe[ii, net.prv[ii, kk]]
    return Flows(u_out + pe, q_in, v_out, gain)


def step_queues(state: QueueState, d: Decision, s: StateSample, net: Network,
                check=True) -> tuple[QueueState, bool]:
    """Advance one slot; returns the new state and whether any max{., 0} truncated.

    Structurally absent q entries (first VNF of a chain, VNFs outside it) stay
    zero: processing at a chain's last VNF leaves the platform.
    """
    if check:
        bad = feasibility_check(d, net.topo)
        if bad:
            raise ValueError(f"infeasible decision: {bad[0]}")
    f = flows(d, net)
    drained_Q = state.Q - f.q_out
    drained_q = state.q - f.v_out
    truncated = bool(np.any(drained_Q < 0) or np.any(drained_q < 0))
    Q = np.maximum(drained_Q, 0.0) + f.q_in + s.R
    q = np.where(net.valid_q[:, :, None], np.maximum(drained_q, 0.0) + f.proc_gain, 0.0)
    return QueueState(Q, q), truncated


@dataclass(frozen=True)
class Violation:
    kind: str
    where: tuple
    detail: str

    def __str__(self):
        return f"{self.kind} at {self.where}: {self.detail}"


def feasibility_check(d: Decision, topo: Topology, tol=1e-9) -> list[Violation]:
    """Every breach of the placement, single-service and capacity constraints. Empty means ok."""
    out = []
    K, N = d.e.shape
    col = d.e.sum(axis=0)
    for n in np.nonzero((col != 1) | np.any((d.e != 0) & (d.e != 1), axis=0))[0]:
        out.append(Violation("placement", (int(n),), f"sum_k e[k,{n}] = {col[n]}"))
    for name, arr in (("p", d.p), ("u", d.u), ("v", d.v)):
        for idx in zip(*np.nonzero(arr < 0)):
            out.append(Violation("negative_rate", (name, *map(int, idx)), f"{arr[idx]}"))
    for n in range(N):
        active = d.p[:, :, n] > 0
        off = active & (d.e[None, :, n] == 0)
        for i, k in zip(*np.nonzero(off)):
            out.append(Violation("uninstalled", (int(i), int(k), n), f"p > 0 but VNF {k} not installed"))
        if active.sum() > 1:
            out.append(Violation("multi_process", (n,), f"{int(active.sum())} processing entries"))
        total = d.p[:, :, n][active].sum()
        if total > topo.p_max[n] + tol:
            out.append(Violation("processing_capacity", (n,), f"{total} > p_max {topo.p_max[n]}"))
    ru = d.u > 0
    rv = d.v > 0
    count = ru.sum(axis=(0, 1)) + rv.sum(axis=(0, 1))
    load = d.u.sum(axis=(0, 1)) + d.v.sum(axis=(0, 1))
    for a, b in zip(*np.nonzero(count > 0)):
        a, b = int(a), int(b)
        if not topo.links[a, b]:
            out.append(Violation("no_link", (a, b), "rate on a missing link"))
            continue
        if count[a, b] > 1:
            out.append(Violation("multi_route", (a, b), f"{int(count[a, b])} services share the link"))
        if load[a, b] > topo.l_max[a, b] + tol:
            out.append(Violation("link_capacity", (a, b), f"{load[a, b]} > l_max {topo.l_max[a, b]}"))
    return out


def slot_cost(d: Decision, s: StateSample) -> float:
    pe = d.p * d.e[None, :, :]
    proc = float(np.sum(s.alpha[None, None, :] * pe**2))
    route = float(np.sum(s.beta[None, None, :, :] * (d.u**2 + d.v**2)))
    return proc + route


def total_backlog(state: QueueState) -> float:
    return float(state.Q.sum() + state.q.sum())
