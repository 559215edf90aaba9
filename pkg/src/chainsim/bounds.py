"""Performance-bound constants as computable quantities, and trace-level checks of the bounds."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .engine import Trace, fmt, steady_state_stats
from .model import Network, SimConfig, Topology


def b_formula(n_max, l_max, r_max, p_max):
    """Cost-gap constant B = 9/2 (N l)^2 + 3/2 (R^2 + p^2)."""
    nl = n_max * l_max
    return 4.5 * nl**2 + 1.5 * (r_max**2 + p_max**2)


def b_decomposition(n_max, l_max, r_max, p_max):
    """(B1, B2) from the separate Q- and q-queue drift bounds; B1 + B2 == B."""
    nl = n_max * l_max
    b1 = (8 * nl**2 + 3 * r_max**2 + 2 * p_max**2) / 2
    b2 = (nl**2 + p_max**2) / 2
    return b1, b2


def constant_B(topo: Topology, r_max: float) -> float:
    return b_formula(topo.degree_max, float(topo.l_max.max()), r_max, float(topo.p_max.max()))


def omega_formula(n_max, l_max, r_max, p_max):
    nl = n_max * l_max
    return max(nl + p_max, 2 * nl + r_max), max(nl, p_max)


def omega_constants(topo: Topology, r_max: float) -> tuple[float, float]:
    """Per-slot change bounds (omega_Q, omega_q) of a single Q and q entry."""
    return omega_formula(topo.degree_max, float(topo.l_max.max()), r_max, float(topo.p_max.max()))


def constant_C(epsilon, t_delta, n_vms, n_types, n_vnfs, alpha_max, beta_max, omega_Q, omega_q):
    """Two-timescale placement loss constant, including its leading epsilon."""
    bracket = ((1 / (2 * alpha_max) + 1 / (2 * beta_max)) * (omega_Q + omega_q) ** 2
               + (2 / beta_max) * omega_Q**2)
    return epsilon * t_delta**2 * n_vms**2 * n_types * n_vnfs * bracket


def network_constants(cfg: SimConfig, net: Network) -> dict:
    """B, omega_Q, omega_q and C for a configured network; price maxima are the distribution tops."""
    r_max = cfg.arrival_max(net.n_types)
    w_Q, w_q = omega_constants(net.topo, r_max)
    C = constant_C(cfg.epsilon, cfg.t_delta, net.n_vms, net.n_types, net.n_vnfs,
                   cfg.price_hi, cfg.price_hi, w_Q, w_q)
    return {"B": constant_B(net.topo, r_max), "omega_Q": w_Q, "omega_q": w_q, "C": C,
            "N_max": net.topo.degree_max, "l_max": float(net.topo.l_max.max()),
            "p_max": float(net.topo.p_max.max()), "R_max": r_max}


@dataclass(frozen=True)
class BoundReport:
    name: str
    constant: float
    slack: np.ndarray  # bound minus observed, per slot
    violations: int
    max_ratio: float  # max observed / bound

    def row(self) -> dict:
        return {"bound": self.name, "constant": self.constant, "violations": self.violations,
                "min_slack": float(self.slack.min()) if len(self.slack) else float("nan"),
                "max_ratio": self.max_ratio}


def _report(name, bound, observed):
    slack = bound - observed
    ratio = float(observed.max() / bound) if len(observed) and bound > 0 else 0.0
    return BoundReport(name, bound, slack, int(np.count_nonzero(observed > bound)), ratio)


def verify_lemma1(trace: Trace, net: Network) -> tuple[BoundReport, BoundReport]:
    """Check |Q(t) - Q(tau)| <= T_delta * omega_Q and the q analogue on every slot."""
    cfg = trace.cfg
    w_Q, w_q = omega_constants(net.topo, cfg.arrival_max(net.n_types))
    return (_report("lemma1_Q", cfg.t_delta * w_Q, trace.dev_Q),
            _report("lemma1_q", cfg.t_delta * w_q, trace.dev_q))


@dataclass(frozen=True)
class TradeoffRow:
    epsilon: float
    mean_cost: float
    mean_backlog: float

    @property
    def scaled_backlog(self) -> float:
        return self.epsilon * self.mean_backlog


@dataclass(frozen=True)
class TradeoffReport:
    rows: tuple[TradeoffRow, ...]
    cost_inversions: tuple[tuple[float, float, float], ...]  # (eps_a, eps_b, relative drop)
    backlog_inversions: tuple[tuple[float, float, float], ...]  # (eps_a, eps_b, relative rise)

    @property
    def monotone(self) -> bool:
        return not self.cost_inversions and not self.backlog_inversions

    @property
    def scaled_backlog_spread(self) -> float:
        """max/min of epsilon * backlog over the sweep; stays O(1) when backlog is O(1/epsilon)."""
        prods = [r.scaled_backlog for r in self.rows]
        return max(prods) / min(prods) if min(prods) > 0 else float("inf")


def tradeoff_report(runs, tail_fraction=None) -> TradeoffReport:
    """Steady-state cost and backlog per epsilon, with the pairs that break the expected trend.

    ``runs`` is a mapping or iterable of (epsilon, trace). Cost should not fall
    and backlog should not rise as epsilon grows.
    """
    items = list(runs.items()) if isinstance(runs, dict) else list(runs)
    if len(items) < 2:
        raise ValueError("a tradeoff report needs at least two runs")
    rows = []
    for eps, tr in sorted(items, key=lambda x: x[0]):
        ss = steady_state_stats(tr, tail_fraction)
        rows.append(TradeoffRow(float(eps), ss.mean_cost, ss.mean_backlog))
    cost_inv, back_inv = [], []
    for a, b in zip(rows, rows[1:]):
        if b.mean_cost < a.mean_cost:
            cost_inv.append((a.epsilon, b.epsilon, (a.mean_cost - b.mean_cost) / a.mean_cost))
        if b.mean_backlog > a.mean_backlog:
            back_inv.append((a.epsilon, b.epsilon, (b.mean_backlog - a.mean_backlog) / a.mean_backlog))
    return TradeoffReport(tuple(rows), tuple(cost_inv), tuple(back_inv))


BOUND_HEADER = ("bound", "constant", "violations", "min_slack", "max_ratio", "policy", "epsilon", "seed")


def write_bound_csv(reports, cfg: SimConfig, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BOUND_HEADER)
        for rep in reports:
            r = rep.row()
            w.writerow([r["bound"], fmt(float(r["constant"])), r["violations"], fmt(r["min_slack"]),
                        fmt(r["max_ratio"]), cfg.policy, fmt(float(cfg.epsilon)), cfg.seed])
    return path
