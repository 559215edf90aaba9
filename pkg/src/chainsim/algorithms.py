"""Per-slot policies: queue-driven (alg1), learn-and-adapt (alg2) and mean-price heuristic (heu)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .dual_core import MultiplierView
from .dynamics import Decision, QueueState, flows
from .model import Network, SimConfig, StateSample


@dataclass(frozen=True)
class PlacementHold:
    place: np.ndarray  # (N,) installed VNF per VM
    valid_until: int  # first slot no longer covered

    def covers(self, t: int) -> bool:
        return t < self.valid_until


@dataclass(frozen=True)
class LearnState:
    """Empirical duals and the slot counter driving the 1/sqrt(t) step."""

    lam: MultiplierView
    t: int = 1

    @classmethod
    def zeros(cls, net: Network) -> "LearnState":
        return cls(MultiplierView(np.zeros(net.shape), np.zeros(net.shape)), 1)


def _mean_prices(s: StateSample, net: Network, cfg: SimConfig) -> tuple[np.ndarray, np.ndarray]:
    alpha = np.full_like(s.alpha, cfg.price_mean)
    beta = np.where(net.beta_fixed, cfg.beta_floor, cfg.price_mean)
    return alpha, beta


def _caps(net: Network, state: QueueState | None, strict: bool):
    if strict and state is not None:
        return state.Q, state.q
    inf = np.full(net.shape, np.inf)
    return inf, inf


def select_placement(view: MultiplierView, alpha, net: Network, epsilon: float,
                     state: QueueState | None = None, strict=False, backend=None) -> np.ndarray:
    place_fn, _ = kernels.get_backend(backend)
    cap_Q, _ = _caps(net, state, strict)
    return place_fn(view.m1, view.m2, alpha, net.topo.p_max, net.nxt, net.valid_Q, float(epsilon), cap_Q)


def decide(view: MultiplierView, alpha, beta, net: Network, epsilon: float, place=None,
           state: QueueState | None = None, strict=False, backend=None) -> Decision:
    """Placement (unless given) then greedy scheduling at every VM, all on one snapshot."""
    place_fn, decide_fn = kernels.get_backend(backend)
    cap_Q, cap_q = _caps(net, state, strict)
    topo = net.topo
    if place is None:
        place = place_fn(view.m1, view.m2, alpha, topo.p_max, net.nxt, net.valid_Q, float(epsilon), cap_Q)
    place = np.asarray(place, dtype=np.int64)
    p, u, v = decide_fn(view.m1, view.m2, alpha, beta, topo.p_max, topo.l_max, topo.links,
                        net.nxt, net.valid_Q, net.valid_q, place, float(epsilon), cap_Q, cap_q)
    e = np.zeros((net.n_vnfs, net.n_vms), dtype=np.int8)
    e[place, np.arange(net.n_vms)] = 1
    return Decision(e, p, u, v)


def _held(hold: PlacementHold | None, t: int | None):
    if hold is None or (t is not None and not hold.covers(t)):
        return None
    return hold.place


def alg1_decide(net: Network, state: QueueState, s: StateSample, cfg: SimConfig,
                hold: PlacementHold | None = None, t: int | None = None, backend=None) -> Decision:
    view = MultiplierView.from_queues(state, cfg.epsilon)
    return decide(view, s.alpha, s.beta, net, cfg.epsilon, _held(hold, t), state, cfg.strict, backend)


def heu_decide(net: Network, state: QueueState, s: StateSample, cfg: SimConfig,
               hold: PlacementHold | None = None, t: int | None = None, backend=None) -> Decision:
    """alg1 with every price replaced by its distribution mean."""
    view = MultiplierView.from_queues(state, cfg.epsilon)
    alpha, beta = _mean_prices(s, net, cfg)
    return decide(view, alpha, beta, net, cfg.epsilon, _held(hold, t), state, cfg.strict, backend)


def twoscale_place(net: Network, state: QueueState, s: StateSample, cfg: SimConfig, tau: int,
                   view: MultiplierView | None = None, mean_prices=False, backend=None) -> PlacementHold:
    """Placement from the slot-tau snapshot, held for t_delta slots."""
    if tau % cfg.t_delta:
        raise ValueError(f"slot {tau} is not a placement boundary for t_delta={cfg.t_delta}")
    if view is None:
        view = MultiplierView.from_queues(state, cfg.epsilon)
    alpha = _mean_prices(s, net, cfg)[0] if mean_prices else s.alpha
    place = select_placement(view, alpha, net, cfg.epsilon, state, cfg.strict, backend)
    return PlacementHold(place, tau + cfg.t_delta)


def effective_multiplier(learn: LearnState, state: QueueState, cfg: SimConfig, net: Network) -> MultiplierView:
    """lambda_hat + eps * A - theta on every structurally present queue; zero elsewhere."""
    theta = cfg.theta_value
    m1 = learn.lam.m1 + cfg.epsilon * state.Q - theta
    m2 = learn.lam.m2 + cfg.epsilon * state.q - theta
    m1 = np.where(net.valid_Q[:, :, None], m1, 0.0)
    m2 = np.where(net.valid_q[:, :, None], m2, 0.0)
    return MultiplierView(m1, m2)


def alg2_decide(net: Network, state: QueueState, learn: LearnState, s: StateSample, cfg: SimConfig,
                hold: PlacementHold | None = None, t: int | None = None,
                backend=None) -> tuple[Decision, Decision]:
    """(real, virtual) decisions. Only the real one touches the queues.

    The virtual pass minimizes the slot Lagrangian at the empirical duals,
    placement included, so it never uses the two-timescale hold.
    """
    gamma = effective_multiplier(learn, state, cfg, net)
    real = decide(gamma, s.alpha, s.beta, net, cfg.epsilon, _held(hold, t), state, cfg.strict, backend)
    virtual = decide(learn.lam, s.alpha, s.beta, net, cfg.epsilon, None, None, False, backend)
    return real, virtual


def alg2_update(learn: LearnState, virtual: Decision, s: StateSample, net: Network) -> LearnState:
    """Projected ascent on the empirical duals with step 1/sqrt(t), driven by the virtual flows."""
    eta = 1.0 / math.sqrt(learn.t)
    f = flows(virtual, net)
    m1 = np.maximum(learn.lam.m1 + eta * (f.q_in + s.R - f.q_out), 0.0)
    m2 = np.maximum(learn.lam.m2 + eta * (f.proc_gain - f.v_out), 0.0)
    m1 = np.where(net.valid_Q[:, :, None], m1, 0.0)
    m2 = np.where(net.valid_q[:, :, None], m2, 0.0)
    return LearnState(MultiplierView(m1, m2), learn.t + 1)
