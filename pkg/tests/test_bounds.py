import csv

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chainsim.bounds import (BOUND_HEADER, b_decomposition, b_formula, constant_B, constant_C,
                             network_constants, omega_constants, omega_formula, tradeoff_report,
                             verify_lemma1, write_bound_csv)
from chainsim.engine import run
from chainsim.model import SimConfig, Topology, complete_links, default_scenario


def _unit_topo(n):
    links = complete_links(n)
    return Topology(n, links, np.ones(n), links.astype(float))


def test_toy_constants():
    topo = _unit_topo(3)  # N_max = 2, unit capacities
    assert constant_B(topo, r_max=1.0) == pytest.approx(21.0)
    assert omega_constants(topo, r_max=1.0) == (5.0, 2.0)
    b1, b2 = b_decomposition(2, 1, 1, 1)
    assert (b1, b2) == (18.5, 2.5)


def test_constant_C_hand_value():
    C = constant_C(0.1, 2, 2, 1, 1, 1.0, 1.0, 5.0, 2.0)
    assert C == pytest.approx(158.4, rel=1e-12)
    assert constant_C(0.1, 0, 2, 1, 1, 1.0, 1.0, 5.0, 2.0) == 0.0
    assert constant_C(0.1, 6, 2, 1, 1, 1.0, 1.0, 5.0, 2.0) == pytest.approx(9 * C)


@given(st.integers(1, 60), st.floats(0.01, 1e3), st.floats(0, 1e3), st.floats(0.01, 1e3))
def test_B_decomposition_identity(n, l, r, p):
    b1, b2 = b_decomposition(n, l, r, p)
    assert b_formula(n, l, r, p) == pytest.approx(b1 + b2, rel=1e-12)


@given(st.integers(1, 60), st.floats(0.01, 1e3), st.floats(0, 1e3), st.floats(0.01, 1e3))
def test_omega_dominates_each_term(n, l, r, p):
    wQ, wq = omega_formula(n, l, r, p)
    assert wQ >= n * l + p and wQ >= 2 * n * l + r
    assert wq >= n * l and wq >= p


def test_network_constants_default():
    sc = default_scenario(SimConfig())
    c = network_constants(sc.cfg, sc.net)
    assert c["N_max"] == 6 and c["R_max"] == 14.0
    assert c["B"] == pytest.approx(b_formula(6, c["l_max"], 14.0, c["p_max"]))
    assert c["C"] > 0


@pytest.mark.parametrize("policy", ["alg1", "alg2", "heu"])
def test_lemma1_holds_on_short_runs(policy):
    sc = default_scenario(SimConfig(horizon=400, policy=policy, seed=2))
    tr = run(sc)
    rq, rqq = verify_lemma1(tr, sc.net)
    assert rq.violations == 0 and rqq.violations == 0
    assert 0 < rq.max_ratio < 1
    assert rq.constant == sc.cfg.t_delta * omega_constants(sc.net.topo, 14.0)[0]


def test_lemma1_counts_violations():
    sc = default_scenario(SimConfig(horizon=50, seed=2))
    tr = run(sc)
    tr.dev_Q[7] = 1e9
    rq, _ = verify_lemma1(tr, sc.net)
    assert rq.violations == 1 and rq.slack[7] < 0


def test_tradeoff_report_and_csv(tmp_path):
    runs = {e: run(default_scenario(SimConfig(horizon=600, epsilon=e, seed=1))) for e in (0.05, 0.5)}
    rep = tradeoff_report(runs)
    assert [r.epsilon for r in rep.rows] == [0.05, 0.5]
    assert rep.rows[0].mean_backlog > rep.rows[1].mean_backlog
    assert rep.monotone
    # backlog shrinks roughly like 1/epsilon: a 10x step in epsilon keeps eps*backlog within 3x
    assert 1 <= rep.scaled_backlog_spread < 3
    with pytest.raises(ValueError):
        tradeoff_report({0.1: runs[0.05]})
    sc = default_scenario(SimConfig(horizon=50))
    path = write_bound_csv(verify_lemma1(run(sc), sc.net), sc.cfg, tmp_path / "b.csv")
    rows = list(csv.reader(path.open()))
    assert tuple(rows[0]) == BOUND_HEADER and [r[0] for r in rows[1:]] == ["lemma1_Q", "lemma1_q"]
