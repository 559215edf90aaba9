"""Command-line front end.

    chainsim run      [--config F] [--out DIR] [--policy P] [--epsilon E] ...
    chainsim preset   NAME [--config F] [--out DIR] [--horizon T]
    chainsim bounds   [--config F]
    chainsim validate [--config F] [--horizon T]

Exit codes: 0 ok, 1 usage error, 2 bad config, 3 invariant violation.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .bounds import network_constants, verify_lemma1, write_bound_csv
from .config import Experiment, default_experiment, load_config
from .dynamics import feasibility_check
from .engine import run, steady_state_stats, write_trace_csv
from .model import POLICIES, ConfigError
from .presets import PRESETS, run_preset

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_INVARIANT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="chainsim", description="Online placement/processing/routing of chained VNFs.")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    def common(p, horizon_default=None):
        p.add_argument("--config", help="config file (default: built-in 7-VM setup)")
        p.add_argument("--seed", type=int)
        p.add_argument("--epsilon", type=float)
        p.add_argument("--horizon", type=int, default=horizon_default)
        p.add_argument("--t-delta", type=int, dest="t_delta")

    p = sub.add_parser("run", help="one simulation; writes a trace CSV")
    common(p)
    p.add_argument("--policy", choices=POLICIES)
    p.add_argument("--placement-mode", choices=("per_slot", "two_timescale"), dest="placement_mode")
    p.add_argument("--out", default="results", help="output directory")

    p = sub.add_parser("preset", help="a named experiment sweep")
    p.add_argument("name", choices=sorted(PRESETS))
    common(p)
    p.add_argument("--out", default=None, help="output directory (default results/<name>)")

    p = sub.add_parser("bounds", help="print B, omega_Q, omega_q and C")
    common(p)

    p = sub.add_parser("validate", help="short runs of every policy with invariant checks")
    common(p, horizon_default=1000)
    p.add_argument("--out", default=None, help="optional directory for bound CSVs")
    return ap


def _experiment(args) -> Experiment:
    exp = load_config(args.config) if args.config else default_experiment()
    over = {k: getattr(args, k) for k in ("seed", "epsilon", "horizon", "t_delta", "policy", "placement_mode")
            if getattr(args, k, None) is not None}
    return exp.with_overrides(**over) if over else exp


def cmd_run(args) -> int:
    exp = _experiment(args)
    sc = exp.scenario()
    tr = run(sc)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = sc.cfg
    path = write_trace_csv(tr, out / f"{cfg.policy}_eps{cfg.epsilon:g}_seed{cfg.seed}.csv")
    if len(tr):
        ss = steady_state_stats(tr)
        print(f"{cfg.policy} eps={cfg.epsilon:g} seed={cfg.seed} T={len(tr)}: "
              f"avg cost {tr.avg_cost[-1]:.4f}, steady cost {ss.mean_cost:.4f}, "
              f"steady backlog {ss.mean_backlog:.2f}")
    else:
        print(f"{cfg.policy}: empty horizon")
    print(f"trace -> {path}")
    return EXIT_OK


def cmd_preset(args) -> int:
    exp = _experiment(args)
    out = Path(args.out or Path("results") / args.name)
    rows = run_preset(args.name, exp, out)
    print(f"{args.name}: {len(rows)} runs -> {out / 'summary.csv'}")
    return EXIT_OK


def cmd_bounds(args) -> int:
    sc = _experiment(args).scenario()
    c = network_constants(sc.cfg, sc.net)
    v = {k: float(f"{x:.9g}") for k, x in c.items()}
    print(f"N_max={c['N_max']} l_max={v['l_max']} p_max={v['p_max']} R_max={v['R_max']}")
    print(f"B={v['B']}")
    print(f"omega_Q={v['omega_Q']:g} omega_q={v['omega_q']:g}")
    print(f"C={v['C']}")
    return EXIT_OK


def _check_run(sc, problems):
    tr = run(sc, history=True)
    cfg = sc.cfg
    tag = f"{cfg.policy}"
    for rec in tr.history:
        bad = feasibility_check(rec.decision, sc.net.topo)
        if bad:
            problems.append(f"{tag}: slot {rec.t} infeasible: {bad[0].kind} at {bad[0].where}")
            break
        if rec.state.Q.min() < 0 or rec.state.q.min() < 0:
            problems.append(f"{tag}: slot {rec.t} has a negative queue")
            break
    fs = tr.final_state
    if fs is not None and (fs.Q.min() < 0 or fs.q.min() < 0):
        problems.append(f"{tag}: final state has a negative queue")
    if len(tr) and not np.allclose(tr.avg_cost * tr.t, np.cumsum(tr.cost), rtol=1e-9):
        problems.append(f"{tag}: running average is inconsistent with per-slot cost")
    reports = verify_lemma1(tr, sc.net)
    for rep in reports:
        if rep.violations:
            problems.append(f"{tag}: {rep.name} violated on {rep.violations} slots")
    return tr, reports


def cmd_validate(args) -> int:
    exp = _experiment(args)
    problems = []
    for policy in POLICIES:
        sc = exp.scenario(policy=policy)
        before = len(problems)
        _, reports = _check_run(sc, problems)
        if args.out:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            write_bound_csv(reports, sc.cfg, out / f"bounds_{policy}.csv")
        status = "ok" if len(problems) == before else "FAIL"
        ratio = max(r.max_ratio for r in reports)
        print(f"{policy}: {status} ({sc.cfg.horizon} slots, window-bound max ratio {ratio:.3f})")
    for msg in problems:
        print(msg, file=sys.stderr)
    return EXIT_INVARIANT if problems else EXIT_OK


COMMANDS = {"run": cmd_run, "preset": cmd_preset, "bounds": cmd_bounds, "validate": cmd_validate}


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
        if args.command is None:
            raise UsageError(ap.format_usage().strip())
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
