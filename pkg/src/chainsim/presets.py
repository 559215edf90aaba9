"""Experiment presets and parameter sweeps, written out as CSV.

Every preset fans out independent runs (one trace CSV each) and finishes with a
single ``summary.csv``. Runs are parallel across processes, capped by the
``CHAINSIM_THREADS`` environment variable.
"""
from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .bounds import verify_lemma1
from .config import Experiment
from .engine import fmt, run, steady_state_stats, write_trace_csv
from .model import uniform_from_moments

POLICY_ORDER = ("alg1", "alg2", "heu")
DEFAULT_SEEDS = (1, 2, 3, 4, 5)
EPSILON_GRID = (0.01, 0.05, 0.1, 0.5)
VARIANCE_GRID = (3.3e-5, 1e-3, 5e-3, 2e-2, 5e-2, 8.3e-2)
SIZE_GRID = (5, 7, 9, 11)
ARRIVAL_GRID = (14.0, 28.0)

SUMMARY_HEADER = ("preset", "policy", "seed", "epsilon", "price_variance", "n_vms", "arrival_mean",
                  "mean_cost", "mean_backlog", "mean_proc_rate", "mean_route_rate", "final_avg_cost",
                  "lemma1_violations", "trace_file")


@dataclass(frozen=True)
class Job:
    preset: str
    exp: Experiment
    overrides: dict = field(default_factory=dict)
    price_variance: float | None = None

    def name(self) -> str:
        cfg = self.exp.with_overrides(**self.overrides).cfg
        parts = [cfg.policy, f"eps{cfg.epsilon:g}"]
        if self.price_variance is not None:
            parts.append(f"var{self.price_variance:g}")
        parts += [f"n{self.exp.n_vms}", f"arr{cfg.arrival_mean:g}", f"seed{cfg.seed}"]
        return "_".join(parts)


def _execute(job: Job, out_dir: str) -> dict:
    sc = job.exp.scenario(**job.overrides)
    tr = run(sc)
    path = Path(out_dir) / f"{job.name()}.csv"
    write_trace_csv(tr, path)
    cfg = sc.cfg
    row = {"preset": job.preset, "policy": cfg.policy, "seed": cfg.seed, "epsilon": cfg.epsilon,
           "price_variance": job.price_variance if job.price_variance is not None else "",
           "n_vms": sc.net.n_vms, "arrival_mean": cfg.arrival_mean, "trace_file": path.name}
    if len(tr):
        ss = steady_state_stats(tr)
        rq, rqq = verify_lemma1(tr, sc.net)
        row.update(mean_cost=ss.mean_cost, mean_backlog=ss.mean_backlog, mean_proc_rate=ss.mean_proc_rate,
                   mean_route_rate=ss.mean_route_rate, final_avg_cost=float(tr.avg_cost[-1]),
                   lemma1_violations=rq.violations + rqq.violations)
    else:
        row.update(mean_cost="", mean_backlog="", mean_proc_rate="", mean_route_rate="",
                   final_avg_cost="", lemma1_violations=0)
    return row


def worker_count() -> int:
    env = os.environ.get("CHAINSIM_THREADS")
    n = os.cpu_count() or 1
    if env:
        try:
            n = max(1, min(n, int(env)))
        except ValueError:
            pass
    return n


def run_jobs(jobs, out_dir) -> list[dict]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    workers = min(worker_count(), len(jobs)) or 1
    if workers == 1:
        rows = [_execute(j, str(out)) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_execute, jobs, [str(out)] * len(jobs)))
    write_summary(rows, out / "summary.csv")
    return rows


def write_summary(rows, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for r in rows:
            w.writerow([fmt(r[h]) if isinstance(r[h], float) else r[h] for h in SUMMARY_HEADER])
    return path


def fig3_jobs(exp: Experiment, seeds=DEFAULT_SEEDS, policies=POLICY_ORDER):
    return [Job("fig3_time", exp, {"policy": p, "seed": s}) for s in seeds for p in policies]


def fig4_jobs(exp: Experiment, epsilons=EPSILON_GRID, policies=POLICY_ORDER):
    return [Job("fig4_epsilon", exp, {"policy": p, "epsilon": e}) for e in epsilons for p in policies]


def variance_jobs(exp: Experiment, preset="fig5_price_variance", variances=VARIANCE_GRID,
                  policies=POLICY_ORDER):
    mean = exp.cfg.price_mean
    jobs = []
    for var in variances:
        lo, hi = uniform_from_moments(mean, var)
        for p in policies:
            jobs.append(Job(preset, exp, {"policy": p, "price_lo": lo, "price_hi": hi}, var))
    return jobs


def size_jobs(exp: Experiment, preset="fig7_cost_size", sizes=SIZE_GRID, arrivals=ARRIVAL_GRID,
              policies=POLICY_ORDER):
    from dataclasses import replace

    jobs = []
    for n in sizes:
        sized = replace(exp, n_vms=n, links=None, host_of=None)
        for a in arrivals:
            for p in policies:
                jobs.append(Job(preset, sized, {"policy": p, "arrival_mean": a}))
    return jobs


def price_variance_sweep(exp: Experiment, out_dir, variances=VARIANCE_GRID, policies=POLICY_ORDER,
                         preset="fig5_price_variance") -> list[dict]:
    """Steady-state cost, backlog and mean processing/routing rates per price variance and policy."""
    return run_jobs(variance_jobs(exp, preset, variances, policies), out_dir)


PRESETS = {
    "fig3_time": fig3_jobs,
    "fig4_epsilon": fig4_jobs,
    "fig5_price_variance": lambda exp: variance_jobs(exp, "fig5_price_variance"),
    "fig6_rates": lambda exp: variance_jobs(exp, "fig6_rates"),
    "fig7_cost_size": lambda exp: size_jobs(exp, "fig7_cost_size"),
    "fig8_queue_size": lambda exp: size_jobs(exp, "fig8_queue_size"),
}


def run_preset(name: str, exp: Experiment, out_dir) -> list[dict]:
    if name not in PRESETS:
        raise KeyError(name)
    return run_jobs(PRESETS[name](exp), out_dir)
