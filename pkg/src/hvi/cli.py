"""Command line entry point ``hvi``.

::

    hvi run|sweep|compare|check CONFIG [--out DIR] [--k N] [--delta X] [--seed S]

Exit codes: 0 success, 1 a check failed, 2 the iteration diverged,
3 configuration error. ``HVI_LOG`` sets the log level (default WARNING).
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import math
import os
import sys

import numpy as np

from .checks import run_check_suite
from .config import Config, load_config
from .errors import ConfigError, DimensionError, DivergenceError, DomainError, NonFiniteError
from .gaps import rate_slope
from .io import write_report, write_sweep_csv, write_trace_csv
from .problems import ave_residual
from .schedules import check_ac_sufficient
from .solvers import run

log = logging.getLogger("hvi")

EXIT_OK, EXIT_CHECK, EXIT_DIVERGED, EXIT_CONFIG = 0, 1, 2, 3
COMPARE_VARIANTS = ("oeg", "tseng", "korpelevich")


def _setup_logging():
    level = os.environ.get("HVI_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def _apply_overrides(cfg: Config, args, allow_many_deltas=False):
    updates = {}
    if args.k is not None:
        updates["K"] = args.k
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.out is not None:
        updates["out_dir"] = args.out
    if args.delta:
        if len(args.delta) > 1 and not allow_many_deltas:
            raise ConfigError("--delta given more than once; use 'hvi sweep' for several values")
        if allow_many_deltas:
            updates["deltas"] = tuple(args.delta)
        else:
            updates["schedule"] = dataclasses.replace(cfg.schedule, delta=args.delta[0])
    return dataclasses.replace(cfg, **updates) if updates else cfg


def _out_path(cfg, name):
    path = cfg.out_dir if os.path.isabs(cfg.out_dir) else os.path.join(os.getcwd(), cfg.out_dir)
    os.makedirs(path, exist_ok=True)
    return os.path.join(path, name)


def _slope_range(K):
    return (max(1.0, K / 100.0), float(K))


def _flags(cfg, problem, delta):
    flags = {"limiting_case": cfg.schedule.step_mode == "constant_monotone" and delta == 1.0}
    if problem.weak_sharp is not None:
        flags["ac_sufficient"] = check_ac_sufficient(delta, problem.weak_sharp[1])
    else:
        flags["ac_sufficient"] = "unknown"
    return flags


def summarize(trace, problem, cfg):
    """Report sections of one run; every number comes from the trace."""
    K = trace.iterations
    res = {"iterations": K, "stopped": trace.stopped, "wall_time": round(trace.wall_time, 4)}
    res["z"] = trace.z
    res["z_bar"] = trace.z_bar
    if trace.rows:
        last = trace.rows[-1]
        for key in ("dist", "feas_gap", "opt_gap", "step_norm", "sigma", "t"):
            v = getattr(last, key)
            if not (isinstance(v, float) and math.isnan(v)):
                res[key if key != "dist" else "dist_truth_avg"] = v
        rng = _slope_range(K)
        ks = trace.column("k")
        for key in ("feas_gap", "opt_gap"):
            col = trace.column(key)
            if np.any(np.isfinite(col)):
                res[key.split("_")[0] + "_slope"] = rate_slope(np.abs(col), ks, rng)
    if problem.solution is not None:
        res["dist_truth_last"] = float(np.linalg.norm(trace.z - problem.solution))
    if problem.lower_set is not None:
        res["dist_lower_last"] = problem.lower_set.distance(trace.z)
    if not math.isnan(trace.max_resid):
        res["energy_max_resid"] = trace.max_resid
        res["energy_E1"] = trace.energy_E1
    ev = trace.evals
    sections = {
        "result": res,
        "evals": {"F1": ev.F1, "F2": ev.F2, "prox": ev.prox, "init_F1": ev.init_F1, "init_F2": ev.init_F2},
        "flags": _flags(cfg, problem, trace.params.delta),
    }
    if problem.readout is not None and K > 0:
        u = problem.readout(trace.z, trace.schedule.sigma)
        ro = {"u": u}
        notes = problem.notes
        if "A" in notes:
            ro["ave_residual"] = ave_residual(notes["A"], notes["b"], u, notes.get("B"))
        if "oracle" in notes:
            ro["oracle_max_dev"] = float(np.max(np.abs(u - notes["oracle"])))
        if "analytic" in notes:
            ro["analytic_max_dev"] = float(np.max(np.abs(u - notes["analytic"])))
        sections["readout"] = ro
    return sections


def cmd_run(cfg: Config):
    problem = cfg.build_problem()
    trace = run(problem, cfg.solver_config(problem))
    write_trace_csv(_out_path(cfg, cfg.trace_name), trace)
    sections = summarize(trace, problem, cfg)
    report = _out_path(cfg, cfg.report_name)
    write_report(report, cfg, sections)
    res = sections["result"]
    print("%s/%s: %d iterations, %.2fs" % (problem.name, cfg.variant, trace.iterations, trace.wall_time))
    for key in ("dist_truth_avg", "dist_lower_last", "feas_gap", "opt_gap"):
        if key in res:
            print("  %s = %.6g" % (key, res[key]))
    print("report: %s" % report)
    return EXIT_OK


def cmd_sweep(cfg: Config):
    deltas = cfg.deltas or (cfg.schedule.delta,)
    if len(deltas) == 1:
        return cmd_run(dataclasses.replace(cfg, schedule=dataclasses.replace(cfg.schedule, delta=deltas[0]), deltas=None))
    problem = cfg.build_problem()
    runs, sections = [], {}
    rng = _slope_range(cfg.K)
    for d in deltas:
        sched = dataclasses.replace(cfg.schedule, delta=d)
        trace = run(problem, cfg.solver_config(problem, schedule=sched))
        runs.append((d, trace))
        ks = trace.column("k")
        row = {
            "feas_slope": rate_slope(np.abs(trace.column("feas_gap")), ks, rng),
            "opt_slope": rate_slope(np.abs(trace.column("opt_gap")), ks, rng),
        }
        row.update(_flags(cfg, problem, d))
        if trace.rows and not math.isnan(trace.rows[-1].dist):
            row["dist_truth_avg"] = trace.rows[-1].dist
        sections["delta %s" % d] = row
        print("delta=%-6g feas_slope=%8.4f opt_slope=%8.4f%s" % (d, row["feas_slope"], row["opt_slope"], "  [limiting case]" if row["limiting_case"] else ""))
    order = sorted(runs, key=lambda r: r[0])
    fs = [sections["delta %s" % d]["feas_slope"] for d, _ in order]
    sections["summary"] = {"feas_slope_steeper_in_delta": all(b < a for a, b in zip(fs, fs[1:]))}
    write_sweep_csv(_out_path(cfg, "sweep.csv"), runs, problem.name)
    write_report(_out_path(cfg, cfg.report_name), cfg, sections)
    return EXIT_OK


def cmd_compare(cfg: Config):
    problem = cfg.build_problem()
    results = []
    for v in COMPARE_VARIANTS:
        trace = run(problem, cfg.solver_config(problem, variant=v, z_ref=None))
        results.append((v, trace))
    results.sort(key=lambda r: r[1].wall_time)
    sections = {}
    for v, tr in results:
        ev = tr.evals
        row = {
            "wall_time": round(tr.wall_time, 4),
            "z": tr.z,
            "F1_evals": ev.F1,
            "F2_evals": ev.F2,
            "F1_evals_total": ev.total_F1,
            "F2_evals_total": ev.total_F2,
            "prox_calls": ev.prox,
        }
        if tr.rows:
            for key in ("dist", "feas_gap", "opt_gap"):
                val = getattr(tr.rows[-1], key)
                if not math.isnan(val):
                    row[key] = val
        sections["variant %s" % v] = row
        print("%-12s %8.3fs  F1 evals %d (+%d init)  F2 evals %d (+%d init)" % (v, tr.wall_time, ev.F1, ev.init_F1, ev.F2, ev.init_F2))
    traces = dict(results)
    spread = max(float(np.linalg.norm(traces[a].z - traces[b].z)) for a in COMPARE_VARIANTS for b in COMPARE_VARIANTS)
    economy = all(
        2 * traces[v].evals.F1 == traces["korpelevich"].evals.F1 and 2 * traces[v].evals.F2 == traces["korpelevich"].evals.F2
        for v in ("oeg", "tseng")
    )
    sections["summary"] = {"order_by_wall_time": " ".join(v for v, _ in results), "max_pairwise_distance": spread, "eval_economy": economy}
    write_report(_out_path(cfg, cfg.report_name), cfg, sections)
    print("max pairwise distance of final points: %.3e" % spread)
    if not economy:
        print("FAIL evaluation economy: optimistic variants do not use half the evaluations", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def cmd_check(cfg: Config):
    names = cfg.check_problems
    report = run_check_suite(names, seed=cfg.seed, samples=cfg.check_samples, energy_K=cfg.check_energy_K, inject=cfg.check_inject)
    for line in report.lines():
        print(line)
    sections = {"checks": {"passed": report.passed, "count": len(report.results), "failures": len(report.failures)}}
    sections["results"] = {"%03d" % i: r.line() for i, r in enumerate(report.results)}
    write_report(_out_path(cfg, cfg.report_name), cfg, sections)
    if not report.passed:
        for r in report.failures:
            print("violation: %s" % r.name, file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "compare": cmd_compare, "check": cmd_check}


def build_parser():
    p = argparse.ArgumentParser(prog="hvi", description="Tikhonov-regularized extragradient solvers for hierarchical HVIs")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("config", help="INI configuration file")
    p.add_argument("--out", help="output directory (overrides [output] dir)")
    p.add_argument("--k", type=int, help="iteration budget (overrides [solver] K)")
    p.add_argument("--delta", type=float, action="append", help="regularization exponent; repeat for a sweep")
    p.add_argument("--seed", type=int, help="seed of the randomized checks")
    return p


def main(argv=None):
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg = _apply_overrides(cfg, args, allow_many_deltas=args.command == "sweep")
        return COMMANDS[args.command](cfg)
    except (DivergenceError, NonFiniteError) as exc:
        print("diverged: %s" % exc, file=sys.stderr)
        return EXIT_DIVERGED
    except (ConfigError, DimensionError, DomainError) as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
