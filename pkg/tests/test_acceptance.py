"""Acceptance criteria, one test per criterion.

Every test prints a single ``PASS``/``FAIL`` line with the measured numbers
before asserting, so ``pytest -v -s`` or the tee'd log shows the outcome of
each criterion even when it fails.
"""

import os

import numpy as np
import pytest

from hvi.checks import run_check_suite
from hvi.cli import main
from hvi.gaps import rate_slope
from hvi.problems import ave_residual, build_gave, build_gnep, toy_cross, toy_strong
from hvi.schedules import ScheduleParams, make_schedule
from hvi.solvers import SolverConfig, energy_check, run, sm_oeg_run

from oracles import GNEP_STAR, ave_newton, product_gamma

CONFIGS = os.path.join(os.path.dirname(__file__), os.pardir, "configs")


def _report(capsys, number, title, ok, detail):
    with capsys.disabled():
        print("\n%s criterion %d (%s): %s" % ("PASS" if ok else "FAIL", number, title, detail))
    return ok


@pytest.fixture(scope="module")
def gnep():
    return build_gnep()


def test_criterion_1_gnep_reproduction(gnep, capsys):
    tr = run(gnep, SolverConfig(K=200000, log_every=10000, schedule=ScheduleParams(a=1.0, b=3.0, delta=0.5)))
    err_avg = float(np.linalg.norm(tr.z_bar - GNEP_STAR))
    dist_last = gnep.lower_set.distance(tr.z)
    ok = err_avg <= 0.5 and dist_last <= 0.1
    _report(
        capsys,
        1,
        "GNEP reproduction",
        ok,
        "|z_bar - z*| = %.4f (<= 0.5), dist(z^K, S2) = %.4f (<= 0.1), %.1fs (expected < 10s)"
        % (err_avg, dist_last, tr.wall_time),
    )
    assert err_avg <= 0.5, "ergodic average %.4f away from the equilibrium" % err_avg
    assert dist_last <= 0.1, "last iterate %.4f away from the lower solution set" % dist_last


def test_criterion_2_rate_shape(gnep, capsys):
    slopes = {}
    for delta in (0.3, 0.5, 0.7):
        tr = run(gnep, SolverConfig(K=100000, log_every=1000, schedule=ScheduleParams(delta=delta), keep_snapshots=False))
        slopes[delta] = rate_slope(np.abs(tr.column("feas_gap")), tr.column("k"), (1e3, 1e5))
    ordered = slopes[0.3] > slopes[0.5] > slopes[0.7]
    ok = slopes[0.5] <= -0.35 and ordered
    _report(
        capsys,
        2,
        "feasibility rate shape",
        ok,
        "slopes over K in [1e3, 1e5]: " + ", ".join("delta=%.1f: %.3f" % kv for kv in slopes.items())
        + " (delta=0.5 <= -0.35, steeper in delta: %s)" % ordered,
    )
    assert slopes[0.5] <= -0.35
    assert ordered


def test_criterion_3_energy_recursion(gnep, capsys):
    res, tr = energy_check(gnep, SolverConfig(K=10000, log_every=1000), z_ref=GNEP_STAR)
    bound = 1e-8 * (1 + tr.energy_E1)
    worst = float(res.max())
    ok = len(res) == 10000 and worst <= bound
    _report(capsys, 3, "energy recursion", ok, "max r_k = %.3e over %d steps (bound %.3e)" % (worst, len(res), bound))
    assert ok


def test_criterion_4_strongly_monotone_variant(capsys):
    p = toy_strong()
    errs = {K: abs(sm_oeg_run(p, K, log_every=K).z_bar[0] - 3.0) for K in (1000, 10000)}
    ratio = errs[10000] / errs[1000]
    ok = ratio <= 0.2
    _report(
        capsys,
        4,
        "strongly monotone variant",
        ok,
        "error(1e3) = %.4e, error(1e4) = %.4e, ratio %.3f (<= 0.2)" % (errs[1000], errs[10000], ratio),
    )
    assert ok


def test_criterion_5_cross_equivalence(capsys):
    K = 100000
    p = toy_cross()
    traces = {v: run(p, SolverConfig(variant=v, K=K, log_every=K)) for v in ("oeg", "tseng", "korpelevich")}
    spread = max(float(np.linalg.norm(a.z - b.z)) for a in traces.values() for b in traces.values())
    counts = {v: (tr.evals.F1, tr.evals.F2) for v, tr in traces.items()}
    counts_ok = counts["oeg"] == counts["tseng"] == (K, K) and counts["korpelevich"] == (2 * K, 2 * K)
    ok = spread <= 1e-5 and counts_ok
    _report(
        capsys,
        5,
        "solver cross-equivalence",
        ok,
        "max pairwise distance %.2e (<= 1e-5); per-iteration (F1, F2) evaluations %s "
        "(oeg/tseng also evaluate once at the start point)" % (spread, counts),
    )
    assert spread <= 1e-5
    assert counts_ok


def test_criterion_6_gave(capsys):
    K = 400000
    p = build_gave(9)
    A, b, B = p.notes["A"], p.notes["b"], p.notes["B"]
    oracle = p.notes["oracle"]
    oracle_res = ave_residual(A, b, oracle, B)
    tr = run(p, SolverConfig(K=K, log_every=20000))
    u = p.readout(tr.z, tr.schedule.sigma)
    res = ave_residual(A, b, u, B)
    dev_analytic = float(np.max(np.abs(u - p.notes["analytic"])))
    devs = [float(np.linalg.norm(p.readout(z, s) - oracle)) for k, s, z, _ in tr.snapshots if k >= K // 10]
    monotone = all(b2 < a2 for a2, b2 in zip(devs, devs[1:]))
    # independent oracle agrees with the package oracle
    newton_gap = float(np.max(np.abs(ave_newton(A, b) - oracle)))
    ok = res <= 1e-3 and dev_analytic <= 5e-2 and oracle_res <= 1e-10 and monotone and newton_gap <= 1e-10
    _report(
        capsys,
        6,
        "GAVE",
        ok,
        "residual %.2e (<= 1e-3), max analytic deviation %.2e (<= 5e-2), oracle residual %.1e (<= 1e-10), "
        "distance to oracle monotone over %d checkpoints: %s (last %.2e), %.1fs (expected < 30s)"
        % (res, dev_analytic, oracle_res, len(devs), monotone, devs[-1], tr.wall_time),
    )
    assert ok


def test_criterion_7_property_suites(tmp_path, capsys):
    rc = main(["check", os.path.join(CONFIGS, "check.cfg"), "--out", str(tmp_path)])
    rep = run_check_suite(seed=0)
    names = [r.name for r in rep.results]
    wanted = ("prox nonexpansive", "prox characterization", "gap nonnegative", "gap convex", "weak sharpness (1, 1) [toy_abs]")
    present = all(any(w in n for n in names) for w in wanted)
    ok = rc == 0 and rep.passed and present
    _report(
        capsys,
        7,
        "property suites under hvi check",
        ok,
        "exit code %d, %d checks, %d failures, required families present: %s" % (rc, len(rep.results), len(rep.failures), present),
    )
    assert ok


def test_criterion_8_schedule_validity(gnep, capsys):
    L2, L1, mu = gnep.F2.lipschitz, gnep.F1.lipschitz, gnep.F1.strong_mono
    ks = np.arange(1, 10**6 + 1, dtype=float)
    # monotone mode: constant t, sigma nonincreasing
    mono = make_schedule(ScheduleParams(L_F1=L1, L_F2=L2))
    sig = 1.0 / np.sqrt(ks + 3.0)
    mono_worst = float(np.max(8 * mono.t**2 * (L2 + sig * L1) ** 2))
    loop_mono = max(8 * mono(k)[0] ** 2 * mono.lipschitz(k) ** 2 for k in range(1, 10**4 + 1))
    # strong mode
    strong = make_schedule(ScheduleParams(step_mode="strong_mono", mu=mu, L_F1=L1, L_F2=L2))
    s = 4 * L2 / (mu * ks)
    t = 1 / (4 * (L2 + s * (L1 + mu)))
    strong_worst = float(np.max(4 * t**2 * (L2 + s * L1) ** 2 + 2 * t * s * mu))
    loop_strong = max(
        4 * strong(k)[0] ** 2 * strong.lipschitz(k) ** 2 + 2 * strong(k)[0] * strong(k)[1] * mu for k in range(1, 10**4 + 1)
    )
    gamma_ok = all(abs(strong.gamma(k) - product_gamma(k, L2, L1, mu)) <= 1e-9 * strong.gamma(k) for k in (1, 10, 100, 10**4))
    monotone_sigma = bool(np.all(np.diff(sig) <= 0) and np.all(np.diff(s) <= 0))
    ok = max(mono_worst, loop_mono) <= 1 and max(strong_worst, loop_strong) <= 1 and gamma_ok and monotone_sigma
    _report(
        capsys,
        8,
        "schedule validity",
        ok,
        "max 8t^2L^2 = %.4f, max 4t^2L^2 + 2t sigma mu = %.4f over k <= 1e6 (loop to 1e4: %.4f, %.4f), gamma closed form: %s"
        % (mono_worst, strong_worst, loop_mono, loop_strong, gamma_ok),
    )
    assert ok
