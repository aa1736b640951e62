"""Randomized invariant checks behind ``hvi check``.

Each check returns a :class:`CheckResult`; :func:`run_check_suite` collects
them over the problem zoo. All randomness flows from one seed, so a fixed seed
gives an identical report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core import HierarchicalProblem
from .gaps import GapFunction, weak_sharpness_probe
from .prox import ProxTerm
from .schedules import ScheduleParams, make_schedule, schedule_strong
from .solvers import SolverConfig, resolve_schedule, run

__all__ = [
    "CheckResult",
    "CheckReport",
    "check_prox_nonexpansive",
    "check_prox_characterization",
    "check_combined_prox_consistency",
    "check_monotone",
    "check_lipschitz",
    "check_gap_nonneg",
    "check_gap_convex",
    "check_weak_sharpness",
    "check_energy",
    "check_schedule",
    "check_lower_inclusion",
    "faulty_prox",
    "run_check_suite",
    "DEFAULT_SUITE",
]


@dataclass
class CheckResult:
    name: str
    passed: bool
    trials: int = 0
    violations: int = 0
    worst: float = 0.0
    detail: str = ""

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        s = "%s %s: %d/%d violations, worst %.3e" % (status, self.name, self.violations, self.trials, self.worst)
        return s + (" (%s)" % self.detail if self.detail else "")


@dataclass
class CheckReport:
    results: list = field(default_factory=list)

    @property
    def passed(self):
        return all(r.passed for r in self.results)

    @property
    def failures(self):
        return [r for r in self.results if not r.passed]

    def add(self, result):
        self.results.append(result)
        return result

    def lines(self):
        return [r.line() for r in self.results]


def _result(name, excess, detail=""):
    # excess[i] > 0 marks a violation
    excess = np.asarray(excess, dtype=float)
    bad = int(np.count_nonzero(excess > 0))
    worst = float(np.max(excess)) if excess.size else 0.0
    return CheckResult(name, bad == 0, int(excess.size), bad, worst, detail)


def _box(problem, scale=10.0):
    if problem.sample_box is not None:
        lo, hi = (np.asarray(b, dtype=float) for b in problem.sample_box)
        pad = 0.25 * (hi - lo)
        return lo - pad, hi + pad
    return np.full(problem.dim, -scale), np.full(problem.dim, scale)


def check_prox_nonexpansive(term: ProxTerm, lo, hi, rng, step=1.0, pairs=200, tol=1e-10, name=None):
    """``|prox(u) - prox(v)| <= |u - v| + tol`` on random pairs.

    Half of the pairs are random; the other half straddle a boundary point of
    the domain along one coordinate by a small offset, where clamping bugs
    show up as jumps. Separable terms use their finite piece bounds; other
    terms use a prox output of a far-away point.
    """
    bounds = []
    if term.pieces is not None:
        bounds = [(j, b) for j, p in enumerate(term.pieces) for b in (p.lower, p.upper) if math.isfinite(b)]
    excess = []
    for i in range(pairs):
        if i % 2 == 0:
            u, v = rng.uniform(lo, hi), rng.uniform(lo, hi)
        else:
            if bounds:
                j, b = bounds[rng.integers(len(bounds))]
                x = rng.uniform(lo, hi)
                x[j] = b
            else:
                x = term.prox(step, rng.uniform(lo - (hi - lo), hi + (hi - lo)))
                j = rng.integers(x.size)
            d = np.zeros_like(x)
            d[j] = 1e-3 * (1.0 + abs(x[j])) * rng.uniform(0.5, 1.0)
            u, v = x + d, x - d
        pu, pv = term.prox(step, u), term.prox(step, v)
        excess.append(np.linalg.norm(pu - pv) - np.linalg.norm(u - v) - tol)
    return _result(name or "prox nonexpansive [%s]" % term.name, excess)


def check_prox_characterization(term: ProxTerm, lo, hi, rng, step=1.0, trials=20, tests=100, tol=1e-8, name=None):
    """``<u - x, z - x> <= step (g(z) - g(x)) + tol`` with ``x = prox(u)`` and ``z`` in dom(g)."""
    excess = []
    for _ in range(trials):
        u = rng.uniform(lo, hi)
        x = term.prox(step, u)
        gx = term.value(x)
        if not math.isfinite(gx):
            excess.append(math.inf)
            continue
        for _ in range(tests):
            z = term.prox(step, rng.uniform(lo, hi))
            gz = term.value(z)
            if not math.isfinite(gz):
                continue
            excess.append(float(np.dot(u - x, z - x)) - step * (gz - gx) - tol)
    return _result(name or "prox characterization [%s]" % term.name, excess)


def check_combined_prox_consistency(problem, rng, trials=50, tol=1e-12):
    """The blended prox at ``sigma = 0`` equals the prox of ``g2``."""
    lo, hi = _box(problem)
    excess = []
    for _ in range(trials):
        u = rng.uniform(lo, hi)
        t = rng.uniform(0.01, 2.0)
        d = problem.data.prox(t, 0.0, u) - problem.g2.prox(t, u)
        excess.append(float(np.max(np.abs(d))) - tol)
    return _result("combined prox at sigma=0 [%s]" % problem.name, excess)


def check_monotone(op, lo, hi, rng, pairs=500, tol=1e-8, name=None):
    excess = []
    for _ in range(pairs):
        a, b = rng.uniform(lo, hi), rng.uniform(lo, hi)
        excess.append(-float(np.dot(op(a) - op(b), a - b)) - tol)
    return _result(name or "monotone [%s]" % op.name, excess)


def check_lipschitz(op, lo, hi, rng, pairs=500, tol=1e-8, name=None):
    excess = []
    for _ in range(pairs):
        a, b = rng.uniform(lo, hi), rng.uniform(lo, hi)
        d = np.linalg.norm(a - b)
        excess.append(np.linalg.norm(op(a) - op(b)) - (op.lipschitz + tol) * d)
    return _result(name or "lipschitz [%s]" % op.name, excess)


def check_gap_nonneg(gap: GapFunction, tol=1e-12, name="gap nonnegative on anchors"):
    return _result(name, [-gap(y) - tol for y in gap.points])


def check_gap_convex(gap: GapFunction, sampler, rng, trials=200, tol=1e-9, name="gap convex"):
    """Jensen's inequality along random chords with both endpoints in dom(g)."""
    excess = []
    for _ in range(trials):
        z1, z2 = sampler(), sampler()
        lam = rng.uniform()
        v1, v2 = gap(z1), gap(z2)
        if not (math.isfinite(v1) and math.isfinite(v2)):
            continue
        mid = gap(lam * z1 + (1 - lam) * z2)
        excess.append(mid - lam * v1 - (1 - lam) * v2 - tol * (1 + abs(v1) + abs(v2)))
    return _result(name, excess)


def check_weak_sharpness(problem, samples=200, seed=0):
    alpha, rho = problem.weak_sharp
    rep = weak_sharpness_probe(problem, samples, alpha, rho, seed=seed)
    return CheckResult(
        "weak sharpness (%g, %g) [%s]" % (alpha, rho, problem.name),
        rep.passed,
        rep.samples,
        rep.violations,
        0.0,
        "max alpha %.4g" % rep.max_alpha,
    )


def check_energy(problem, K=2000, variant="oeg", params=None, rtol=1e-8):
    """Energy recursion residual ``r_k <= rtol (1 + E_1)`` along a run from the default start."""
    params = params or ScheduleParams()
    cfg = SolverConfig(variant=variant, K=K, log_every=max(K, 1), schedule=params, z_ref=problem.solution, keep_snapshots=False)
    tr = run(problem, cfg)
    bound = rtol * (1.0 + abs(tr.energy_E1))
    return CheckResult(
        "energy recursion %s [%s]" % (variant, problem.name),
        tr.max_resid <= bound,
        K,
        0 if tr.max_resid <= bound else 1,
        tr.max_resid,
        "bound %.3e" % bound,
    )


def check_schedule(problem, params: ScheduleParams, K=10000):
    """Step-size conditions of the schedule and, in strong mode, the closed form of ``gamma``."""
    params = resolve_schedule(params, problem)
    sched = make_schedule(params)
    excess = []
    prod = 1.0
    for k in range(1, K + 1):
        t, sigma, _ = sched(k)
        L = sched.lipschitz(k)
        if params.step_mode == "strong_mono":
            excess.append(4 * t * t * L * L + 2 * t * sigma * params.mu - 1 - 1e-12)
            prod *= 1 - t * sigma * params.mu
            gamma = schedule_strong(k, params.L_F2, params.L_F1, params.mu)[2]
            excess.append(abs(gamma - 1 / prod) - 1e-9 * gamma)
        else:
            excess.append(8 * t * t * L * L - 1 - 1e-12)
    return _result("schedule %s [%s]" % (params.step_mode, problem.name), excess)


def check_lower_inclusion(problem, count=50, tol=1e-8):
    """``-F2(z)`` lies in the subdifferential of ``g2`` at sampled points of the lower solution set."""
    pieces = problem.g2.pieces
    excess = []
    for z in problem.lower_set.sample(count):
        f = problem.F2(z)
        for p, zi, fi in zip(pieces, z, f):
            a, b = p.subdifferential(zi)
            excess.append(max(a - (-fi), (-fi) - b) - tol)
    return _result("lower-level inclusion [%s]" % problem.name, excess)


def faulty_prox(term: ProxTerm):
    """Fault-injection copy of a box-type term: points above the upper bound land one unit past it."""
    upper = np.array([p.upper for p in term.pieces])

    def prox(step, u):
        x = term.prox(step, u)
        return np.where(np.asarray(u) > upper, upper + 1.0, x)

    return replace(term, prox=prox, name=term.name + "+offbyone")


DEFAULT_SUITE = ("gnep", "gave", "minmax", "bilevel", "toy_strong", "toy_cross", "toy_identity", "toy_abs", "toy_quadratic")


def _check_problem(report, problem: HierarchicalProblem, rng, samples, energy_K, inject):
    lo, hi = _box(problem)
    terms = [problem.g2, problem.g1]
    if inject == "prox_offbyone" and problem.g2.pieces is not None and not problem.g2.is_zero:
        terms[0] = faulty_prox(problem.g2)
    for term in terms:
        report.add(check_prox_nonexpansive(term, lo, hi, rng, pairs=samples))
        report.add(check_prox_characterization(term, lo, hi, rng))
    sigma = 0.5
    blended = ProxTerm(
        prox=lambda step, u: problem.data.prox(step, sigma, u),
        value=lambda z: problem.data.G(sigma, z),
        in_domain=lambda z: math.isfinite(problem.data.G(sigma, z)),
        name="g2+0.5*g1",
    )
    report.add(check_prox_nonexpansive(blended, lo, hi, rng, pairs=samples, name="prox nonexpansive [%s blend]" % problem.name))
    report.add(check_prox_characterization(blended, lo, hi, rng, name="prox characterization [%s blend]" % problem.name))
    report.add(check_combined_prox_consistency(problem, rng))
    for op in (problem.F2, problem.F1):
        report.add(check_monotone(op, lo, hi, rng, name="monotone [%s.%s]" % (problem.name, op.name)))
        report.add(check_lipschitz(op, lo, hi, rng, name="lipschitz [%s.%s]" % (problem.name, op.name)))
    if problem.lower_set is not None and problem.g2.pieces is not None and hasattr(problem.lower_set, "base"):
        report.add(check_lower_inclusion(problem))
    for pts, F, g, label in ((problem.feas_anchors, problem.F2, problem.g2, "feas"), (problem.opt_anchors, problem.F1, problem.g1, "opt")):
        if pts is None:
            continue
        gap = GapFunction(F, g, pts)
        report.add(check_gap_nonneg(gap, name="%s gap nonnegative on anchors [%s]" % (label, problem.name)))
        sampler = lambda: g.prox(1.0, rng.uniform(lo, hi))  # noqa: E731
        report.add(check_gap_convex(gap, sampler, rng, name="%s gap convex [%s]" % (label, problem.name)))
    if problem.weak_sharp is not None and problem.lower_set is not None:
        report.add(check_weak_sharpness(problem, samples, seed=int(rng.integers(2**31))))
    if problem.F2.lipschitz + problem.F1.lipschitz > 0:
        report.add(check_schedule(problem, ScheduleParams(), K=2000))
        if problem.F1.strong_mono > 0 and problem.F2.lipschitz > 0:
            report.add(check_schedule(problem, ScheduleParams(step_mode="strong_mono"), K=2000))
    if problem.solution is not None and energy_K > 0 and problem.F2.lipschitz + problem.F1.lipschitz > 0:
        report.add(check_energy(problem, energy_K))
        if problem.F1.strong_mono > 0 and problem.F2.lipschitz > 0:
            report.add(check_energy(problem, energy_K, "sm_oeg", ScheduleParams(step_mode="strong_mono")))


def run_check_suite(problems=None, seed=0, samples=200, energy_K=2000, inject=None):
    """Run every applicable check on each problem; ``problems`` holds built problems or registry names."""
    from .problems import build_problem

    report = CheckReport()
    rng = np.random.default_rng(seed)
    for p in problems or DEFAULT_SUITE:
        problem = build_problem(p) if isinstance(p, str) else p
        _check_problem(report, problem, rng, samples, energy_K, inject)
    return report

