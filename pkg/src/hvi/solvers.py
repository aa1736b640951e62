"""Tikhonov-regularized extragradient schemes for hierarchical HVIs.

All schemes work on the blended data ``V_k = F2 + sigma_k F1`` and
``G_k = g2 + sigma_k g1``:

``oeg``
    optimistic (past) extragradient; one evaluation of each operator and two
    prox calls per iteration.
``tseng``
    optimistic forward-backward-forward; one evaluation of each operator and
    one prox call per iteration.
``sm_oeg``
    the ``oeg`` body driven by the strongly monotone schedule, averaged with
    weights ``t_k sigma_k gamma_k``.
``korpelevich``
    the classical two-call extragradient, kept as a reference.

The operator values at ``z^{k-1/2}`` are cached as the raw pair
``(F2, F1)`` and re-weighted with the current ``sigma_k``; this is what keeps
the optimistic variants at one evaluation per iteration.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import HierarchicalProblem, as_vector
from .errors import ConfigError, DivergenceError, DomainError
from .gaps import make_feas_gap, make_opt_gap
from .schedules import ScheduleParams, ScheduleState, make_schedule

log = logging.getLogger(__name__)

__all__ = [
    "VARIANTS",
    "EvalCounter",
    "SolverState",
    "SolverConfig",
    "TraceRow",
    "RunTrace",
    "EnergyMonitor",
    "init_state",
    "oeg_step",
    "tseng_step",
    "korpelevich_step",
    "run",
    "sm_oeg_run",
    "energy_check",
    "resolve_schedule",
]

VARIANTS = ("oeg", "tseng", "sm_oeg", "korpelevich")
TRACE_COLUMNS = ("k", "t", "sigma", "step_norm", "feas_gap", "opt_gap", "dist", "E", "D", "W", "resid")
DIVERGENCE_NORM = 1e12
# the energy recursion is stated for the optimistic scheme with prox at both stages
ENERGY_VARIANTS = ("oeg", "sm_oeg")


@dataclass
class EvalCounter:
    """Operator and prox calls; ``init_*`` counts the one-off evaluation at ``z^{1/2}``."""

    F1: int = 0
    F2: int = 0
    prox: int = 0
    init_F1: int = 0
    init_F2: int = 0

    @property
    def total_F1(self):
        return self.F1 + self.init_F1

    @property
    def total_F2(self):
        return self.F2 + self.init_F2


@dataclass
class SolverState:
    z: np.ndarray
    z_half: np.ndarray
    f2_half: np.ndarray
    f1_half: np.ndarray
    ergodic_num: np.ndarray
    ergodic_den: float = 0.0
    k: int = 1
    evals: EvalCounter = field(default_factory=EvalCounter)
    schedule: ScheduleState = field(default_factory=ScheduleState)
    z_prev: Optional[np.ndarray] = None
    step_norm_sq: float = 0.0
    dv_sq: float = 0.0

    @property
    def z_bar(self):
        if self.ergodic_den <= 0:
            return self.z.copy()
        return self.ergodic_num / self.ergodic_den


def init_state(problem: HierarchicalProblem, z0=None, prime=True):
    """State with ``z^1 = z^{1/2}``; ``prime`` evaluates the operators there."""
    z = problem.initial_point() if z0 is None else as_vector(z0, problem.dim, "z0")
    state = SolverState(
        z=z,
        z_half=z.copy(),
        f2_half=np.zeros_like(z),
        f1_half=np.zeros_like(z),
        ergodic_num=np.zeros_like(z),
    )
    if prime:
        state.f2_half = np.asarray(problem.F2.fn(z), dtype=float)
        state.f1_half = np.asarray(problem.F1.fn(z), dtype=float)
        state.evals.init_F2 = state.evals.init_F1 = 1
    return state


def _commit(state, data, z_half, z_next, f2, f1, v_old, v_new, weight):
    nrm = float(z_next @ z_next)
    if not nrm <= DIVERGENCE_NORM**2:
        culprit = ""
        for op, val in ((data.F2, f2), (data.F1, f1)):
            if not np.all(np.isfinite(val)):
                culprit = "; operator %s returned non-finite values" % op.name
        raise DivergenceError(
            "iterate diverged at k=%d (|z| = %.3g)%s" % (state.k, math.sqrt(nrm) if nrm == nrm else nrm, culprit),
            state,
        )
    d = z_half - state.z
    dv = v_old - v_new
    state.step_norm_sq = float(d @ d)
    state.dv_sq = float(dv @ dv)
    state.z_prev = state.z
    state.z = z_next
    state.z_half = z_half
    state.f2_half = f2
    state.f1_half = f1
    state.ergodic_num += weight * z_half
    state.ergodic_den += weight
    state.k += 1
    return state


def oeg_step(state, data, t, sigma, weight=None):
    """One optimistic extragradient iteration; mutates and returns ``state``."""
    z = state.z
    v_old = state.f2_half + sigma * state.f1_half
    z_half = data.combined_prox(t, sigma, z - t * v_old)
    f2 = data.F2.fn(z_half)
    f1 = data.F1.fn(z_half)
    v_new = f2 + sigma * f1
    z_next = data.combined_prox(t, sigma, z - t * v_new)
    ev = state.evals
    ev.F2 += 1
    ev.F1 += 1
    ev.prox += 2
    return _commit(state, data, z_half, z_next, f2, f1, v_old, v_new, t if weight is None else weight)


def tseng_step(state, data, t, sigma, weight=None):
    """One optimistic forward-backward-forward iteration.

    ``z^{k+1}`` is not projected and may leave dom(g).
    """
    z = state.z
    v_old = state.f2_half + sigma * state.f1_half
    z_half = data.combined_prox(t, sigma, z - t * v_old)
    f2 = data.F2.fn(z_half)
    f1 = data.F1.fn(z_half)
    v_new = f2 + sigma * f1
    z_next = z_half - t * (v_new - v_old)
    ev = state.evals
    ev.F2 += 1
    ev.F1 += 1
    ev.prox += 1
    return _commit(state, data, z_half, z_next, f2, f1, v_old, v_new, t if weight is None else weight)


def korpelevich_step(state, data, t, sigma, weight=None):
    """Classical extragradient: fresh operator values at ``z^k`` and at the midpoint."""
    z = state.z
    v_old = data.F2.fn(z) + sigma * data.F1.fn(z)
    z_half = data.combined_prox(t, sigma, z - t * v_old)
    f2 = data.F2.fn(z_half)
    f1 = data.F1.fn(z_half)
    v_new = f2 + sigma * f1
    z_next = data.combined_prox(t, sigma, z - t * v_new)
    ev = state.evals
    ev.F2 += 2
    ev.F1 += 2
    ev.prox += 2
    return _commit(state, data, z_half, z_next, f2, f1, v_old, v_new, t if weight is None else weight)


STEPS = {"oeg": oeg_step, "tseng": tseng_step, "sm_oeg": oeg_step, "korpelevich": korpelevich_step}


class EnergyMonitor:
    """Per-iteration residual of the energy recursion at a reference point.

    Monotone form::

        r_k = E_{k+1} + D_{k+1} - (E_k + D_k - t_k Psi_k - |z^{k+1/2} - z^k|^2 / 4)

    Strongly monotone form (``mu > 0``)::

        r_k = W_{k+1} - (1 - t_k sigma_k mu) W_k + t_k (lower + sigma_k upper)

    where ``lower``/``upper`` are the H-bifunction terms of the midpoint
    against the reference evaluated at the reference. Both recursions
    predict ``r_k <= 0``.
    """

    def __init__(self, problem, z_ref, z1, mu=0.0):
        self.data = problem.data
        self.z_ref = as_vector(z_ref, problem.dim, "z_ref")
        self.g2_ref = problem.g2.value(self.z_ref)
        self.g1_ref = problem.g1.value(self.z_ref)
        if not (math.isfinite(self.g2_ref) and math.isfinite(self.g1_ref)):
            raise DomainError("energy reference lies outside dom(g1) or dom(g2)")
        self.mu = mu
        if mu > 0:
            # evaluated outside the solver counters
            self.F2_ref = np.asarray(problem.F2.fn(self.z_ref), dtype=float)
            self.F1_ref = np.asarray(problem.F1.fn(self.z_ref), dtype=float)
        d = z1 - self.z_ref
        self.E = 0.5 * float(d @ d)
        self.E1 = self.E
        self.D = 0.0
        self.max_resid = -math.inf

    @property
    def W(self):
        return self.E + self.D

    def update(self, state, t, sigma):
        zh = state.z_half
        dz = zh - self.z_ref
        g2h = self.data.g2.value(zh)
        g1h = self.data.g1.value(zh) if sigma != 0 else 0.0
        d_next = state.z - self.z_ref
        E_next = 0.5 * float(d_next @ d_next)
        D_next = 0.5 * t * t * state.dv_sq
        if self.mu > 0:
            lower = float(self.F2_ref @ dz) + g2h - self.g2_ref
            upper = float(self.F1_ref @ dz) + g1h - self.g1_ref
            r = E_next + D_next - ((1.0 - t * sigma * self.mu) * (self.E + self.D) - t * (lower + sigma * upper))
        else:
            v = state.f2_half + sigma * state.f1_half
            psi = float(v @ dz) + g2h - self.g2_ref
            if sigma != 0:
                psi += sigma * (g1h - self.g1_ref)
            r = E_next + D_next - (self.E + self.D - t * psi - 0.25 * state.step_norm_sq)
        self.E, self.D = E_next, D_next
        if r > self.max_resid:
            self.max_resid = r
        return r


@dataclass
class SolverConfig:
    """Run parameters. ``schedule`` Lipschitz/mu entries left as ``None`` come from the problem."""

    variant: str = "oeg"
    K: int = 1000
    log_every: int = 100
    schedule: ScheduleParams = field(default_factory=ScheduleParams)
    z0: Optional[np.ndarray] = None
    z_ref: Optional[np.ndarray] = None
    feas_anchors: Optional[np.ndarray] = None
    opt_anchors: Optional[np.ndarray] = None
    tol_step: Optional[float] = None
    tol_gap: Optional[float] = None
    keep_residuals: bool = False
    keep_snapshots: bool = True

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError("variant must be one of %s" % ", ".join(VARIANTS))
        if self.K < 0:
            raise ConfigError("iteration budget K must be nonnegative")
        if self.log_every < 1:
            raise ConfigError("log_every must be at least 1")
        if self.variant == "sm_oeg" and self.schedule.step_mode != "strong_mono":
            raise ConfigError("variant sm_oeg needs step_mode = strong_mono")


def resolve_schedule(params: ScheduleParams, problem: HierarchicalProblem) -> ScheduleParams:
    """Fill unset Lipschitz constants and ``mu`` from the problem's declarations."""
    updates = {}
    if params.L_F2 is None:
        updates["L_F2"] = problem.F2.lipschitz
    if params.L_F1 is None:
        updates["L_F1"] = problem.F1.lipschitz
    if params.mu is None and params.step_mode == "strong_mono":
        if problem.F1.strong_mono <= 0:
            raise ConfigError(
                "F1 of %s is not strongly monotone; use the monotone variants" % problem.name
            )
        updates["mu"] = problem.F1.strong_mono
    return dataclasses.replace(params, **updates) if updates else params


@dataclass
class TraceRow:
    k: int
    t: float
    sigma: float
    step_norm: float
    feas_gap: float = math.nan
    opt_gap: float = math.nan
    dist: float = math.nan
    E: float = math.nan
    D: float = math.nan
    W: float = math.nan
    resid: float = math.nan

    def as_tuple(self):
        return tuple(getattr(self, c) for c in TRACE_COLUMNS)


@dataclass
class RunTrace:
    problem: str
    variant: str
    params: ScheduleParams
    initial: np.ndarray
    rows: list = field(default_factory=list)
    z: Optional[np.ndarray] = None
    z_bar: Optional[np.ndarray] = None
    z_half: Optional[np.ndarray] = None
    iterations: int = 0
    wall_time: float = 0.0
    evals: EvalCounter = field(default_factory=EvalCounter)
    schedule: ScheduleState = field(default_factory=ScheduleState)
    residuals: Optional[np.ndarray] = None
    max_resid: float = math.nan
    energy_E1: float = math.nan
    snapshots: list = field(default_factory=list)
    stopped: str = "budget"
    has_gaps: bool = False

    def column(self, name):
        if name not in TRACE_COLUMNS:
            raise KeyError(name)
        return np.array([getattr(r, name) for r in self.rows], dtype=float)


def _anchor_points(explicit, default):
    pts = explicit if explicit is not None else default
    if pts is None:
        return None
    return np.atleast_2d(np.asarray(pts, dtype=float))


def run(problem: HierarchicalProblem, config: SolverConfig, callback: Optional[Callable] = None) -> RunTrace:
    """Run the configured scheme for ``K`` iterations or until the optional stop rule fires.

    Trace rows are written every ``log_every`` iterations and at the last
    iteration. Row ``k`` describes the state after iteration ``k``: the
    iterate ``z^{k+1}``, the average of the first ``k`` midpoints, and the
    ``(t_k, sigma_k)`` used. ``callback(k, state)`` runs after every iteration.
    """
    params = resolve_schedule(config.schedule, problem)
    sched = make_schedule(params)
    data = problem.data
    variant = config.variant
    state = init_state(problem, config.z0, prime=variant != "korpelevich")
    step = STEPS[variant]

    feas_pts = _anchor_points(config.feas_anchors, problem.feas_anchors)
    opt_pts = _anchor_points(config.opt_anchors, problem.opt_anchors)
    feas = make_feas_gap(problem, feas_pts) if feas_pts is not None else None
    opt = make_opt_gap(problem, opt_pts) if opt_pts is not None else None

    energy = None
    if config.z_ref is not None and variant in ENERGY_VARIANTS:
        mu = params.mu if variant == "sm_oeg" else 0.0
        energy = EnergyMonitor(problem, config.z_ref, state.z, mu=mu)
    residuals = np.empty(config.K) if (energy is not None and config.keep_residuals) else None

    trace = RunTrace(problem.name, variant, params, state.z.copy(), has_gaps=feas is not None or opt is not None)
    truth = problem.solution
    strong = variant == "sm_oeg"
    window_resid = -math.inf
    start = time.perf_counter()
    k = 0
    for k in range(1, config.K + 1):
        t, sigma, weight = sched(k)
        step(state, data, t, sigma, weight)
        state.schedule.update(k, t, sigma, sched.gamma(k) if strong else 1.0)
        if energy is not None:
            r = energy.update(state, t, sigma)
            if r > window_resid:
                window_resid = r
            if residuals is not None:
                residuals[k - 1] = r
        if callback is not None:
            callback(k, state)
        if k % config.log_every == 0 or k == config.K:
            row = _make_row(k, t, sigma, state, feas, opt, truth, energy, window_resid)
            trace.rows.append(row)
            window_resid = -math.inf
            if config.keep_snapshots:
                trace.snapshots.append((k, sigma, state.z.copy(), state.z_bar))
            if _should_stop(row, config):
                trace.stopped = "tolerance"
                break
    trace.wall_time = time.perf_counter() - start
    trace.iterations = k if config.K > 0 else 0
    trace.z = state.z.copy()
    trace.z_bar = state.z_bar
    trace.z_half = state.z_half.copy()
    trace.evals = state.evals
    trace.schedule = state.schedule
    if energy is not None:
        trace.max_resid = energy.max_resid
        trace.energy_E1 = energy.E1
        if residuals is not None:
            trace.residuals = residuals[: trace.iterations]
    log.info("%s/%s: %d iterations in %.2fs", problem.name, variant, trace.iterations, trace.wall_time)
    return trace


def _make_row(k, t, sigma, state, feas, opt, truth, energy, window_resid):
    z_bar = state.z_bar
    row = TraceRow(k, t, sigma, math.sqrt(state.step_norm_sq))
    if feas is not None:
        row.feas_gap = feas(z_bar)
    if opt is not None:
        row.opt_gap = opt(z_bar)
    if truth is not None:
        row.dist = float(np.linalg.norm(z_bar - truth))
    if energy is not None:
        row.E, row.D, row.W, row.resid = energy.E, energy.D, energy.W, window_resid
    return row


def _should_stop(row, config):
    if config.tol_step is None or not row.step_norm <= config.tol_step:
        return False
    if config.tol_gap is None:
        return True
    for g in (row.feas_gap, row.opt_gap):
        if not math.isnan(g) and abs(g) > config.tol_gap:
            return False
    return True


def sm_oeg_run(problem, K, params: Optional[ScheduleParams] = None, **kwargs):
    """Strongly monotone run with the ``gamma``-weighted average."""
    params = params or ScheduleParams(step_mode="strong_mono", mu=None)
    if params.step_mode != "strong_mono":
        raise ConfigError("sm_oeg_run needs step_mode = strong_mono")
    if problem.F1.strong_mono <= 0 and params.mu is None:
        raise ConfigError("F1 of %s has mu = 0; use the monotone variants" % problem.name)
    return run(problem, SolverConfig(variant="sm_oeg", K=K, schedule=params, **kwargs))


def energy_check(problem, config: SolverConfig, z_ref=None):
    """Per-iteration energy residuals ``r_k`` (predicted ``<= 0``) of a run."""
    z_ref = problem.solution if z_ref is None else z_ref
    if z_ref is None:
        raise ConfigError("energy check needs a reference point")
    if config.variant not in ENERGY_VARIANTS:
        raise ConfigError("energy recursion is only monitored for %s" % ", ".join(ENERGY_VARIANTS))
    cfg = dataclasses.replace(config, z_ref=z_ref, keep_residuals=True, keep_snapshots=False)
    trace = run(problem, cfg)
    return trace.residuals, trace
