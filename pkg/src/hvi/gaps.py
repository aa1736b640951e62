"""Merit functions: the bifunction H, anchor-based gap functions and rate fits.

Gaps are suprema over compact sets. Here the supremum is taken over a finite
anchor set, so every reported gap is a lower bound on the continuous one.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError

log = logging.getLogger(__name__)

__all__ = [
    "AnchorSet",
    "GapFunction",
    "H_bifunction",
    "gap_over_anchors",
    "feas_gap",
    "opt_gap",
    "weak_sharpness_probe",
    "WeakSharpnessReport",
    "rate_slope",
    "load_anchors",
    "save_anchors",
]


def H_bifunction(F, g, z, y):
    """``<F(y), z - y> + g(z) - g(y)``; ``+inf`` when ``z`` is outside dom(g)."""
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    gy = g.value(y)
    if not math.isfinite(gy):
        raise DomainError("H_bifunction: y lies outside dom(%s)" % g.name)
    gz = g.value(z)
    if not math.isfinite(gz):
        return math.inf
    return float(np.dot(F(y), z - y)) + gz - gy


def gap_over_anchors(F, g, anchors, z):
    """Largest ``H(z, y)`` over the anchor points ``y``."""
    pts = np.atleast_2d(np.asarray(getattr(anchors, "points", anchors), dtype=float))
    if pts.size == 0:
        raise ConfigError("anchor set is empty")
    return max(H_bifunction(F, g, z, y) for y in pts)


@dataclass(frozen=True)
class AnchorSet:
    """Finite sample of a compact set; ``label`` is ``"feasibility"`` or ``"optimality"``."""

    points: np.ndarray
    label: str = "feasibility"

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.size == 0:
            raise ConfigError("anchor set is empty")
        object.__setattr__(self, "points", pts)
        if self.label not in ("feasibility", "optimality"):
            raise ConfigError("anchor label must be 'feasibility' or 'optimality'")

    def __len__(self):
        return self.points.shape[0]


class GapFunction:
    """``z -> max_j <F(y_j), z - y_j> + g(z) - g(y_j)`` with the anchor terms cached.

    ``F(y_j)`` and ``g(y_j)`` are evaluated once, so each call costs one
    matrix-vector product plus one evaluation of ``g``.
    """

    def __init__(self, F, g, anchors):
        pts = anchors.points if isinstance(anchors, AnchorSet) else np.atleast_2d(anchors)
        if pts.size == 0:
            raise ConfigError("anchor set is empty")
        self.F, self.g, self.points = F, g, np.asarray(pts, dtype=float)
        gy = np.array([g.value(y) for y in self.points])
        if not np.all(np.isfinite(gy)):
            raise ConfigError("anchor outside dom(%s)" % g.name)
        self.Fy = np.array([F(y) for y in self.points])
        self.const = -np.einsum("ij,ij->i", self.Fy, self.points) - gy

    def __call__(self, z):
        gz = self.g.value(z)
        if not math.isfinite(gz):
            return math.inf
        return float(np.max(self.Fy @ z + self.const)) + gz


def feas_gap(problem, anchors, z):
    """Feasibility gap: anchor gap of the lower data ``(F2, g2)``."""
    return gap_over_anchors(problem.F2, problem.g2, anchors, z)


def _check_in_lower_set(problem, anchors, tol=1e-8):
    S = problem.lower_set
    if S is None:
        return
    pts = np.atleast_2d(getattr(anchors, "points", anchors))
    for y in pts:
        d = S.distance(y)
        if d > tol:
            raise ConfigError("optimality anchor %s is %.3g away from the lower solution set" % (y, d))


def opt_gap(problem, anchors, z):
    """Optimality gap: anchor gap of the upper data ``(F1, g1)`` over anchors inside S2."""
    _check_in_lower_set(problem, anchors)
    return gap_over_anchors(problem.F1, problem.g1, anchors, z)


def make_opt_gap(problem, anchors):
    _check_in_lower_set(problem, anchors)
    return GapFunction(problem.F1, problem.g1, anchors)


def make_feas_gap(problem, anchors):
    return GapFunction(problem.F2, problem.g2, anchors)


@dataclass
class WeakSharpnessReport:
    alpha: float
    rho: float
    samples: int
    violations: int
    max_alpha: float

    @property
    def passed(self):
        return self.violations == 0


def weak_sharpness_probe(problem, samples, alpha, rho, seed=0, tol=1e-9):
    """Test ``H(z, P(z)) >= (alpha / rho) dist(z, S2)**rho`` on random points of the sample box.

    ``P`` is the projection onto the lower solution set. The report also gives
    the largest ``alpha`` that passes at this ``rho`` on the drawn sample.
    """
    if problem.lower_set is None:
        raise ConfigError("weak-sharpness probe needs a lower solution set descriptor")
    if problem.sample_box is None:
        raise ConfigError("weak-sharpness probe needs a sample box")
    lo, hi = (np.asarray(b, dtype=float) for b in problem.sample_box)
    rng = np.random.default_rng(seed)
    S, F, g = problem.lower_set, problem.F2, problem.g2
    violations = 0
    best = math.inf
    for _ in range(samples):
        z = rng.uniform(lo, hi)
        if not g.in_domain(z):
            continue
        p = S.project(z)
        d = float(np.linalg.norm(z - p))
        h = H_bifunction(F, g, z, p)
        if h < (alpha / rho) * d**rho - tol:
            violations += 1
        if d > 1e-12:
            best = min(best, rho * h / d**rho)
    return WeakSharpnessReport(alpha, rho, samples, violations, best)


def rate_slope(values, ks, k_range=None):
    """Least-squares slope of ``log(value)`` against ``log(k)``.

    Nonpositive or non-finite values are dropped with a warning.
    """
    v = np.asarray(values, dtype=float)
    k = np.asarray(ks, dtype=float)
    keep = np.ones(v.shape, dtype=bool)
    if k_range is not None:
        keep &= (k >= k_range[0]) & (k <= k_range[1])
    good = keep & np.isfinite(v) & (v > 0)
    if np.count_nonzero(keep & ~good):
        log.warning("rate_slope: dropping %d nonpositive values", np.count_nonzero(keep & ~good))
    if np.count_nonzero(good) < 2:
        return math.nan
    return float(np.polyfit(np.log(k[good]), np.log(v[good]), 1)[0])


def load_anchors(path, label="feasibility"):
    """Read anchors from a whitespace-separated matrix, one point per row."""
    return AnchorSet(np.loadtxt(path, ndmin=2), label)


def save_anchors(path, anchors):
    np.savetxt(path, np.atleast_2d(getattr(anchors, "points", anchors)), fmt="%.17g")
