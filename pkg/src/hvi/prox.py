"""Proximable convex functions and their proximal maps.

Every function is wrapped in a :class:`ProxTerm` exposing three oracles:

* ``prox(step, u)``: the minimizer of ``step * g(x) + 0.5 * ||x - u||^2``,
* ``value(z)``: the extended-real value, ``numpy.inf`` outside the domain,
* ``in_domain(z)``: domain membership.

Coordinatewise-separable terms additionally carry a tuple of 1-D
:class:`PiecewiseLinear` pieces. Two separable terms can then be combined
exactly, which is what :func:`default_combined_prox` relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigError, DimensionError

INF = math.inf

__all__ = [
    "PiecewiseLinear",
    "ProxTerm",
    "prox_box",
    "prox_hinge_box",
    "default_combined_prox",
    "zero_term",
    "box_indicator",
    "nonneg_indicator",
    "abs_term",
    "squared_term",
    "separable_term",
    "block_term",
]


def prox_box(lower, upper, u):
    """Clamp ``u`` componentwise into ``[lower, upper]``.

    ``lower`` and ``upper`` may be scalars or arrays broadcastable to ``u``.
    A scalar ``u`` gives a float back.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if np.any(lower > upper):
        raise ConfigError("prox_box: lower bound exceeds upper bound")
    out = np.clip(u, lower, upper)
    if np.ndim(out) == 0:
        return float(out)
    return out


def _hinge_slopes(lam, slope):
    # slopes of lam * max(slope * (x - knee), 0) left and right of the knee
    if slope >= 0:
        return 0.0, lam * slope
    return lam * slope, 0.0


def prox_hinge_box(lam, slope, knee, lower, upper, step, u):
    """Prox of ``g(x) = lam * max(slope * (x - knee), 0) + indicator[lower, upper]``.

    Closed form: solve on each affine piece, fall back to the knee, then clamp.
    Clamping after the unconstrained prox is exact for convex functions on the
    real line.
    """
    if lower > upper:
        raise ConfigError("prox_hinge_box: empty interval [%g, %g]" % (lower, upper))
    if step <= 0:
        raise ConfigError("prox_hinge_box: step must be positive")
    s_left, s_right = _hinge_slopes(lam, slope)
    x = u - step * s_left
    if x >= knee:
        x = u - step * s_right
        if x <= knee:
            x = knee
    return min(max(x, lower), upper)


@dataclass(frozen=True)
class PiecewiseLinear:
    """Convex piecewise-linear function of one variable restricted to an interval.

    ``value(x) = intercept + slopes[0] * x + sum_j (slopes[j+1] - slopes[j]) * max(x - knots[j], 0)``
    on ``[lower, upper]`` and ``+inf`` outside.
    """

    lower: float = -INF
    upper: float = INF
    knots: tuple = ()
    slopes: tuple = (0.0,)
    intercept: float = 0.0

    def __post_init__(self):
        if self.lower > self.upper:
            raise ConfigError("PiecewiseLinear: empty interval")
        if len(self.slopes) != len(self.knots) + 1:
            raise ConfigError("PiecewiseLinear: need len(knots) + 1 slopes")
        if any(b < a for a, b in zip(self.knots, self.knots[1:])):
            raise ConfigError("PiecewiseLinear: knots must be sorted")
        if any(b < a for a, b in zip(self.slopes, self.slopes[1:])):
            raise ConfigError("PiecewiseLinear: slopes must be nondecreasing (convexity)")

    @classmethod
    def hinge(cls, lam, slope, knee, lower=-INF, upper=INF):
        s_left, s_right = _hinge_slopes(lam, slope)
        return cls(lower, upper, (float(knee),), (s_left, s_right), -s_left * knee)

    def value(self, x):
        if x < self.lower or x > self.upper:
            return INF
        v = self.intercept + self.slopes[0] * x
        for knot, s0, s1 in zip(self.knots, self.slopes, self.slopes[1:]):
            if x > knot:
                v += (s1 - s0) * (x - knot)
        return v

    def scaled(self, factor):
        """``factor * self``; a zero factor drops the function entirely (0 * indicator = 0)."""
        if factor == 0:
            return PiecewiseLinear()
        return PiecewiseLinear(
            self.lower,
            self.upper,
            self.knots,
            tuple(factor * s for s in self.slopes),
            factor * self.intercept,
        )

    def slope_at(self, x):
        """Slope of the piece containing ``x`` (right slope at a knot)."""
        j = 0
        while j < len(self.knots) and x >= self.knots[j]:
            j += 1
        return self.slopes[j]

    def subdifferential(self, x):
        """Interval ``(lo, hi)`` of subgradients at ``x``, with the normal cone at the bounds."""
        if x < self.lower or x > self.upper:
            return (INF, -INF)
        j = 0
        while j < len(self.knots) and x > self.knots[j]:
            j += 1
        lo = self.slopes[j]
        hi = self.slopes[j + 1] if j < len(self.knots) and x == self.knots[j] else lo
        if x == self.lower:
            lo = -INF
        if x == self.upper:
            hi = INF
        return (lo, hi)

    def __add__(self, other):
        knots = tuple(sorted(set(self.knots) | set(other.knots)))
        # slope on each merged segment, sampled at an interior point
        probes = _segment_probes(knots)
        slopes = tuple(self.slope_at(p) + other.slope_at(p) for p in probes)
        return PiecewiseLinear(
            max(self.lower, other.lower),
            min(self.upper, other.upper),
            knots,
            slopes,
            self.intercept + other.intercept,
        )

    def prox(self, step, u):
        """Exact minimizer of ``step * value(x) + 0.5 * (x - u)**2``."""
        edges = (-INF,) + self.knots + (INF,)
        right = self.lower
        for j, s in enumerate(self.slopes):
            left = max(edges[j], self.lower)
            right = min(edges[j + 1], self.upper)
            if left > right:
                continue
            x = u - step * s
            if x < left:
                return left
            if x <= right:
                return x
        return right


def _segment_probes(knots):
    if not knots:
        return [0.0]
    probes = [knots[0] - 1.0]
    probes += [0.5 * (a + b) for a, b in zip(knots, knots[1:])]
    probes.append(knots[-1] + 1.0)
    return probes


@dataclass(frozen=True)
class ProxTerm:
    """A proper convex lsc function given by its prox, value and domain oracles."""

    prox: Callable[[float, np.ndarray], np.ndarray]
    value: Callable[[np.ndarray], float]
    in_domain: Callable[[np.ndarray], bool]
    name: str = "g"
    pieces: Optional[tuple] = None
    is_zero: bool = False
    is_indicator: bool = False


def zero_term(name="zero"):
    """The function identically zero; its prox is the identity."""
    return ProxTerm(
        prox=lambda step, u: np.array(u, dtype=float, copy=True),
        value=lambda z: 0.0,
        in_domain=lambda z: True,
        name=name,
        is_zero=True,
    )


def separable_term(pieces: Sequence[PiecewiseLinear], name="separable"):
    """Sum of 1-D piecewise-linear functions, one per coordinate."""
    pieces = tuple(pieces)
    n = len(pieces)

    def prox(step, u):
        u = np.asarray(u, dtype=float)
        if u.shape != (n,):
            raise DimensionError("%s: expected %d coordinates, got %s" % (name, n, u.shape))
        return np.array([p.prox(step, ui) for p, ui in zip(pieces, u)])

    def value(z):
        return float(sum(p.value(zi) for p, zi in zip(pieces, z)))

    def in_domain(z):
        return all(p.lower <= zi <= p.upper for p, zi in zip(pieces, z))

    indicator = all(p.slopes == (0.0,) and p.intercept == 0 for p in pieces)
    return ProxTerm(prox, value, in_domain, name=name, pieces=pieces, is_indicator=indicator)


def box_indicator(lower, upper, name="box"):
    """Indicator of the box ``[lower, upper]`` (arrays of equal length)."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if lower.shape != upper.shape or lower.ndim != 1:
        raise DimensionError("box_indicator: bounds must be 1-D arrays of equal length")
    if np.any(lower > upper):
        raise ConfigError("box_indicator: lower bound exceeds upper bound")
    pieces = tuple(PiecewiseLinear(lo, hi) for lo, hi in zip(lower, upper))

    def value(z):
        return 0.0 if in_domain(z) else INF

    def in_domain(z):
        return bool(np.all(z >= lower) and np.all(z <= upper))

    return ProxTerm(
        prox=lambda step, u: np.clip(u, lower, upper),
        value=value,
        in_domain=in_domain,
        name=name,
        pieces=pieces,
        is_indicator=True,
    )


def nonneg_indicator(mask, name="nonneg"):
    """Indicator of ``{z : z[mask] >= 0}``; ``mask`` is a boolean array."""
    mask = np.asarray(mask, dtype=bool)
    lower = np.where(mask, 0.0, -INF)
    upper = np.full(mask.shape, INF)
    term = box_indicator(lower, upper, name=name)
    return term


def abs_term(scale=1.0, dim=1, name="abs"):
    """``scale * ||z||_1``; prox is soft thresholding."""
    pieces = tuple(PiecewiseLinear(knots=(0.0,), slopes=(-scale, scale)) for _ in range(dim))

    def prox(step, u):
        u = np.asarray(u, dtype=float)
        return np.sign(u) * np.maximum(np.abs(u) - step * scale, 0.0)

    return ProxTerm(
        prox=prox,
        value=lambda z: float(scale * np.sum(np.abs(z))),
        in_domain=lambda z: True,
        name=name,
        pieces=pieces,
    )


def squared_term(scale=1.0, name="sq"):
    """``scale * ||z||^2``; prox is a shrinkage ``u / (1 + 2 * step * scale)``."""
    return ProxTerm(
        prox=lambda step, u: np.asarray(u, dtype=float) / (1.0 + 2.0 * step * scale),
        value=lambda z: float(scale * np.dot(z, z)),
        in_domain=lambda z: True,
        name=name,
    )


def block_term(terms: Sequence[ProxTerm], sizes: Sequence[int], name="block"):
    """Block-separable sum ``g(z) = sum_i terms[i](z_i)`` over consecutive blocks."""
    terms = tuple(terms)
    cuts = np.cumsum([0] + list(sizes))

    def split(z):
        return [z[a:b] for a, b in zip(cuts[:-1], cuts[1:])]

    def prox(step, u):
        u = np.asarray(u, dtype=float)
        return np.concatenate([t.prox(step, ui) for t, ui in zip(terms, split(u))])

    def value(z):
        return float(sum(t.value(zi) for t, zi in zip(terms, split(z))))

    def in_domain(z):
        return all(t.in_domain(zi) for t, zi in zip(terms, split(z)))

    pieces = None
    if all(t.pieces is not None for t in terms):
        pieces = tuple(p for t in terms for p in t.pieces)
    return ProxTerm(
        prox,
        value,
        in_domain,
        name=name,
        pieces=pieces,
        is_zero=all(t.is_zero for t in terms),
        is_indicator=all(t.is_indicator or t.is_zero for t in terms),
    )


def default_combined_prox(g2: ProxTerm, g1: ProxTerm, step, sigma, u):
    """Prox of ``step * (g2 + sigma * g1)`` for the supported composition patterns.

    Patterns: ``g1`` zero, ``g2`` zero, or both coordinatewise separable.
    Anything else has to come with a user-supplied combined prox.
    """
    if g1.is_zero or sigma == 0:
        return g2.prox(step, u)
    if g2.is_zero:
        return g1.prox(step * sigma, u)
    if g1.pieces is not None and g2.pieces is not None:
        u = np.asarray(u, dtype=float)
        return np.array(
            [(p2 + p1.scaled(sigma)).prox(step, ui) for p2, p1, ui in zip(g2.pieces, g1.pieces, u)]
        )
    raise ConfigError(
        "no closed-form prox for %s + sigma * %s; supply combined_prox directly" % (g2.name, g1.name)
    )


def supports_default_prox(g2: ProxTerm, g1: ProxTerm) -> bool:
    return g1.is_zero or g2.is_zero or (g1.pieces is not None and g2.pieces is not None)
