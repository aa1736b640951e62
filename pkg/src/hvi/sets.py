"""Descriptors of lower-level solution sets that admit an exact projection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

__all__ = ["SegmentSet", "AffineSet", "PointSet", "dist_to_segment"]


@dataclass(frozen=True)
class SegmentSet:
    """``{base + s * direction : lo <= s <= hi}``."""

    base: np.ndarray
    direction: np.ndarray
    lo: float
    hi: float

    def __post_init__(self):
        object.__setattr__(self, "base", np.asarray(self.base, dtype=float))
        object.__setattr__(self, "direction", np.asarray(self.direction, dtype=float))
        if not np.any(self.direction):
            raise ConfigError("segment direction must be nonzero")
        if self.lo > self.hi:
            raise ConfigError("segment parameter range is empty")

    def point(self, s):
        return self.base + s * self.direction

    def parameter(self, z):
        d = self.direction
        s = float(np.dot(np.asarray(z, dtype=float) - self.base, d) / np.dot(d, d))
        return min(max(s, self.lo), self.hi)

    def project(self, z):
        return self.point(self.parameter(z))

    def distance(self, z):
        return float(np.linalg.norm(np.asarray(z, dtype=float) - self.project(z)))

    def contains(self, z, tol=1e-8):
        return self.distance(z) <= tol

    def sample(self, count):
        """``count`` uniformly spaced points including both endpoints."""
        return np.array([self.point(s) for s in np.linspace(self.lo, self.hi, count)])


def dist_to_segment(seg: SegmentSet, z):
    return seg.distance(z)


@dataclass(frozen=True)
class AffineSet:
    """``{z : matrix @ z = rhs}``, projected through the pseudo-inverse."""

    matrix: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        M = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        object.__setattr__(self, "matrix", M)
        object.__setattr__(self, "rhs", np.asarray(self.rhs, dtype=float))
        object.__setattr__(self, "_pinv", np.linalg.pinv(M))

    def project(self, z):
        z = np.asarray(z, dtype=float)
        return z - self._pinv @ (self.matrix @ z - self.rhs)

    def distance(self, z):
        return float(np.linalg.norm(np.asarray(z, dtype=float) - self.project(z)))

    def contains(self, z, tol=1e-8):
        return self.distance(z) <= tol

    def sample(self, count, scale=1.0, seed=0):
        rng = np.random.default_rng(seed)
        pts = rng.uniform(-scale, scale, size=(count, self.matrix.shape[1]))
        return np.array([self.project(p) for p in pts])


@dataclass(frozen=True)
class PointSet:
    """A singleton lower solution set."""

    point: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "point", np.asarray(self.point, dtype=float))

    def project(self, z):
        return self.point.copy()

    def distance(self, z):
        return float(np.linalg.norm(np.asarray(z, dtype=float) - self.point))

    def contains(self, z, tol=1e-8):
        return self.distance(z) <= tol

    def sample(self, count):
        return np.tile(self.point, (count, 1))
