"""Operators, the Tikhonov-blended data pair and the hierarchical problem container."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, DimensionError, DomainError, NonFiniteError
from .prox import ProxTerm, default_combined_prox, supports_default_prox

__all__ = [
    "as_vector",
    "spectral_norm",
    "Operator",
    "CombinedData",
    "HierarchicalProblem",
    "eval_combined_operator",
    "combined_lipschitz",
]


def as_vector(z, dim=None, name="z"):
    """Return ``z`` as a finite 1-D float64 array, optionally checking its length."""
    v = np.array(z, dtype=float, copy=True).reshape(-1)
    if dim is not None and v.shape[0] != dim:
        raise DimensionError("%s has dimension %d, expected %d" % (name, v.shape[0], dim))
    if not np.all(np.isfinite(v)):
        raise NonFiniteError("%s contains non-finite entries" % name)
    return v


def spectral_norm(matrix, max_iter=200, tol=1e-10, seed=0):
    """Largest singular value of ``matrix`` by power iteration on ``M^T M``.

    Stops when the relative change of the estimate drops below ``tol``.
    """
    M = np.atleast_2d(np.asarray(matrix, dtype=float))
    if not np.any(M):
        return 0.0
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(M.shape[1])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iter):
        w = M.T @ (M @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        new = math.sqrt(nw)
        if abs(new - est) <= tol * new:
            est = new
            break
        est = new
    return est


@dataclass(frozen=True)
class Operator:
    """A monotone map ``F: R^n -> R^n`` with declared Lipschitz and strong-monotonicity moduli.

    The moduli are declarations used by the step-size rules; they are not
    enforced per call (see :mod:`hvi.checks` for spot checks).
    """

    fn: Callable[[np.ndarray], np.ndarray]
    lipschitz: float
    strong_mono: float = 0.0
    name: str = "F"
    matrix: Optional[np.ndarray] = None
    offset: Optional[np.ndarray] = None

    def __post_init__(self):
        if not (self.lipschitz >= 0) or not (self.strong_mono >= 0):
            raise ConfigError("%s: moduli must be nonnegative" % self.name)

    def __call__(self, z):
        return self.fn(z)

    @classmethod
    def affine(cls, matrix, offset=None, name="F", lipschitz=None, strong_mono=None, inflate=1.01):
        """``z -> matrix @ z + offset``.

        Unless given, the Lipschitz constant is the power-iteration spectral
        norm inflated by ``inflate`` and the strong-monotonicity modulus is the
        smallest eigenvalue of the symmetric part (clipped at zero).
        """
        M = np.array(matrix, dtype=float)
        n = M.shape[0]
        if M.ndim != 2 or M.shape[1] != n:
            raise DimensionError("%s: affine operator needs a square matrix" % name)
        c = np.zeros(n) if offset is None else as_vector(offset, n, name + ".offset")
        if lipschitz is None:
            lipschitz = inflate * spectral_norm(M)
        if strong_mono is None:
            lam = float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])
            strong_mono = lam if lam > 1e-12 else 0.0
        M.setflags(write=False)
        c.setflags(write=False)
        if np.any(c):
            fn = lambda z: M @ z + c  # noqa: E731
        else:
            fn = lambda z: M @ z  # noqa: E731
        return cls(fn, float(lipschitz), float(strong_mono), name, M, c)

    @classmethod
    def zero(cls, dim, name="0", lipschitz=0.0):
        """Constant zero map; ``lipschitz`` may be set to any nonnegative bound."""
        return cls.affine(np.zeros((dim, dim)), name=name, lipschitz=lipschitz, strong_mono=0.0)


def combined_lipschitz(L2, L1, sigma):
    """Lipschitz constant ``L2 + sigma * L1`` of ``F2 + sigma * F1``."""
    return L2 + sigma * L1


@dataclass(frozen=True)
class CombinedData:
    """Lower data ``(F2, g2)`` and upper data ``(F1, g1)``.

    ``combined_prox(step, sigma, u)`` must return the prox of
    ``step * (g2 + sigma * g1)``. When omitted it is built from
    :func:`hvi.prox.default_combined_prox`; unsupported pairs fail here.
    """

    F2: Operator
    F1: Operator
    g2: ProxTerm
    g1: ProxTerm
    combined_prox: Optional[Callable] = None

    def __post_init__(self):
        if self.combined_prox is None:
            if not supports_default_prox(self.g2, self.g1):
                raise ConfigError(
                    "no closed-form prox for %s + sigma * %s; supply combined_prox directly"
                    % (self.g2.name, self.g1.name)
                )
            object.__setattr__(self, "combined_prox", partial(default_combined_prox, self.g2, self.g1))

    def prox(self, step, sigma, u):
        return self.combined_prox(step, sigma, u)

    def G(self, sigma, z):
        """Extended-real value of ``g2 + sigma * g1`` (``0 * inf`` counts as 0)."""
        v2 = self.g2.value(z)
        if sigma == 0:
            return v2
        return v2 + sigma * self.g1.value(z)


def eval_combined_operator(data: CombinedData, sigma, z, return_parts=False):
    """``F2(z) + sigma * F1(z)``.

    With ``return_parts`` the raw pair ``(F2(z), F1(z))`` is returned as well,
    so callers can re-weight it for another ``sigma`` without re-evaluating.
    """
    if sigma < 0:
        raise ConfigError("sigma must be nonnegative")
    z = np.asarray(z, dtype=float)
    f2 = np.asarray(data.F2(z), dtype=float)
    f1 = np.asarray(data.F1(z), dtype=float)
    for op, val in ((data.F2, f2), (data.F1, f1)):
        if val.shape != z.shape:
            raise DimensionError("%s maps shape %s to %s" % (op.name, z.shape, val.shape))
        if not np.all(np.isfinite(val)):
            raise NonFiniteError("operator %s returned non-finite values" % op.name)
    v = f2 + sigma * f1
    if return_parts:
        return v, f2, f1
    return v


@dataclass(frozen=True)
class HierarchicalProblem:
    """Upper HVI ``(F1, g1)`` posed over the solution set of the lower HVI ``(F2, g2)``.

    Optional ground truth: ``solution`` (the hierarchical solution) and
    ``lower_set`` (a descriptor of the lower solution set with ``project``,
    ``distance``, ``contains`` and ``sample``). ``readout`` maps an iterate and
    the current regularization weight to the quantity of interest reported by
    the harness (e.g. the AVE solution of the GAVE instance).
    """

    name: str
    data: CombinedData
    dim: int
    solution: Optional[np.ndarray] = None
    lower_set: Optional[object] = None
    weak_sharp: Optional[tuple] = None
    sample_box: Optional[tuple] = None
    feas_anchors: Optional[np.ndarray] = None
    opt_anchors: Optional[np.ndarray] = None
    x0: Optional[np.ndarray] = None
    readout: Optional[Callable] = None
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.solution is not None:
            z = as_vector(self.solution, self.dim, "solution")
            for g in (self.data.g1, self.data.g2):
                if not g.in_domain(z):
                    raise DomainError("solution point lies outside dom(%s)" % g.name)
            object.__setattr__(self, "solution", z)
        if self.weak_sharp is not None:
            alpha, rho = self.weak_sharp
            if alpha <= 0 or rho < 1:
                raise ConfigError("weak sharpness needs alpha > 0 and rho >= 1")

    @property
    def F1(self):
        return self.data.F1

    @property
    def F2(self):
        return self.data.F2

    @property
    def g1(self):
        return self.data.g1

    @property
    def g2(self):
        return self.data.g2

    def initial_point(self):
        """User-supplied start, else the zero vector pushed into dom(g2) by its prox."""
        if self.x0 is not None:
            return as_vector(self.x0, self.dim, "x0")
        return np.asarray(self.data.g2.prox(1.0, np.zeros(self.dim)), dtype=float)
