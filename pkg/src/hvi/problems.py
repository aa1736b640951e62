"""Problem zoo.

* ``gnep``: a 4-player hierarchical Nash game with a segment of lower-level
  equilibria and a unique upper-level selection.
* ``gave``: the generalized absolute value equation ``Ax + B|x| = b`` from a
  fourth-order finite-difference discretization of ``u'' ... = f``, posed as a
  linearly constrained min-max problem.
* ``minmax`` and ``bilevel``: generic builders.
* small 1-D toys used by the tests and the check suite.

Every builder returns an immutable :class:`~hvi.core.HierarchicalProblem`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import CombinedData, HierarchicalProblem, Operator, spectral_norm
from .errors import ConfigError, DimensionError
from .prox import (
    PiecewiseLinear,
    ProxTerm,
    abs_term,
    block_term,
    nonneg_indicator,
    prox_hinge_box,
    squared_term,
    zero_term,
)
from .sets import AffineSet, PointSet, SegmentSet

__all__ = [
    "build_gnep",
    "gnep_costs",
    "build_gave",
    "gave_system",
    "solve_ave_oracle",
    "gave_analytic",
    "MinMaxSpec",
    "build_minmax",
    "build_simple_bilevel",
    "toy_strong",
    "toy_cross",
    "toy_identity",
    "toy_abs",
    "toy_quadratic",
    "register_problem",
    "build_problem",
    "PROBLEMS",
]


# --------------------------------------------------------------------------- GNEP

GNEP_LOWER = np.array([-100.0, 0.0, 0.0, 0.0])
GNEP_UPPER = np.array([50.0, 50.0, 100.0, 50.0])
GNEP_SOLUTION = np.array([-50.0, 15.0, 50.0, 35.0])
GNEP_KNEE = 15.0
GNEP_HINGE = 10.0


def gnep_costs(h4_duplicate=False):
    """Player cost functions of the game, as plain callables of the full profile ``y``.

    Returns ``(lower, upper)`` where ``lower[v]`` is player ``v``'s lower-level
    cost and ``upper`` is a list of ``(cost, owned_coordinates)`` pairs.
    ``h4_duplicate`` counts ``y[1]`` twice in the fourth player's cost.
    """
    w = 2.0 if h4_duplicate else 1.0
    lower = [
        lambda y: 0.5 * y[0] ** 2 + y[0] * (y[1] + 2 * y[2] + y[3] - 100),
        lambda y: 0.5 * y[1] ** 2 + y[1] * (y[0] + y[2] + y[3] - 50),
        lambda y: 0.5 * y[2] ** 2 + y[2] * (y[1] + y[3] - 100),
        lambda y: 0.5 * y[3] ** 2 + y[3] * (y[0] + w * y[1] + y[2] - 50),
    ]
    upper = [
        (lambda y: (y[1] - 20) ** 2 + (y[3] - 50) ** 2 + (y[1] + y[3]) * (y[0] + y[2]), (1, 3)),
        (lambda y: y[0] ** 2 + y[0] * (y[1] + y[2]) + y[2] ** 2 + y[2] * (y[1] + y[3]), (0, 2)),
    ]
    return lower, upper


def _gnep_matrices(h4_duplicate):
    J2 = np.array(
        [
            [1.0, 1.0, 2.0, 1.0],
            [1.0, 1.0, 1.0, 1.0],
            [0.0, 1.0, 1.0, 1.0],
            [1.0, 2.0 if h4_duplicate else 1.0, 1.0, 1.0],
        ]
    )
    c2 = np.array([-100.0, -50.0, -100.0, -50.0])
    J1 = np.array(
        [
            [2.0, 1.0, 1.0, 0.0],
            [1.0, 2.0, 1.0, 0.0],
            [1.0, 1.0, 2.0, 1.0],
            [1.0, 0.0, 1.0, 2.0],
        ]
    )
    c1 = np.array([0.0, -40.0, 0.0, -100.0])
    return J2, c2, J1, c1


def _pseudo_gradient_fd(costs_with_coords, y, h=1e-4):
    # central differences of each cost in its own coordinates
    g = np.zeros(4)
    for cost, coords in costs_with_coords:
        for i in coords:
            e = np.zeros(4)
            e[i] = h
            g[i] = (cost(y + e) - cost(y - e)) / (2 * h)
    return g


def _check_gnep_coefficients(J2, c2, J1, c1, h4_duplicate, tol=1e-6):
    lower, upper = gnep_costs(h4_duplicate)
    lower_pairs = [(c, (i,)) for i, c in enumerate(lower)]
    rng = np.random.default_rng(12345)
    for y in np.vstack([GNEP_SOLUTION, rng.uniform(GNEP_LOWER, GNEP_UPPER, size=(4, 4))]):
        for pairs, J, c, label in ((lower_pairs, J2, c2, "F2"), (upper, J1, c1, "F1")):
            fd = _pseudo_gradient_fd(pairs, y)
            err = np.max(np.abs(fd - (J @ y + c)))
            if err > tol * max(1.0, np.max(np.abs(fd))):
                raise AssertionError("GNEP %s coefficients disagree with the cost functions (%.3g)" % (label, err))


def _gnep_g2():
    pieces = [PiecewiseLinear(GNEP_LOWER[i], GNEP_UPPER[i]) for i in range(4)]
    pieces[1] = PiecewiseLinear.hinge(GNEP_HINGE, -1.0, GNEP_KNEE, GNEP_LOWER[1], GNEP_UPPER[1])
    pieces = tuple(pieces)
    lo, hi = GNEP_LOWER, GNEP_UPPER

    def prox(step, u):
        x = np.clip(u, lo, hi)
        x[1] = prox_hinge_box(GNEP_HINGE, -1.0, GNEP_KNEE, lo[1], hi[1], step, u[1])
        return x

    def in_domain(z):
        return bool(np.all(z >= lo) and np.all(z <= hi))

    def value(z):
        if not in_domain(z):
            return math.inf
        return GNEP_HINGE * max(GNEP_KNEE - z[1], 0.0)

    return ProxTerm(prox, value, in_domain, name="g2_gnep", pieces=pieces)


def gnep_segment():
    """Lower-level equilibria ``{(-50, s, 50, 50 - s) : 15 <= s <= 50}``."""
    return SegmentSet(np.array([-50.0, 0.0, 50.0, 50.0]), np.array([0.0, 1.0, 0.0, -1.0]), 15.0, 50.0)


def gnep_box_grid(levels=3):
    """Regular grid of the strategy box, ``levels`` points per axis."""
    axes = [np.linspace(GNEP_LOWER[i], GNEP_UPPER[i], levels) for i in range(4)]
    return np.array(np.meshgrid(*axes, indexing="ij")).reshape(4, -1).T


def build_gnep(h4_duplicate=False, anchors=64, grid_levels=3):
    """The hierarchical 4-player game.

    Parameters
    ----------
    h4_duplicate : bool
        Count ``y[1]`` twice in player 4's lower-level cost. That reading
        makes ``F2`` non-monotone and moves the equilibrium set, so the
        ground truth is only attached for the default reading.
    anchors : int
        Number of segment samples in the default anchor sets.
    grid_levels : int
        Points per axis of the box grid added to the feasibility anchors.
    """
    J2, c2, J1, c1 = _gnep_matrices(h4_duplicate)
    _check_gnep_coefficients(J2, c2, J1, c1, h4_duplicate)
    F2 = Operator.affine(J2, c2, name="F2_gnep")
    F1 = Operator.affine(J1, c1, name="F1_gnep")
    data = CombinedData(F2, F1, _gnep_g2(), zero_term("g1_gnep"))
    seg = gnep_segment()
    seg_pts = np.vstack([seg.sample(anchors), GNEP_SOLUTION])
    notes = {"h4_duplicate": h4_duplicate}
    if h4_duplicate:
        return HierarchicalProblem(
            "gnep_dup", data, 4, sample_box=(GNEP_LOWER, GNEP_UPPER), notes=notes
        )
    feas = np.vstack([seg_pts, gnep_box_grid(grid_levels)]) if grid_levels else seg_pts
    return HierarchicalProblem(
        "gnep",
        data,
        4,
        solution=GNEP_SOLUTION.copy(),
        lower_set=seg,
        sample_box=(GNEP_LOWER, GNEP_UPPER),
        feas_anchors=feas,
        opt_anchors=seg_pts,
        notes=notes,
    )


# --------------------------------------------------------------------------- GAVE


def gave_analytic(x):
    """Reference solution ``0.1961 sin x - 4 cos x - x^2 + 3`` of the boundary value problem."""
    x = np.asarray(x, dtype=float)
    return 0.1961 * np.sin(x) - 4.0 * np.cos(x) - x**2 + 3.0


def gave_system(n, u0=-1.0, u_end=0.0, f=None):
    """Fourth-order five-point discretization: returns ``(A, b, grid)``.

    Boundary rows use the one-sided stencils ``(20, -6, -4, 1)`` and
    ``(-16, 30, -16, 1)``; all rows are scaled by ``1 / (12 h^2)``.
    """
    if n < 5:
        raise ConfigError("GAVE discretization needs n >= 5 (got %d)" % n)
    h = 1.0 / (n + 1)
    grid = h * np.arange(1, n + 1)
    f = (lambda x: x**2 - 1.0) if f is None else f
    A = np.zeros((n, n))
    for i in range(2, n - 2):
        A[i, i - 2 : i + 3] = (1.0, -16.0, 30.0, -16.0, 1.0)
    A[0, :4] = (20.0, -6.0, -4.0, 1.0)
    A[1, :4] = (-16.0, 30.0, -16.0, 1.0)
    A[n - 2, n - 4 :] = (1.0, -16.0, 30.0, -16.0)
    A[n - 1, n - 4 :] = (1.0, -4.0, -6.0, 20.0)
    s = 12.0 * h * h
    A /= s
    b = np.asarray(f(grid), dtype=float).copy()
    b[0] += 11.0 * u0 / s
    b[1] -= u0 / s
    b[n - 2] -= u_end / s
    b[n - 1] += 11.0 * u_end / s
    return A, b, grid


def solve_ave_oracle(A, b, B=None, tol=1e-15, max_iter=1000):
    """Solve ``Ax + B|x| = b`` by the Picard iteration ``x <- A^{-1}(b - B|x|)``.

    Converges when ``||A^{-1} B|| < 1``; finished with generalized Newton
    steps which terminate once the sign pattern settles.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    B = np.eye(A.shape[0]) if B is None else np.asarray(B, dtype=float)
    x = np.linalg.solve(A, b)
    for _ in range(max_iter):
        x_new = np.linalg.solve(A, b - B @ np.abs(x))
        done = np.linalg.norm(x_new - x) <= tol * max(1.0, np.linalg.norm(x_new))
        x = x_new
        if done:
            break
    for _ in range(20):
        x_new = np.linalg.solve(A + B @ np.diag(np.sign(x)), b)
        if np.array_equal(np.sign(x_new), np.sign(x)):
            x = x_new
            break
        x = x_new
    return x


def ave_residual(A, b, x, B=None):
    """Relative residual ``||Ax + B|x| - b|| / ||b||``."""
    B = np.eye(A.shape[0]) if B is None else B
    return float(np.linalg.norm(A @ x + B @ np.abs(x) - b) / np.linalg.norm(b))


def build_gave(n=9, u0=-1.0, u_end=0.0):
    """AVE ``Ax + |x| = b`` as a hierarchical min-max problem on ``z = (x, y, w)``.

    The upper level is the saddle operator of ``(b - (A + B)x)^T y`` with
    ``x >= 0`` and ``w >= 0``; the lower level penalizes the coupling
    ``x - (B - A)^T y - w = 0`` through ``F2 = M^T M``.

    ``readout(z, sigma)`` returns the AVE estimate ``x + M z / sigma``: the
    x-block plus the multiplier of the coupling constraint. On this instance
    the AVE solution is negative at every node, so the x-block itself is
    driven to zero and the solution is carried by the multiplier.
    """
    A, b, grid = gave_system(n, u0, u_end)
    I = np.eye(n)
    B = I
    AB = A + B
    M = np.hstack([I, -(B - A).T, -I])
    Z = np.zeros((n, n))
    J1 = np.block([[Z, -AB.T, Z], [AB, Z, Z], [Z, Z, Z]])
    c1 = np.concatenate([np.zeros(n), -b, np.zeros(n)])
    F1 = Operator.affine(J1, c1, name="F1_gave", strong_mono=0.0)
    F2 = Operator.affine(M.T @ M, name="F2_gave", strong_mono=0.0)
    mask = np.concatenate([np.ones(n, bool), np.zeros(n, bool), np.ones(n, bool)])
    data = CombinedData(F2, F1, zero_term("g2_gave"), nonneg_indicator(mask, "g1_gave"))
    M.setflags(write=False)

    def readout(z, sigma):
        z = np.asarray(z, dtype=float)
        return z[:n] + (M @ z) / sigma

    oracle = solve_ave_oracle(A, b, B)
    notes = {
        "A": A,
        "b": b,
        "B": B,
        "grid": grid,
        "oracle": oracle,
        "analytic": gave_analytic(grid),
    }
    return HierarchicalProblem(
        "gave",
        data,
        3 * n,
        lower_set=AffineSet(M, np.zeros(n)),
        readout=readout,
        notes=notes,
    )


# --------------------------------------------------------------------------- generic builders


def _as_operator(op, dim, name, lipschitz=None, strong_mono=0.0):
    if op is None:
        return Operator.zero(dim, name)
    if isinstance(op, Operator):
        return op
    if isinstance(op, np.ndarray) and op.ndim == 2:
        return Operator.affine(op, name=name)
    if lipschitz is None:
        raise ConfigError("%s: a callable operator needs a declared Lipschitz constant" % name)
    return Operator(op, float(lipschitz), float(strong_mono), name)


@dataclass
class MinMaxSpec:
    """Data of ``min_x max_y phi(x) + f1(x) + <x, K y> - f2(y) - psi(y)`` s.t. ``A x + B y = c``.

    ``grad_f1`` and ``grad_f2`` are callables (with ``L_f1``/``L_f2``),
    :class:`Operator` instances, or ``None`` for zero.
    """

    K: np.ndarray
    A: np.ndarray
    B: np.ndarray
    c: np.ndarray
    grad_f1: Optional[Callable] = None
    grad_f2: Optional[Callable] = None
    L_f1: float = 0.0
    L_f2: float = 0.0
    phi: Optional[ProxTerm] = None
    psi: Optional[ProxTerm] = None
    name: str = "minmax"


def build_minmax(spec: MinMaxSpec):
    """Saddle operator ``F1 = (grad f1(x) + K y, grad f2(y) - K^T x)`` over the feasible coupling.

    ``F2(x, y) = (A^T r, B^T r)`` with residual ``r = Ax + By - c``,
    ``g1 = phi (+) psi`` and ``g2 = 0``.
    """
    K = np.atleast_2d(np.asarray(spec.K, dtype=float))
    A = np.atleast_2d(np.asarray(spec.A, dtype=float))
    B = np.atleast_2d(np.asarray(spec.B, dtype=float))
    c = np.asarray(spec.c, dtype=float).reshape(-1)
    p, q = K.shape
    if A.shape[1] != p or B.shape[1] != q or A.shape[0] != B.shape[0] or c.shape[0] != A.shape[0]:
        raise DimensionError(
            "minmax: need K (p x q), A (m x p), B (m x q), c (m,); got K %s, A %s, B %s, c %s"
            % (K.shape, A.shape, B.shape, c.shape)
        )
    gf1 = _as_operator(spec.grad_f1, p, "grad_f1", spec.L_f1)
    gf2 = _as_operator(spec.grad_f2, q, "grad_f2", spec.L_f2)
    Kt = K.T.copy()

    def F1_fn(z):
        x, y = z[:p], z[p:]
        return np.concatenate([gf1.fn(x) + K @ y, gf2.fn(y) - Kt @ x])

    L1 = max(gf1.lipschitz, gf2.lipschitz) + 1.01 * spectral_norm(K)
    F1 = Operator(F1_fn, L1, 0.0, spec.name + ".F1")
    AB = np.hstack([A, B])
    F2 = Operator.affine(AB.T @ AB, -AB.T @ c, name=spec.name + ".F2", strong_mono=0.0)
    phi = spec.phi or zero_term("phi")
    psi = spec.psi or zero_term("psi")
    g1 = block_term([phi, psi], [p, q], name="phi+psi")
    data = CombinedData(F2, F1, zero_term("g2"), g1)
    lower = AffineSet(AB, c) if np.any(AB) else None
    return HierarchicalProblem(spec.name, data, p + q, lower_set=lower)


def build_simple_bilevel(
    grad_f1,
    g1,
    grad_f2,
    g2,
    dim,
    L_f1=None,
    L_f2=None,
    mu_f1=0.0,
    name="bilevel",
    solution=None,
    lower_set=None,
    combined_prox=None,
):
    """``min f1 + g1`` over ``argmin f2 + g2``: ``F1 = grad f1`` and ``F2 = grad f2``."""
    F1 = _as_operator(grad_f1, dim, name + ".grad_f1", L_f1, mu_f1)
    F2 = _as_operator(grad_f2, dim, name + ".grad_f2", L_f2)
    data = CombinedData(F2, F1, g2 or zero_term("g2"), g1 or zero_term("g1"), combined_prox)
    return HierarchicalProblem(name, data, dim, solution=solution, lower_set=lower_set)


# --------------------------------------------------------------------------- toys


def _scalar(a, c=0.0, name="F", lipschitz=None, strong_mono=None):
    return Operator.affine([[a]], [c], name=name, lipschitz=lipschitz, strong_mono=strong_mono)


def toy_strong():
    """``F1(z) = z - 3`` (mu = 1), ``F2 = 0`` declared 1-Lipschitz; solution 3."""
    F1 = _scalar(1.0, -3.0, "z-3", lipschitz=1.0, strong_mono=1.0)
    F2 = Operator.zero(1, "0", lipschitz=1.0)
    data = CombinedData(F2, F1, zero_term(), zero_term())
    return HierarchicalProblem("toy_strong", data, 1, solution=np.array([3.0]), x0=np.array([0.0]))


def toy_cross():
    """``F2(z) = z``, ``F1(z) = z - 3``: the lower level pins ``z = 0``."""
    F2 = _scalar(1.0, 0.0, "z", lipschitz=1.0, strong_mono=1.0)
    F1 = _scalar(1.0, -3.0, "z-3", lipschitz=1.0, strong_mono=1.0)
    data = CombinedData(F2, F1, zero_term(), zero_term())
    return HierarchicalProblem(
        "toy_cross",
        data,
        1,
        solution=np.array([0.0]),
        lower_set=PointSet(np.array([0.0])),
        x0=np.array([1.0]),
    )


def toy_identity():
    """``F2(z) = z``, ``F1 = 0``; solution 0, started at 1."""
    F2 = _scalar(1.0, 0.0, "z", lipschitz=1.0, strong_mono=1.0)
    data = CombinedData(F2, Operator.zero(1), zero_term(), zero_term())
    return HierarchicalProblem(
        "toy_identity",
        data,
        1,
        solution=np.array([0.0]),
        lower_set=PointSet(np.array([0.0])),
        x0=np.array([1.0]),
        sample_box=(np.array([-5.0]), np.array([5.0])),
    )


def toy_abs():
    """``F2 = 0``, ``g2 = |x|``: the lower solution set ``{0}`` is (1, 1)-weakly sharp."""
    F1 = _scalar(1.0, -1.0, "z-1", lipschitz=1.0, strong_mono=1.0)
    data = CombinedData(Operator.zero(1), F1, abs_term(1.0, 1), zero_term())
    return HierarchicalProblem(
        "toy_abs",
        data,
        1,
        solution=np.array([0.0]),
        lower_set=PointSet(np.array([0.0])),
        weak_sharp=(1.0, 1.0),
        sample_box=(np.array([-5.0]), np.array([5.0])),
        x0=np.array([2.0]),
    )


def toy_quadratic():
    """``F2 = 0``, ``g2 = x^2``: ``{0}`` is (2, 2)-weakly sharp."""
    F1 = _scalar(1.0, -1.0, "z-1", lipschitz=1.0, strong_mono=1.0)
    data = CombinedData(Operator.zero(1), F1, squared_term(1.0), zero_term())
    return HierarchicalProblem(
        "toy_quadratic",
        data,
        1,
        solution=np.array([0.0]),
        lower_set=PointSet(np.array([0.0])),
        weak_sharp=(2.0, 2.0),
        sample_box=(np.array([-5.0]), np.array([5.0])),
        x0=np.array([2.0]),
    )


# --------------------------------------------------------------------------- registry


def _minmax_default(p=3, q=3, m=2, seed=0):
    rng = np.random.default_rng(seed)
    spec = MinMaxSpec(
        K=rng.standard_normal((p, q)),
        A=rng.standard_normal((m, p)),
        B=rng.standard_normal((m, q)),
        c=rng.standard_normal(m),
        grad_f1=np.eye(p),
        grad_f2=np.eye(q),
    )
    return build_minmax(spec)


def _bilevel_default(dim=2, c=1.0):
    """``f2 = 0.5 ||x - c||^2``, ``f1 = 0.5 ||x||^2``: the lower level pins ``x = c``."""
    target = np.full(dim, float(c))
    return build_simple_bilevel(
        Operator.affine(np.eye(dim), name="grad_f1"),
        None,
        Operator.affine(np.eye(dim), -target, name="grad_f2"),
        None,
        dim,
        solution=target,
        lower_set=PointSet(target),
    )


PROBLEMS = {
    "gnep": build_gnep,
    "gave": build_gave,
    "minmax": _minmax_default,
    "bilevel": _bilevel_default,
    "toy_strong": toy_strong,
    "toy_cross": toy_cross,
    "toy_identity": toy_identity,
    "toy_abs": toy_abs,
    "toy_quadratic": toy_quadratic,
}


def register_problem(name, builder, overwrite=False):
    """Make ``builder(**params)`` available to configs as ``problem = name``."""
    if name in PROBLEMS and not overwrite:
        raise ConfigError("problem %r is already registered" % name)
    PROBLEMS[name] = builder


def build_problem(name, **params):
    try:
        builder = PROBLEMS[name]
    except KeyError:
        raise ConfigError("unknown problem %r (known: %s)" % (name, ", ".join(sorted(PROBLEMS)))) from None
    try:
        return builder(**params)
    except TypeError as exc:
        raise ConfigError("bad parameters for problem %r: %s" % (name, exc)) from None
