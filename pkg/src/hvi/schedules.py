"""Step-size and regularization sequences.

Two regimes are supported:

``constant_monotone``
    ``sigma_k = a / (k + b)**delta`` with the constant step
    ``t = 1 / (sqrt(8) * (L_F2 + sigma_1 * L_F1))``, so that
    ``8 t^2 L_k^2 <= 1`` for every ``k`` since ``L_k`` is nonincreasing.

``strong_mono``
    ``sigma_k = 4 L_F2 / (mu k)``, ``t_k = 1 / (4 (L_F2 + sigma_k (L_F1 + mu)))``
    and averaging weights ``gamma_k = (k + kappa) / kappa`` with
    ``kappa = 4 (L_F1 + mu) / mu``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError

__all__ = [
    "ScheduleParams",
    "ScheduleState",
    "MonotoneSchedule",
    "StrongSchedule",
    "make_schedule",
    "sigma_poly",
    "step_constant_monotone",
    "schedule_strong",
    "check_ac_sufficient",
]

STEP_MODES = ("constant_monotone", "strong_mono")


def sigma_poly(k, a, b, delta):
    """Polynomially decaying regularization weight ``a / (k + b)**delta``."""
    if k < 1 or a <= 0 or b <= 0 or not (0 < delta <= 1):
        raise ConfigError(
            "sigma_poly needs k >= 1, a > 0, b > 0 and 0 < delta <= 1 (got k=%r a=%r b=%r delta=%r)"
            % (k, a, b, delta)
        )
    return a / (k + b) ** delta


def step_constant_monotone(L_F2, L_F1, sigma_1):
    """Largest constant step allowed by ``8 t^2 L_1^2 <= 1``."""
    L1 = L_F2 + sigma_1 * L_F1
    if L1 <= 0:
        raise ConfigError("combined Lipschitz constant is zero; supply explicit_t")
    return 1.0 / (math.sqrt(8.0) * L1)


def schedule_strong(k, L_F2, L_F1, mu):
    """``(t_k, sigma_k, gamma_k)`` of the strongly monotone schedule."""
    if mu <= 0:
        raise ConfigError("strongly monotone schedule needs mu > 0")
    if L_F2 <= 0:
        raise ConfigError("strongly monotone schedule needs L_F2 > 0")
    sigma = 4.0 * L_F2 / (mu * k)
    t = 1.0 / (4.0 * (L_F2 + sigma * (L_F1 + mu)))
    kappa = 4.0 * (L_F1 + mu) / mu
    return t, sigma, (k + kappa) / kappa


def check_ac_sufficient(delta, rho):
    """Sufficient condition ``1 > delta > 1 - 1/rho`` for the Attouch-Czarnecki summability."""
    return 1.0 > delta > 1.0 - 1.0 / rho


@dataclass(frozen=True)
class ScheduleParams:
    """Schedule description.

    ``mu``, ``L_F1`` and ``L_F2`` may be left as ``None`` and filled in from
    the problem's declared moduli by :func:`hvi.solvers.resolve_schedule`.
    """

    a: float = 1.0
    b: float = 3.0
    delta: float = 0.5
    step_mode: str = "constant_monotone"
    mu: float | None = None
    L_F1: float | None = None
    L_F2: float | None = None
    explicit_t: float | None = None

    def __post_init__(self):
        if self.step_mode not in STEP_MODES:
            raise ConfigError("step_mode must be one of %s" % ", ".join(STEP_MODES))
        if self.step_mode == "constant_monotone":
            if self.a <= 0 or self.b <= 0:
                raise ConfigError("schedule needs a > 0 and b > 0")
            if not (0 < self.delta <= 1):
                raise ConfigError("delta must lie in (0, 1]")
        elif self.mu is not None and self.mu <= 0:
            raise ConfigError("step_mode strong_mono needs mu > 0")
        if self.explicit_t is not None and self.explicit_t <= 0:
            raise ConfigError("explicit_t must be positive")
        for name in ("L_F1", "L_F2"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ConfigError("Lipschitz constants must be nonnegative")

    @property
    def resolved(self):
        return self.L_F1 is not None and self.L_F2 is not None and (
            self.step_mode != "strong_mono" or self.mu is not None
        )

    @property
    def limiting_case(self):
        """``delta = 1``: only a logarithmic feasibility bound remains."""
        return self.step_mode == "constant_monotone" and self.delta == 1.0


class MonotoneSchedule:
    """Constant step with polynomial regularization; ergodic weight ``t``."""

    def __init__(self, params: ScheduleParams):
        self.params = params
        self.sigma_1 = sigma_poly(1, params.a, params.b, params.delta)
        L1 = params.L_F2 + self.sigma_1 * params.L_F1
        if params.explicit_t is not None:
            if 8.0 * params.explicit_t**2 * L1**2 > 1.0:
                raise ConfigError("explicit_t violates 8 t^2 L_1^2 <= 1")
            self.t = params.explicit_t
        else:
            self.t = step_constant_monotone(params.L_F2, params.L_F1, self.sigma_1)

    def __call__(self, k):
        p = self.params
        return self.t, p.a / (k + p.b) ** p.delta, self.t

    def lipschitz(self, k):
        p = self.params
        return p.L_F2 + (p.a / (k + p.b) ** p.delta) * p.L_F1


class StrongSchedule:
    """Strongly monotone schedule; ergodic weight ``t_k sigma_k gamma_k``."""

    def __init__(self, params: ScheduleParams):
        self.params = params
        schedule_strong(1, params.L_F2, params.L_F1, params.mu)  # validates

    def __call__(self, k):
        p = self.params
        t, sigma, gamma = schedule_strong(k, p.L_F2, p.L_F1, p.mu)
        return t, sigma, t * sigma * gamma

    def gamma(self, k):
        p = self.params
        return schedule_strong(k, p.L_F2, p.L_F1, p.mu)[2]

    def lipschitz(self, k):
        p = self.params
        return p.L_F2 + (4.0 * p.L_F2 / (p.mu * k)) * p.L_F1


def make_schedule(params: ScheduleParams):
    if not params.resolved:
        raise ConfigError("schedule has unset Lipschitz constants or mu; resolve it against a problem first")
    if params.step_mode == "strong_mono":
        return StrongSchedule(params)
    return MonotoneSchedule(params)


@dataclass
class ScheduleState:
    """Running sums over the emitted schedule: ``T_K``, ``sum t sigma``, and the strong-mode sums."""

    k: int = 0
    t: float = math.nan
    sigma: float = math.nan
    gamma: float = 1.0
    T: float = 0.0
    sum_t_sigma: float = 0.0
    sum_t_sigma_gamma: float = 0.0
    sum_t_sigma2_gamma: float = 0.0

    def update(self, k, t, sigma, gamma=1.0):
        self.k = k
        self.t = t
        self.sigma = sigma
        self.gamma = gamma
        self.T += t
        self.sum_t_sigma += t * sigma
        self.sum_t_sigma_gamma += t * sigma * gamma
        self.sum_t_sigma2_gamma += t * sigma * sigma * gamma
