import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hvi.errors import ConfigError
from hvi.schedules import (
    MonotoneSchedule,
    ScheduleParams,
    ScheduleState,
    StrongSchedule,
    check_ac_sufficient,
    make_schedule,
    schedule_strong,
    sigma_poly,
    step_constant_monotone,
)

from oracles import product_gamma


@pytest.mark.parametrize("k,expected", [(1, 0.5), (13, 0.25)])
def test_sigma_poly_examples(k, expected):
    assert sigma_poly(k, 1.0, 3.0, 0.5) == pytest.approx(expected)


def test_sigma_poly_default_params_give_inverse_sqrt_shift():
    sched = make_schedule(ScheduleParams(L_F1=1.0, L_F2=1.0))
    for k in (1, 10, 1000):
        assert sched(k)[1] == pytest.approx(1.0 / math.sqrt(k + 3))


@pytest.mark.parametrize("args", [(0, 1, 3, 0.5), (1, 0, 3, 0.5), (1, 1, 0, 0.5), (1, 1, 3, 0.0), (1, 1, 3, 1.5)])
def test_sigma_poly_domain(args):
    with pytest.raises(ConfigError):
        sigma_poly(*args)


def test_step_constant_monotone_examples():
    assert step_constant_monotone(1.0, 0.0, 123.0) == pytest.approx(1 / math.sqrt(8))
    assert step_constant_monotone(2.0, 2.0, 0.5) == pytest.approx(1 / (math.sqrt(8) * 3))
    with pytest.raises(ConfigError):
        step_constant_monotone(0.0, 0.0, 0.5)


def test_schedule_strong_examples():
    t, s, g = schedule_strong(1, 1.0, 0.0, 1.0)
    assert (t, s, g) == pytest.approx((0.05, 4.0, 1.25))
    t, s, g = schedule_strong(4, 1.0, 0.0, 1.0)
    assert (t, s, g) == pytest.approx((0.125, 1.0, 2.0))
    # condition with L_1 = L_F2 + sigma_1 (L_F1 + mu) = 5: 0.25 + 0.4
    t, s, _ = schedule_strong(1, 1.0, 0.0, 1.0)
    assert 4 * t**2 * 5.0**2 + 2 * t * s * 1.0 == pytest.approx(0.65)
    with pytest.raises(ConfigError):
        schedule_strong(1, 1.0, 0.0, 0.0)
    with pytest.raises(ConfigError):
        schedule_strong(1, 0.0, 0.0, 1.0)


@pytest.mark.parametrize("delta,rho,expected", [(0.75, 2, True), (0.4, 2, False), (1.0, 2, False)])
def test_ac_sufficient(delta, rho, expected):
    assert check_ac_sufficient(delta, rho) is expected


def test_params_validation():
    with pytest.raises(ConfigError):
        ScheduleParams(delta=0.0)
    with pytest.raises(ConfigError):
        ScheduleParams(step_mode="adaptive")
    with pytest.raises(ConfigError):
        ScheduleParams(step_mode="strong_mono", mu=0.0)
    with pytest.raises(ConfigError):
        make_schedule(ScheduleParams())
    assert ScheduleParams(delta=1.0).limiting_case
    assert not ScheduleParams(delta=0.9).limiting_case


def test_explicit_t():
    p = ScheduleParams(L_F1=0.0, L_F2=0.0, explicit_t=0.3)
    assert make_schedule(p)(5)[0] == 0.3
    with pytest.raises(ConfigError):
        make_schedule(ScheduleParams(L_F1=1.0, L_F2=1.0, explicit_t=1.0))


@settings(max_examples=25, deadline=None)
@given(
    L2=st.floats(0.01, 50),
    L1=st.floats(0, 50),
    a=st.floats(0.01, 10),
    b=st.floats(0.1, 10),
    delta=st.floats(0.05, 1.0),
)
def test_monotone_step_condition_all_k(L2, L1, a, b, delta):
    sched = MonotoneSchedule(ScheduleParams(a=a, b=b, delta=delta, L_F1=L1, L_F2=L2))
    ks = np.arange(1, 10**4 + 1)
    sig = a / (ks + b) ** delta
    t = sched.t
    assert np.all(np.diff(sig) <= 0)
    assert np.all(8 * t**2 * (L2 + sig * L1) ** 2 <= 1 + 1e-12)


@settings(max_examples=25, deadline=None)
@given(L2=st.floats(0.01, 50), L1=st.floats(0, 50), mu=st.floats(0.01, 10))
def test_strong_step_condition_all_k(L2, L1, mu):
    sched = StrongSchedule(ScheduleParams(step_mode="strong_mono", mu=mu, L_F1=L1, L_F2=L2))
    for k in range(1, 10**4 + 1, 7):
        t, s, _ = sched(k)
        L = L2 + s * L1
        assert 4 * t * t * L * L + 2 * t * s * mu <= 1 + 1e-12


@pytest.mark.parametrize("L2,L1,mu", [(1.0, 0.0, 1.0), (4.1661, 4.4039, 1.0), (1.0, 1.0, 0.5)])
def test_gamma_closed_form_matches_product(L2, L1, mu):
    sched = StrongSchedule(ScheduleParams(step_mode="strong_mono", mu=mu, L_F1=L1, L_F2=L2))
    for k in (1, 2, 10, 100, 1000, 10**4):
        g = sched.gamma(k)
        assert abs(g - product_gamma(k, L2, L1, mu)) <= 1e-9 * g


def test_strong_weights_constant_for_unit_toy():
    sched = StrongSchedule(ScheduleParams(step_mode="strong_mono", mu=1.0, L_F1=0.0, L_F2=1.0))
    for k in range(1, 5):
        assert sched(k)[2] == pytest.approx(0.25)


@pytest.mark.parametrize("delta", [0.3, 0.5, 0.7, 0.9])
def test_sum_t_sigma_over_T_bound(delta):
    a, b = 1.0, 3.0
    sched = make_schedule(ScheduleParams(a=a, b=b, delta=delta, L_F1=2.0, L_F2=3.0))
    state = ScheduleState()
    for k in range(1, 20001):
        t, s, _ = sched(k)
        state.update(k, t, s)
        if k in (1, 10, 100, 1000, 20000):
            assert state.sum_t_sigma / state.T <= a / ((1 - delta) * (k + b) ** delta) + 1e-12


def test_schedule_state_monotone():
    sched = make_schedule(ScheduleParams(step_mode="strong_mono", mu=1.0, L_F1=1.0, L_F2=1.0))
    state = ScheduleState()
    prev = (math.inf, 0.0, 0.0)
    for k in range(1, 200):
        t, s, _ = sched(k)
        state.update(k, t, s, sched.gamma(k))
        assert state.sigma <= prev[0] and state.gamma >= prev[1] and state.T > prev[2]
        prev = (state.sigma, state.gamma, state.T)
