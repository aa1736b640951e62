import math

import numpy as np
import pytest

from hvi.core import CombinedData, HierarchicalProblem, Operator
from hvi.errors import ConfigError, DivergenceError, DomainError
from hvi.problems import build_gnep, toy_cross, toy_identity, toy_strong
from hvi.prox import box_indicator, nonneg_indicator, zero_term
from hvi.schedules import ScheduleParams
from hvi.solvers import (
    TRACE_COLUMNS,
    SolverConfig,
    energy_check,
    init_state,
    korpelevich_step,
    oeg_step,
    run,
    sm_oeg_run,
    tseng_step,
)

from oracles import GNEP_STAR, energy_residuals_identity, gnep_regularized_solution, oeg_identity_unrolled


@pytest.fixture(scope="module")
def gnep():
    return build_gnep()


def _fixed_t(t):
    return ScheduleParams(explicit_t=t)


# ---------------------------------------------------------------- single steps


def test_oeg_hand_unrolled():
    p = toy_identity()
    s = init_state(p)
    oeg_step(s, p.data, 0.1, 0.5)
    assert (s.z_half[0], s.z[0]) == pytest.approx((0.9, 0.91))
    oeg_step(s, p.data, 0.1, 0.5)
    assert (s.z_half[0], s.z[0]) == pytest.approx((0.82, 0.828))


def test_oeg_matches_exact_unrolling():
    p = toy_identity()
    s = init_state(p)
    for z, zh, zn, _, _ in oeg_identity_unrolled("1/10", 1, 12):
        assert s.z[0] == pytest.approx(float(z), abs=1e-15)
        oeg_step(s, p.data, 0.1, 0.3)
        assert s.z_half[0] == pytest.approx(float(zh), abs=1e-15)
        assert s.z[0] == pytest.approx(float(zn), abs=1e-15)


def test_tseng_hand_unrolled():
    p = toy_identity()
    s = init_state(p)
    tseng_step(s, p.data, 0.1, 0.5)
    assert (s.z_half[0], s.z[0]) == pytest.approx((0.9, 0.91))
    assert s.evals.prox == 1


def test_korpelevich_hand_unrolled():
    p = toy_identity()
    s = init_state(p, prime=False)
    korpelevich_step(s, p.data, 0.1, 0.5)
    assert (s.z_half[0], s.z[0]) == pytest.approx((0.9, 0.91))
    assert (s.evals.F1, s.evals.F2, s.evals.prox) == (2, 2, 2)


def test_tseng_iterate_may_leave_domain():
    rot = Operator.affine([[0.0, 1.0], [-1.0, 0.0]])
    data = CombinedData(rot, Operator.zero(2), nonneg_indicator(np.array([True, True])), zero_term())
    p = HierarchicalProblem("rot", data, 2, x0=np.array([0.05, 1.0]))
    s = init_state(p)
    tseng_step(s, data, 0.1, 0.0)
    np.testing.assert_allclose(s.z_half, [0.0, 1.005])
    np.testing.assert_allclose(s.z, [-0.0005, 1.0])
    assert not p.g2.in_domain(s.z)
    # the optimistic scheme projects both stages
    s = init_state(p)
    oeg_step(s, data, 0.1, 0.0)
    assert p.g2.in_domain(s.z)


# ---------------------------------------------------------------- runs


def test_zero_budget_keeps_initial_point():
    p = toy_cross()
    tr = run(p, SolverConfig(K=0))
    assert tr.rows == [] and tr.iterations == 0
    np.testing.assert_array_equal(tr.z, p.x0)
    np.testing.assert_array_equal(tr.z_bar, p.x0)


@pytest.mark.parametrize("variant,factor,prox", [("oeg", 1, 2), ("tseng", 1, 1), ("korpelevich", 2, 2)])
def test_evaluation_counts(variant, factor, prox):
    K = 500
    tr = run(toy_cross(), SolverConfig(variant=variant, K=K))
    ev = tr.evals
    assert ev.F1 == ev.F2 == factor * K
    assert ev.prox == prox * K
    assert ev.init_F1 == ev.init_F2 == (0 if variant == "korpelevich" else 1)


def test_counts_match_instrumented_operator():
    calls = []
    F = Operator(lambda z: (calls.append(1), z)[1], 1.0, 1.0, "counted")
    data = CombinedData(F, Operator.zero(1), zero_term(), zero_term())
    p = HierarchicalProblem("c", data, 1, x0=np.array([1.0]))
    tr = run(p, SolverConfig(K=100))
    assert len(calls) == 101 == tr.evals.total_F2


def test_rows_and_columns(gnep):
    tr = run(gnep, SolverConfig(K=1050, log_every=100))
    ks = tr.column("k")
    assert list(ks) == list(range(100, 1001, 100)) + [1050]
    assert tr.has_gaps
    for name in ("feas_gap", "opt_gap", "dist"):
        assert np.all(np.isfinite(tr.column(name)))
    assert np.all(np.isnan(tr.column("resid")))
    with pytest.raises(KeyError):
        tr.column("nope")
    assert len(tr.rows[0].as_tuple()) == len(TRACE_COLUMNS)
    assert [s[0] for s in tr.snapshots] == list(ks)


def test_determinism(gnep):
    cfg = SolverConfig(K=2000, log_every=50, z_ref=GNEP_STAR)
    a, b = run(gnep, cfg), run(gnep, cfg)
    np.testing.assert_array_equal(np.array([r.as_tuple() for r in a.rows]), np.array([r.as_tuple() for r in b.rows]))
    np.testing.assert_array_equal(a.z, b.z)
    np.testing.assert_array_equal(a.z_bar, b.z_bar)


def test_ergodic_average_in_hull():
    p = toy_cross()
    mids = []
    tr = run(p, SolverConfig(K=300), callback=lambda k, s: mids.append(s.z_half.copy()))
    mids = np.array(mids)
    assert mids.min() - 1e-9 <= tr.z_bar[0] <= mids.max() + 1e-9
    np.testing.assert_allclose(tr.z_bar, mids.mean(axis=0), atol=1e-12)  # constant step


def test_ergodic_average_in_hull_2d(gnep):
    mids = []
    tr = run(gnep, SolverConfig(K=400), callback=lambda k, s: mids.append(s.z_half.copy()))
    # a convex combination with the step weights certifies hull membership
    np.testing.assert_allclose(tr.z_bar, np.mean(mids, axis=0), atol=1e-9)


def test_sm_weights_quarter():
    F1 = Operator.affine([[1.0]], [-3.0], lipschitz=1.0, strong_mono=1.0)
    data = CombinedData(Operator.zero(1, lipschitz=1.0), F1, zero_term(), zero_term())
    p = HierarchicalProblem("w", data, 1, x0=np.array([0.0]))
    mids = []
    params = ScheduleParams(step_mode="strong_mono", mu=1.0, L_F1=0.0, L_F2=1.0)
    tr = run(p, SolverConfig(variant="sm_oeg", K=4, schedule=params), callback=lambda k, s: mids.append(s.z_half[0]))
    assert tr.z_bar[0] == pytest.approx(np.mean(mids), abs=1e-12)
    assert tr.schedule.sum_t_sigma_gamma == pytest.approx(1.0)


def test_sm_oeg_run_and_errors():
    tr = sm_oeg_run(toy_strong(), 1000)
    assert abs(tr.z_bar[0] - 3.0) < 0.15
    with pytest.raises(ConfigError, match="monotone variants"):
        sm_oeg_run(toy_identity(), 10)
    with pytest.raises(ConfigError):
        SolverConfig(variant="sm_oeg")
    with pytest.raises(ConfigError):
        SolverConfig(variant="newton")
    with pytest.raises(ConfigError):
        SolverConfig(K=-1)


def test_divergence_on_non_finite_operator():
    bad = Operator(lambda z: np.full_like(z, np.nan), 1.0, name="broken_F1")
    data = CombinedData(Operator.affine([[1.0]]), bad, zero_term(), zero_term())
    p = HierarchicalProblem("nan", data, 1, x0=np.array([1.0]))
    with pytest.raises(DivergenceError, match="broken_F1") as info:
        run(p, SolverConfig(K=10))
    assert np.all(np.isfinite(info.value.state.z))


def test_divergence_on_blow_up():
    expanding = Operator.affine([[-50.0]], lipschitz=0.1)  # false declaration
    data = CombinedData(expanding, Operator.zero(1), zero_term(), zero_term())
    p = HierarchicalProblem("blow", data, 1, x0=np.array([1.0]))
    with pytest.raises(DivergenceError, match="diverged"):
        run(p, SolverConfig(K=10**5))


def test_stop_rule():
    cfg = SolverConfig(K=10**5, log_every=10, tol_step=1e-8)
    tr = run(toy_identity(), cfg)
    assert tr.stopped == "tolerance" and tr.iterations < 10**5
    assert tr.rows[-1].step_norm <= 1e-8
    assert run(toy_identity(), SolverConfig(K=500)).stopped == "budget"


# ---------------------------------------------------------------- energy diagnostics


def test_energy_identity_toy_matches_exact_arithmetic():
    res, tr = energy_check(toy_identity(), SolverConfig(K=3, schedule=_fixed_t(0.1)))
    exact = [float(r) for r in energy_residuals_identity("1/10", 1, 3)]
    np.testing.assert_allclose(res, exact, atol=1e-15)
    assert all(r <= 0 for r in exact)
    assert tr.energy_E1 == 0.5


def test_energy_D1_is_zero():
    p = toy_identity()
    tr = run(p, SolverConfig(K=1, z_ref=np.zeros(1), schedule=_fixed_t(0.1)))
    # D_2 uses the first pair of evaluations; D_1 is the initial zero
    assert tr.rows[0].D == pytest.approx(0.5 * 0.01 * 0.1**2)


def test_energy_recursion_gnep_short(gnep):
    res, tr = energy_check(gnep, SolverConfig(K=2000))
    assert len(res) == 2000
    assert res.max() <= 1e-8 * (1 + tr.energy_E1)
    assert tr.max_resid == res.max()


def test_energy_recursion_strong_variant():
    res, tr = energy_check(toy_strong(), SolverConfig(variant="sm_oeg", K=3000, schedule=ScheduleParams(step_mode="strong_mono")))
    assert res.max() <= 1e-12 * (1 + tr.energy_E1)


def test_energy_check_errors(gnep):
    with pytest.raises(ConfigError):
        energy_check(gnep, SolverConfig(variant="tseng", K=10))
    box = box_indicator(np.zeros(1), np.ones(1))
    data = CombinedData(Operator.affine([[1.0]]), Operator.zero(1), box, zero_term())
    p = HierarchicalProblem("b", data, 1)
    with pytest.raises(DomainError):
        energy_check(p, SolverConfig(K=10), z_ref=np.array([2.0]))
    with pytest.raises(ConfigError):
        energy_check(p, SolverConfig(K=10))


# ---------------------------------------------------------------- trajectory vs regularized path


def test_gnep_last_iterate_tracks_regularized_path(gnep):
    tr = run(gnep, SolverConfig(K=20000, log_every=20000))
    target = gnep_regularized_solution(tr.schedule.sigma)
    assert np.linalg.norm(tr.z - target) < 0.05 * np.linalg.norm(target - GNEP_STAR)


def test_regularized_path_bias_is_linear_in_sigma():
    ratios = [np.linalg.norm(gnep_regularized_solution(s) - GNEP_STAR) / s for s in (1e-2, 3e-3, 1e-3)]
    assert max(ratios) - min(ratios) < 0.02 * max(ratios)
    assert 150 < ratios[-1] < 180


def test_cross_variants_agree():
    zs = [run(toy_cross(), SolverConfig(variant=v, K=20000, log_every=20000)).z for v in ("oeg", "tseng", "korpelevich")]
    assert max(abs(a[0] - b[0]) for a in zs for b in zs) < 1e-6
    assert not math.isnan(zs[0][0])
