"""Shooting-layer tests: scaling of inputs, guesses, residuals, solves."""
from __future__ import annotations

import dataclasses
import math

import numpy as np
import pytest
from scipy import stats

from softland.dynamics import CostRegime, FormulationMismatchError
from softland.integrator import propagate
from softland.rootfind import SolveStatus
from softland.shooting import (
    Formulation,
    InitialCondition,
    LandingOutcome,
    ShootingVector,
    base_regime,
    classify,
    estimate,
    initial_guess,
    residual,
    solve_time_optimal,
)

# Reference descent case used throughout: a near-surface lander with a
# small radial speed and near-circular tangential motion.
GOLDEN = dict(r0_km=1902.1754, v0_mps=23.1290, omega0_radps=2.3261e-4,
              m0_kg=483.4040)

# Frozen from an independent plain-Python derivation of the energy budget
# and the input scaling (no package imports).
R0_SCALED = 1.094462255466053
V0_SCALED = 0.013770885522160645
W0_SCALED = 0.24070392122946996
TMAX_SCALED = 1.9117927714873313
VE_SCALED = 1.752246793710008
E0 = 0.11365548568893419
DELTA_V = 0.4767714036914005
DELTA_M_HAT = 0.25012619264929736
T_F_HAT = 0.22925226291741285
T_MAX = 0.9165464059929465
T_F_HAT_S = 237.2293479856871
T_MAX_S = 948.4386479999998


@pytest.fixture(scope="module")
def ic() -> InitialCondition:
    return InitialCondition.from_dimensional(**GOLDEN)


@pytest.fixture(scope="module")
def golden_backward(ic):
    out = solve_time_optimal(ic, seed=0)
    assert out.converged
    return out


def test_from_dimensional_scaled_mirrors(ic):
    assert ic.r0 == pytest.approx(R0_SCALED, rel=1e-12)
    assert ic.v0 == pytest.approx(V0_SCALED, rel=1e-12)
    assert ic.w0 == pytest.approx(W0_SCALED, rel=1e-12)
    assert ic.engine.tmax == pytest.approx(TMAX_SCALED, rel=1e-12)
    assert ic.engine.v_exhaust == pytest.approx(VE_SCALED, rel=1e-12)
    state = ic.initial_state
    assert (state.r, state.v, state.w, state.m) == (ic.r0, ic.v0, ic.w0, 1.0)


def test_from_dimensional_rejects_bad_inputs():
    with pytest.raises(ValueError, match="below the surface"):
        InitialCondition.from_dimensional(1737.9, 0.0, 0.0, 500.0)
    with pytest.raises(ValueError, match="finite"):
        InitialCondition.from_dimensional(1900.0, math.nan, 0.0, 500.0)


def test_estimate_energy_budget_values(ic):
    est = estimate(ic)
    assert est.e0 == pytest.approx(E0, rel=1e-12)
    assert est.delta_v == pytest.approx(DELTA_V, rel=1e-12)
    assert est.delta_m_hat == pytest.approx(DELTA_M_HAT, rel=1e-12)
    assert est.t_f_hat == pytest.approx(T_F_HAT, rel=1e-12)
    assert est.t_max == pytest.approx(T_MAX, rel=1e-12)
    assert est.t_f_hat * ic.scales.time == pytest.approx(T_F_HAT_S, rel=1e-12)
    assert est.t_max * ic.scales.time == pytest.approx(T_MAX_S, rel=1e-12)


def test_estimate_burn_bound_consumes_whole_vehicle():
    # At full throttle the burn bound is initial mass over mass flow:
    # 600 kg * (300 s * 9.81 m/s^2) / 1500 N = 1177.2 s.
    ic = InitialCondition.from_dimensional(1900.0, 10.0, 1e-4, 600.0)
    est = estimate(ic)
    assert est.t_max * ic.scales.time == pytest.approx(1177.2, rel=1e-12)


def test_backward_guess_octant_and_seed_slots(ic):
    rng = np.random.default_rng(42)
    est = estimate(ic)
    for _ in range(300):
        vec = initial_guess(Formulation.BWD_PIIM_TIME, ic, rng)
        assert vec.kind is Formulation.BWD_PIIM_TIME
        assert not vec.remedy_active
        p_r, p_v, p_w, m_td, t_f = vec.values
        assert p_r >= 0.0 and p_v <= 0.0 and p_w >= 0.0
        assert math.hypot(p_r, math.hypot(p_v, p_w)) == pytest.approx(1.0, abs=1e-12)
        assert m_td == 1.0 - est.delta_m_hat
        assert t_f == est.t_f_hat


def test_backward_guess_direction_uniform_on_octant(ic):
    # For a direction uniform on the sphere, |z| is uniform on (0, 1) and
    # the azimuth is uniform on (0, pi/2) after folding into the octant.
    # Bin both into an 8x8 grid and compare against the flat histogram.
    rng = np.random.default_rng(7)
    draws = 10000
    counts = np.zeros((8, 8))
    for _ in range(draws):
        p_r, p_v, p_w = initial_guess(Formulation.BWD_PIIM_TIME, ic, rng).values[:3]
        phi = math.atan2(-p_v, p_r)
        i = min(int(p_w * 8.0), 7)
        j = min(int(phi / (math.pi / 2.0) * 8.0), 7)
        counts[i, j] += 1.0
    expected = draws / 64.0
    chi2 = float(np.sum((counts - expected) ** 2) / expected)
    assert chi2 < stats.chi2.ppf(0.99, 63)


def test_forward_guess_slot_ranges(ic):
    rng = np.random.default_rng(3)
    est = estimate(ic)
    for _ in range(200):
        full = initial_guess(Formulation.FWD_ICVN_TIME, ic, rng).values
        assert np.all(np.abs(full[:3]) < 1.0)
        assert 0.0 < full[3] < 1.0 and 0.0 < full[4] < 1.0
        assert full[5] == est.t_f_hat
        reduced = initial_guess(Formulation.FWD_SICVN_TIME, ic, rng).values
        assert reduced.shape == (4,)
        assert np.all(np.abs(reduced[:3]) < 1.0)
        homo = initial_guess(Formulation.FWD_HOMOTOPY, ic, rng).values
        assert homo.shape == (5,)
        assert 0.0 < homo[3] < 1.0


def test_guess_flight_time_modes(ic):
    rng = np.random.default_rng(11)
    est = estimate(ic)
    for _ in range(200):
        uniform = initial_guess(Formulation.BWD_PIIM_TIME, ic, rng,
                                tf_mode="uniform")
        assert 0.0 < uniform.values[-1] <= est.t_max
        fuel = initial_guess(Formulation.FWD_ICVN_FUEL, ic, rng)
        assert est.t_f_hat <= fuel.values[-1] <= est.t_max
    with pytest.raises(ValueError, match="tf_mode"):
        initial_guess(Formulation.BWD_PIIM_TIME, ic, rng, tf_mode="steady")


def test_remedy_encoding_round_trip(ic):
    rng = np.random.default_rng(0)
    vec = initial_guess(Formulation.BWD_PIIM_TIME, ic, rng, remedy=True)
    est = estimate(ic)
    assert vec.remedy_active
    assert vec.values[-1] == pytest.approx(math.log(est.t_f_hat), rel=1e-12)
    assert vec.t_f == pytest.approx(est.t_f_hat, rel=1e-12)

    plain = vec.without_remedy()
    assert not plain.remedy_active
    assert plain.values[-1] == pytest.approx(est.t_f_hat, rel=1e-12)
    assert plain.apply_remedy().values[-1] == pytest.approx(
        math.log(est.t_f_hat), rel=1e-12)

    bad = plain.with_values(np.array([0.5, -0.5, 0.5, 0.8, -1.0]))
    with pytest.raises(ValueError, match="nonpositive"):
        bad.apply_remedy()


def test_vector_shape_validation():
    with pytest.raises(ValueError, match="unknowns"):
        ShootingVector(Formulation.BWD_PIIM_TIME, np.zeros(4))


def test_normalization_row_exact_at_any_sphere_guess(ic):
    # The touchdown co-state direction is drawn on the unit sphere, so the
    # normalization residual row is satisfied by construction at the guess.
    rng = np.random.default_rng(19)
    regime = base_regime(Formulation.BWD_PIIM_TIME)
    for _ in range(5):
        vec = initial_guess(Formulation.BWD_PIIM_TIME, ic, rng)
        rows = residual(vec, ic, regime)
        assert rows.shape == (5,)
        assert abs(rows[4]) < 1e-12


def test_residual_vanishes_at_converged_root(ic, golden_backward):
    rows = residual(golden_backward.vector, ic, golden_backward.regime)
    assert float(np.max(np.abs(rows))) <= 1e-8


def test_golden_backward_solve(ic, golden_backward):
    out = golden_backward
    assert out.outcome is LandingOutcome.SUCCESSFUL_LANDING
    assert out.attempts == 1
    assert out.vector.remedy_active and out.t_f > 0.0
    assert out.t_f_s == pytest.approx(423.482344, abs=1e-3)
    assert out.fuel_kg == pytest.approx(215.842173, abs=1e-3)
    assert out.p0 == pytest.approx(0.5693082969, abs=1e-6)
    assert out.trajectory.min_radius >= 1.0 - 1e-9
    # thrust never becomes optional on a minimum-time descent
    assert float(np.max(out.trajectory.switching)) < 0.0
    # the stored trajectory runs forward in time even for a backward solve
    assert out.trajectory.times[0] == 0.0
    assert out.trajectory.times[-1] == pytest.approx(out.t_f, rel=1e-12)


def test_reconstruction_zeroes_mass_adjoint(ic, golden_backward):
    rec = golden_backward.reconstruction
    assert rec is not None
    assert rec.p0 > 0.0
    assert rec.p_m0 == -rec.delta_p_m
    assert rec.k == pytest.approx(1.0 / math.sqrt(1.0 - rec.delta_p_m ** 2),
                                  rel=1e-12)
    # Re-propagating with the recovered full co-state must drive the mass
    # adjoint to zero at touchdown (its free-final-mass condition).
    regime = CostRegime.time_optimal(factor=rec.p0)
    traj = propagate(ic.engine, ic.initial_state, rec.initial_costate,
                     (0.0, golden_backward.t_f), regime)
    assert abs(traj.terminal_costate().p_m) <= 1e-6
    assert abs(traj.terminal_state().r - 1.0) <= 1e-6


def test_homotopy_residual_matches_time_solution_at_kappa_one(ic, golden_backward):
    # At kappa = 1 the throttle is pinned wide open, so the time-optimal
    # touchdown unknowns solve the homotopy boundary problem as long as the
    # cost factor equals the recovered one.
    rec = golden_backward.reconstruction
    hvec = ShootingVector(Formulation.BWD_HOMOTOPY,
                          golden_backward.vector.values, remedy_active=True)
    regime = CostRegime.homotopy(factor=rec.p0, kappa=1.0, delta=1e-3)
    rows = residual(hvec, ic, regime)
    assert rows.shape == (5,)
    assert float(np.max(np.abs(rows))) <= 1e-7


def test_forward_formulations_agree_with_backward(ic, golden_backward):
    fwd_full = solve_time_optimal(ic, kind=Formulation.FWD_ICVN_TIME, seed=0)
    fwd_reduced = solve_time_optimal(ic, kind=Formulation.FWD_SICVN_TIME, seed=0)
    for out in (fwd_full, fwd_reduced):
        assert out.outcome is LandingOutcome.SUCCESSFUL_LANDING
        assert out.t_f_s == pytest.approx(golden_backward.t_f_s, abs=1e-3)
        assert out.fuel_kg == pytest.approx(golden_backward.fuel_kg, abs=1e-3)

    # All formulations pick the same co-state ray; only the gauge differs.
    rec = golden_backward.reconstruction
    c = rec.initial_costate
    bwd5 = np.array([c.p_r, c.p_v, c.p_w, c.p_m, rec.p0])
    bwd5 /= np.linalg.norm(bwd5)
    fwd5 = np.asarray(fwd_full.vector.values[:5])
    assert np.linalg.norm(fwd5) == pytest.approx(1.0, abs=1e-9)
    assert fwd_full.vector.values[4] > 0.0
    np.testing.assert_allclose(fwd5, bwd5, atol=5e-6)

    bwd3 = np.array([c.p_r, c.p_v, c.p_w])
    bwd3 /= np.linalg.norm(bwd3)
    np.testing.assert_allclose(np.asarray(fwd_reduced.vector.values[:3]),
                               bwd3, atol=5e-6)


def test_classify_taxonomy(golden_backward):
    report = golden_backward.report
    traj = golden_backward.trajectory
    assert classify(report, traj) is LandingOutcome.SUCCESSFUL_LANDING
    assert classify(report, None) is LandingOutcome.NOT_CONVERGED
    stalled = dataclasses.replace(report, status=SolveStatus.MAX_ITERATIONS)
    assert classify(stalled, traj) is LandingOutcome.NOT_CONVERGED


def test_unremedied_solves_expose_bad_roots():
    # Without the log-time encoding the forward solve can converge onto a
    # reversed-time root or a path that dips below ground; both must be
    # called out rather than reported as landings.
    from softland.montecarlo import sample_domain

    cases = sample_domain(11, seed=1)
    negative = solve_time_optimal(
        cases[10], kind=Formulation.FWD_ICVN_TIME, remedy=False,
        tf_mode="uniform", max_attempts=1,
        rng=np.random.default_rng((1, 90001, 10)))
    assert negative.outcome is LandingOutcome.NEGATIVE_FINAL_TIME
    assert negative.converged and negative.t_f < 0.0
    times = negative.trajectory.times
    assert times[-1] - times[0] < 0.0

    grazing = solve_time_optimal(
        cases[3], kind=Formulation.FWD_ICVN_TIME, remedy=False,
        tf_mode="uniform", max_attempts=1,
        rng=np.random.default_rng((1, 90001, 3)))
    assert grazing.outcome is LandingOutcome.SUBSURFACE
    assert grazing.converged and grazing.t_f > 0.0
    assert grazing.trajectory.min_radius < 1.0 - 1e-9


def test_deterministic_replay(ic):
    first = solve_time_optimal(ic, seed=5)
    second = solve_time_optimal(ic, seed=5)
    assert first.converged and second.converged
    assert np.array_equal(first.vector.values, second.vector.values)
    assert first.attempts == second.attempts
    assert first.t_f == second.t_f
    assert first.report.iterations == second.report.iterations


def test_kind_and_regime_mismatches_rejected(ic):
    with pytest.raises(FormulationMismatchError, match="time-optimal"):
        solve_time_optimal(ic, kind=Formulation.FWD_ICVN_FUEL)
    rng = np.random.default_rng(0)
    vec = initial_guess(Formulation.BWD_PIIM_TIME, ic, rng)
    with pytest.raises(FormulationMismatchError):
        residual(vec, ic, CostRegime.fuel_optimal(factor=1.0, delta=1e-3))
