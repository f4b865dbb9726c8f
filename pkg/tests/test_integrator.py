"""Propagation: accuracy against an external reference, order, diagnostics."""

from __future__ import annotations

import csv
import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from softland.dynamics import (
    CostRegime,
    Costate,
    Direction,
    Engine,
    LanderState,
    costate_rhs,
    optimal_control,
    state_rhs,
)
from softland.integrator import (
    IntegrationSettings,
    PropagationError,
    propagate,
    terminal_point,
)
from softland.scaling import PhysicalConstants, Scales

ENGINE = Engine(tmax=1.9117927714873313, v_exhaust=1.752246793710008)
STATE = LanderState(r=1.094462255466053, v=0.013770885522160645,
                    w=0.24070392122946996, m=1.0)
COSTATE = Costate(p_r=0.4, p_v=-0.6, p_w=0.5, p_m=0.0)
TIME_REGIME = CostRegime.time_optimal()


def _reference_rhs(regime):
    """Same vector field through the pointwise public API, for solve_ivp."""

    def rhs(t, y):
        state = LanderState(r=y[0], v=y[1], w=y[2], m=y[3])
        costate = Costate(p_r=y[4], p_v=y[5], p_w=y[6], p_m=y[7])
        control = optimal_control(state, costate, regime, ENGINE)
        f = state_rhs(state, control, ENGINE)
        g = costate_rhs(state, costate, control, regime, ENGINE)
        return np.concatenate([f, g])

    return rhs


def _pack(state, costate):
    return np.array([state.r, state.v, state.w, state.m,
                     costate.p_r, costate.p_v, costate.p_w, costate.p_m or 0.0])


def test_powered_arc_matches_scipy():
    t_end = 0.45
    sol = solve_ivp(_reference_rhs(TIME_REGIME), (0.0, t_end), _pack(STATE, COSTATE),
                    method="DOP853", rtol=1e-12, atol=1e-12, dense_output=False)
    end_state, end_costate = terminal_point(ENGINE, STATE, COSTATE, t_end, TIME_REGIME)
    mine = _pack(end_state, end_costate)
    assert np.max(np.abs(mine - sol.y[:, -1])) <= 5e-8


def test_trajectory_sampling_and_terminal_consistency():
    traj = propagate(ENGINE, STATE, COSTATE, (0.0, 0.45), TIME_REGIME)
    assert len(traj.times) == IntegrationSettings().sample_count
    assert traj.times[0] == 0.0 and traj.times[-1] == pytest.approx(0.45, abs=0.0)
    assert np.all(np.diff(traj.times) > 0.0)
    end_state, _ = terminal_point(ENGINE, STATE, COSTATE, 0.45, TIME_REGIME)
    assert traj.terminal_state().r == pytest.approx(end_state.r, abs=1e-12)
    assert traj.min_radius == pytest.approx(float(np.min(traj.r)), abs=1e-12)
    assert traj.switch_count == 0  # full throttle, no sign change
    assert np.all(traj.u == 1.0)


def test_fixed_step_order_of_accuracy():
    """Halving the step shrinks the global error by roughly 2**5."""
    ref = solve_ivp(_reference_rhs(TIME_REGIME), (0.0, 0.4), _pack(STATE, COSTATE),
                    method="DOP853", rtol=1e-13, atol=1e-13).y[:, -1]
    errs = []
    for h in (0.04, 0.02):
        settings = IntegrationSettings(fixed_step=h)
        s, c = terminal_point(ENGINE, STATE, COSTATE, 0.4, TIME_REGIME,
                              settings=settings)
        errs.append(np.max(np.abs(_pack(s, c) - ref)))
    ratio = errs[0] / errs[1]
    assert 16.0 <= ratio <= 64.0, ratio


def test_forward_backward_round_trip():
    span = (0.0, 0.35)
    fwd = propagate(ENGINE, STATE, COSTATE, span, TIME_REGIME)
    back_state = fwd.terminal_state()
    back_costate = fwd.terminal_costate()
    rev_state, rev_costate = terminal_point(ENGINE, back_state, back_costate,
                                            span[1], TIME_REGIME,
                                            direction=Direction.BACKWARD)
    assert _pack(rev_state, rev_costate) == pytest.approx(_pack(STATE, COSTATE),
                                                          abs=1e-9)


def test_ballistic_orbit_conserves_energy_and_momentum():
    r0 = 1.1
    w0 = r0**-1.5  # circular rate
    period = 2.0 * math.pi / w0
    state = LanderState(r=r0, v=0.0, w=w0, m=1.0)
    traj = propagate(ENGINE, state, Costate(0.1, 0.2, 0.3), (0.0, period),
                     CostRegime.coast())
    energy = 0.5 * (traj.v**2 + (traj.w * traj.r) ** 2) - 1.0 / traj.r
    momentum = traj.w * traj.r**2
    assert np.max(np.abs(energy - energy[0])) <= 1e-8
    assert np.max(np.abs(momentum - momentum[0])) <= 1e-8
    assert traj.terminal_state().r == pytest.approx(r0, abs=1e-8)
    assert np.all(traj.u == 0.0)


def test_zero_length_span_is_identity():
    traj = propagate(ENGINE, STATE, COSTATE, (0.2, 0.2), TIME_REGIME)
    assert len(traj.times) == 1
    assert traj.terminal_state() == STATE
    assert traj.n_steps == 0


def test_time_reversed_view():
    traj = propagate(ENGINE, STATE, COSTATE, (0.0, 0.3), TIME_REGIME)
    rev = traj.time_reversed()
    assert rev.times[0] == pytest.approx(0.0, abs=0.0)
    assert rev.times[-1] == pytest.approx(0.3, abs=1e-15)
    assert np.all(np.diff(rev.times) > 0.0)
    assert rev.r[0] == traj.r[-1] and rev.r[-1] == traj.r[0]
    assert rev.time_reversed().r[0] == traj.r[0]


def test_budget_exhaustion_raises_with_partial():
    settings = IntegrationSettings(max_steps=3)
    with pytest.raises(PropagationError, match="budget") as err:
        propagate(ENGINE, STATE, COSTATE, (0.0, 2.0), TIME_REGIME, settings=settings)
    assert err.value.partial is not None
    assert err.value.partial.n_steps <= 3


def test_crash_into_surface_raises():
    # strong retrograde braking burn drives the mass through zero eventually;
    # a long span forces the integrator into the nonphysical region
    state = LanderState(r=1.0005, v=-0.05, w=0.0001, m=0.05)
    with pytest.raises(PropagationError):
        propagate(ENGINE, state, Costate(0.5, 0.5, 0.5, 0.0), (0.0, 3.0),
                  TIME_REGIME)


def test_nonfinite_start_rejected():
    with pytest.raises(PropagationError, match="not finite"):
        propagate(ENGINE, LanderState(r=math.nan, v=0.0, w=0.0, m=1.0),
                  COSTATE, (0.0, 0.1), TIME_REGIME)


def test_settings_validation():
    with pytest.raises(ValueError):
        IntegrationSettings(rel_tol=0.0)
    with pytest.raises(ValueError):
        IntegrationSettings(rel_tol=1.0)
    with pytest.raises(ValueError):
        IntegrationSettings(sample_count=1)
    with pytest.raises(ValueError):
        IntegrationSettings(fixed_step=-0.1)


def test_csv_dump_round_trip(tmp_path):
    scales = Scales.for_problem(PhysicalConstants(), reference_mass=483.4040)
    traj = propagate(ENGINE, STATE, COSTATE, (0.0, 0.3), TIME_REGIME)
    path = tmp_path / "arc.csv"
    traj.to_csv(path, scales)
    with open(path, newline="") as handle:
        rows = list(csv.reader(handle))
    assert rows[0][:4] == ["t_s", "r_km", "h_km", "v_mps"]
    assert len(rows) == 1 + len(traj.times)
    first = [float(x) for x in rows[1]]
    assert first[0] == 0.0
    assert first[1] == pytest.approx(STATE.r * scales.length / 1000.0, rel=1e-12)
    assert first[3] == pytest.approx(STATE.v * scales.speed, rel=1e-12)
