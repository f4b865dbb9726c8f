"""Dogleg solver: correctness, counters, failure taxonomy."""

from __future__ import annotations

import math

import numpy as np
import pytest

from softland.integrator import PropagationError
from softland.rootfind import SolveStatus, SolverSettings, solve


def test_linear_system_one_iteration():
    calls = {"n": 0}

    def fn(z):
        calls["n"] += 1
        return np.array([2.0 * z[0] + z[1] - 3.0, z[0] - z[1]])

    report = solve(fn, np.array([10.0, -4.0]))
    assert report.status is SolveStatus.CONVERGED
    assert report.z == pytest.approx([1.0, 1.0], abs=1e-9)
    assert report.iterations == 1
    # 1 start + 4 jacobian columns (central) + 1 accepted trial
    assert report.function_evaluations == 6
    assert calls["n"] == report.function_evaluations


def test_circle_line_intersections():
    def fn(z):
        return np.array([z[0] ** 2 + z[1] ** 2 - 1.0, z[1] - z[0]])

    root = 1.0 / math.sqrt(2.0)
    hi = solve(fn, np.array([1.0, 0.5]))
    assert hi.status is SolveStatus.CONVERGED
    assert hi.z == pytest.approx([root, root], abs=1e-10)
    lo = solve(fn, np.array([-1.0, -0.5]))
    assert lo.z == pytest.approx([-root, -root], abs=1e-10)
    assert hi.residual_norm <= 1e-9


def test_pole_at_start_is_propagation_failure():
    def fn(z):
        raise PropagationError("blew up immediately")

    report = solve(fn, np.array([1.0, 2.0]))
    assert report.status is SolveStatus.PROPAGATION_FAILURE
    assert report.iterations == 0
    assert report.function_evaluations == 1
    assert "starting point" in report.message
    assert math.isinf(report.residual_norm)


def test_recovers_from_eval_failures_off_start():
    # evaluations outside |z| < 2 fail; the region shrinks and the solve lands
    def fn(z):
        if np.linalg.norm(z) > 2.0:
            raise PropagationError("outside the basin")
        return np.array([z[0] ** 2 + z[1] ** 2 - 1.0, z[1] - z[0]])

    report = solve(fn, np.array([1.2, 1.2]))
    assert report.status is SolveStatus.CONVERGED
    root = 1.0 / math.sqrt(2.0)
    assert report.z == pytest.approx([root, root], abs=1e-10)


def test_deterministic_replay():
    def fn(z):
        return np.array([math.sin(z[0]) + 0.5 * z[1], z[0] * z[1] - 0.2])

    a = solve(fn, np.array([0.7, 0.4]))
    b = solve(fn, np.array([0.7, 0.4]))
    assert a.status is b.status
    assert np.array_equal(a.z, b.z)
    assert a.function_evaluations == b.function_evaluations
    assert a.residual_history == b.residual_history


def test_superlinear_tail():
    def fn(z):
        return np.array([math.exp(z[0]) - 1.0, z[0] + z[1]])

    report = solve(fn, np.array([0.5, -0.3]))
    assert report.status is SolveStatus.CONVERGED
    tail = report.residual_history[-3:]
    q1 = tail[1] / tail[0]
    q2 = tail[2] / tail[1]
    assert q2 < q1 < 1.0
    assert q2 < 1e-3


def test_residual_history_bookkeeping():
    def fn(z):
        return np.array([z[0] ** 2 + z[1] ** 2 - 1.0, z[1] - z[0]])

    report = solve(fn, np.array([1.0, 0.5]))
    assert len(report.residual_history) == report.iterations + 1
    assert report.residual_history[-1] == report.residual_norm
    assert report.residual_history[-1] <= 1e-9


def test_no_root_stalls_at_merit_minimum():
    # residual floor of 1 at z = 0, gradient vanishes there
    report = solve(lambda z: np.array([z[0] ** 2 + 1.0]), np.array([0.8]))
    assert report.status in (SolveStatus.STALLED_STEP, SolveStatus.MAX_ITERATIONS)
    assert report.residual_norm >= 1.0


def test_rank_deficient_jacobian_still_converges():
    # duplicated equations: any point on the line y = x is a root
    def fn(z):
        return np.array([z[0] - z[1], z[0] - z[1]])

    report = solve(fn, np.array([2.0, -1.0]))
    assert report.status is SolveStatus.CONVERGED
    assert abs(report.z[0] - report.z[1]) <= 1e-9


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError, match="dimension"):
        solve(lambda z: np.array([z[0]]), np.array([1.0, 2.0]))
    with pytest.raises(ValueError, match="vector"):
        solve(lambda z: z, np.array([[1.0, 2.0]]))


def test_converged_start_short_circuits():
    def fn(z):
        return np.array([z[0], z[1]])

    report = solve(fn, np.array([0.0, 0.0]))
    assert report.status is SolveStatus.CONVERGED
    assert report.iterations == 0
    assert report.function_evaluations == 1


def test_max_iterations_cap():
    settings = SolverSettings(max_iterations=2)

    def fn(z):
        return np.array([math.tanh(z[0]) - 0.999999, z[1] * 1e-3])

    report = solve(fn, np.array([-4.0, 5.0]), settings)
    if report.status is SolveStatus.MAX_ITERATIONS:
        assert report.iterations == 2


def test_settings_validation():
    with pytest.raises(ValueError):
        SolverSettings(residual_tol=0.0)
    with pytest.raises(ValueError):
        SolverSettings(residual_tol=2.0)
    with pytest.raises(ValueError):
        SolverSettings(max_iterations=0)
    with pytest.raises(ValueError):
        SolverSettings(fd_relative_step=0.5)
    with pytest.raises(ValueError):
        SolverSettings(trust_radius_init=0.0)
    with pytest.raises(ValueError):
        SolverSettings(trust_radius_init=10.0, trust_radius_max=1.0)
