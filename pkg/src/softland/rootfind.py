"""Square nonlinear systems by a dogleg trust-region method.

The solver minimizes half the squared residual norm with the classic
Powell dogleg step (Gauss-Newton point when it fits in the trust region,
otherwise the blend with the steepest-descent minimizer), rebuilding a
central-difference Jacobian each outer iteration.  The radius grows
whenever the quadratic model proves reliable (ratio above one half, or
two acceptances in a row), which keeps steps from creeping along curved
valleys, and a rejected trial shrinks it to half the failed step length
rather than a quarter, so one cheap retry usually lands.  Residual
callables may raise a propagation error or return non-finite values;
both count as a failed trial and shrink the region rather than aborting
the solve, except at the starting point where nothing can be salvaged.

Everything is deterministic: identical inputs produce bitwise-identical
reports, and every residual invocation, including the ones spent on
Jacobian columns and failed trials, lands in `function_evaluations`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional

import numpy as np

from .integrator import PropagationError

# Residual failures the solver treats as a rejected point rather than a bug.
_EVAL_ERRORS = (PropagationError, ZeroDivisionError, FloatingPointError, OverflowError)

_EPS = float(np.finfo(float).eps)


class SolveStatus(Enum):
    CONVERGED = "converged"
    MAX_ITERATIONS = "max-iterations"
    STALLED_STEP = "stalled-step"
    LINEAR_SOLVE_FAILURE = "linear-solve-failure"
    PROPAGATION_FAILURE = "propagation-failure"


@dataclass(frozen=True)
class SolverSettings:
    residual_tol: float = 1e-9  # infinity-norm target on the residual
    max_iterations: int = 300
    fd_relative_step: float = _EPS ** (1.0 / 3.0)
    # Large enough that the first step is an unrestricted Newton step for
    # any sanely scaled system; the first accept re-centers the radius.
    trust_radius_init: float = 100.0
    trust_radius_max: float = 1e3

    def __post_init__(self) -> None:
        if not (0.0 < self.residual_tol < 1.0):
            raise ValueError(f"residual_tol must lie in (0, 1), got {self.residual_tol!r}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be positive, got {self.max_iterations!r}")
        if not (0.0 < self.fd_relative_step < 1e-2):
            raise ValueError(f"fd_relative_step must be a small positive number, "
                             f"got {self.fd_relative_step!r}")
        if self.trust_radius_init <= 0.0:
            raise ValueError(f"trust_radius_init must be positive, "
                             f"got {self.trust_radius_init!r}")
        if self.trust_radius_max < self.trust_radius_init:
            raise ValueError(f"trust_radius_max must be at least trust_radius_init, "
                             f"got {self.trust_radius_max!r}")


@dataclass
class SolveReport:
    status: SolveStatus
    z: np.ndarray
    residual: np.ndarray
    residual_norm: float  # infinity norm at z
    iterations: int
    function_evaluations: int
    residual_history: List[float] = field(default_factory=list)
    message: str = ""

    @property
    def converged(self) -> bool:
        return self.status is SolveStatus.CONVERGED

    def to_json_dict(self) -> dict:
        return {
            "status": self.status.value,
            "z": [float(v) for v in self.z],
            "residual": [float(v) for v in self.residual],
            "residual_norm": float(self.residual_norm),
            "iterations": self.iterations,
            "function_evaluations": self.function_evaluations,
            "residual_history": [float(v) for v in self.residual_history],
            "message": self.message,
        }


class _Counter:
    __slots__ = ("calls",)

    def __init__(self) -> None:
        self.calls = 0


def _try_eval(fn, z, counter) -> Optional[np.ndarray]:
    """One counted residual evaluation; None signals a failed point."""
    counter.calls += 1
    try:
        out = np.asarray(fn(z), dtype=float)
    except _EVAL_ERRORS:
        return None
    if out.ndim != 1 or not np.all(np.isfinite(out)):
        return None
    return out


def fd_jacobian(fn: Callable[[np.ndarray], np.ndarray], z: np.ndarray,
                f0: np.ndarray, settings: SolverSettings = SolverSettings(),
                counter: Optional[_Counter] = None) -> np.ndarray:
    """Central-difference Jacobian with per-column one-sided fallback.

    Column i uses step `fd_relative_step * max(1, |z_i|)`.  If one side of
    a column fails to evaluate, the column falls back to a one-sided
    difference against f0; if both sides fail, the column is unrecoverable
    and a propagation error is raised.
    """
    counter = counter if counter is not None else _Counter()
    n = len(z)
    m = len(f0)
    jac = np.empty((m, n))
    for i in range(n):
        h = settings.fd_relative_step * max(1.0, abs(z[i]))
        z_plus = z.copy()
        z_plus[i] += h
        z_minus = z.copy()
        z_minus[i] -= h
        f_plus = _try_eval(fn, z_plus, counter)
        f_minus = _try_eval(fn, z_minus, counter)
        if f_plus is not None and f_minus is not None:
            jac[:, i] = (f_plus - f_minus) / (2.0 * h)
        elif f_plus is not None:
            jac[:, i] = (f_plus - f0) / h
        elif f_minus is not None:
            jac[:, i] = (f0 - f_minus) / (-h)
        else:
            raise PropagationError(f"jacobian column {i} failed on both sides")
    return jac


def _dogleg_step(g: np.ndarray, jac: np.ndarray, newton: np.ndarray,
                 radius: float) -> np.ndarray:
    """Powell dogleg point inside the trust region."""
    newton_len = float(np.linalg.norm(newton))
    if newton_len <= radius:
        return newton
    jg = jac @ g
    gnorm2 = float(g @ g)
    jg2 = float(jg @ jg)
    if jg2 <= 0.0:
        return newton * (radius / newton_len)
    cauchy = -(gnorm2 / jg2) * g
    cauchy_len = float(np.linalg.norm(cauchy))
    if cauchy_len >= radius:
        return cauchy * (radius / cauchy_len)
    # blend from the Cauchy point toward the Newton point to the boundary
    d = newton - cauchy
    a = float(d @ d)
    b = 2.0 * float(cauchy @ d)
    c = cauchy_len**2 - radius**2
    disc = max(b * b - 4.0 * a * c, 0.0)
    tau = (-b + math.sqrt(disc)) / (2.0 * a) if a > 0.0 else 0.0
    return cauchy + tau * d


def solve(fn: Callable[[np.ndarray], np.ndarray], z0: np.ndarray,
          settings: SolverSettings = SolverSettings()) -> SolveReport:
    """Drive the residual to zero from z0; never raises for numeric failure."""
    counter = _Counter()
    z = np.asarray(z0, dtype=float).copy()
    if z.ndim != 1:
        raise ValueError("z0 must be a vector")

    f = _try_eval(fn, z, counter)
    if f is None:
        return SolveReport(
            status=SolveStatus.PROPAGATION_FAILURE, z=z, residual=np.full_like(z, np.nan),
            residual_norm=math.inf, iterations=0,
            function_evaluations=counter.calls,
            message="residual evaluation failed at the starting point")
    if len(f) != len(z):
        raise ValueError(f"residual dimension {len(f)} does not match unknowns {len(z)}")

    norm_inf = float(np.max(np.abs(f)))
    history = [norm_inf]
    if norm_inf <= settings.residual_tol:
        return SolveReport(status=SolveStatus.CONVERGED, z=z, residual=f,
                           residual_norm=norm_inf, iterations=0,
                           function_evaluations=counter.calls,
                           residual_history=history)

    near_tol = 10.0 * settings.residual_tol
    radius = settings.trust_radius_init
    consecutive = 0  # acceptances since the last poor model fit

    def finish(status, message=""):
        return SolveReport(status=status, z=z, residual=f, residual_norm=norm_inf,
                           iterations=iteration, function_evaluations=counter.calls,
                           residual_history=history, message=message)

    iteration = 0
    for iteration in range(1, settings.max_iterations + 1):
        try:
            jac = fd_jacobian(fn, z, f, settings, counter)
        except PropagationError:
            return finish(SolveStatus.PROPAGATION_FAILURE,
                          "jacobian evaluation failed")
        if not np.all(np.isfinite(jac)):
            return finish(SolveStatus.LINEAR_SOLVE_FAILURE,
                          "jacobian contains non-finite entries")

        g = jac.T @ f  # gradient of the squared-norm merit
        if float(np.linalg.norm(g)) == 0.0:
            if norm_inf <= near_tol:
                return finish(SolveStatus.CONVERGED, "stationary at a near-root")
            return finish(SolveStatus.STALLED_STEP,
                          "zero gradient away from a root")

        try:
            newton = np.linalg.solve(jac, -f)
            if not np.all(np.isfinite(newton)):
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            newton, *_ = np.linalg.lstsq(jac, -f, rcond=None)
            if not np.all(np.isfinite(newton)):
                return finish(SolveStatus.LINEAR_SOLVE_FAILURE,
                              "trust-region subproblem is singular")

        f_sq = float(f @ f)
        accepted = False
        for _trial in range(60):
            step = _dogleg_step(g, jac, newton, radius)
            step_len = float(np.linalg.norm(step))
            floor = 1e-13 * max(1.0, float(np.linalg.norm(z)))
            if step_len < floor:
                if norm_inf <= near_tol:
                    return finish(SolveStatus.CONVERGED, "step floor at a near-root")
                return finish(SolveStatus.STALLED_STEP,
                              f"trust region collapsed to {radius!r}")
            predicted = f_sq - float(np.linalg.norm(f + jac @ step)) ** 2
            f_trial = _try_eval(fn, z + step, counter)
            if f_trial is None:
                consecutive = 0
                radius = 0.5 * step_len
                continue
            actual = f_sq - float(f_trial @ f_trial)
            ratio = actual / predicted if predicted > 0.0 else -1.0
            trial_norm = float(np.max(np.abs(f_trial)))
            if actual > 0.0 and (ratio > 1e-4 or trial_norm <= settings.residual_tol):
                z = z + step
                f = f_trial
                norm_inf = trial_norm
                if ratio < 0.1:
                    consecutive = 0
                    radius = 0.5 * min(radius, 2.0 * step_len)
                else:
                    consecutive += 1
                    if ratio >= 0.5 or consecutive > 1:
                        radius = max(radius, 2.0 * step_len)
                    if abs(ratio - 1.0) <= 0.1:
                        # the model is locally exact, re-center on this step
                        radius = 2.0 * step_len
                    radius = min(radius, settings.trust_radius_max)
                accepted = True
                break
            consecutive = 0
            # Shrink only to half the failed length: the safe step is
            # usually just below it, and quartering wastes a cheap retry.
            radius = 0.5 * step_len

        history.append(norm_inf)
        if not accepted:
            if norm_inf <= near_tol:
                return finish(SolveStatus.CONVERGED, "no acceptable step at a near-root")
            return finish(SolveStatus.STALLED_STEP, "no acceptable dogleg step")
        if norm_inf <= settings.residual_tol:
            return finish(SolveStatus.CONVERGED)

    iteration = settings.max_iterations
    return finish(SolveStatus.MAX_ITERATIONS,
                  f"no convergence within {settings.max_iterations} iterations")
