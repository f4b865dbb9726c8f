"""Adaptive embedded Runge-Kutta 5(4) propagation of the coupled system.

One core loop integrates the packed 8-component vector
(r, v, w, m, p_r, p_v, p_w, p_m-channel) in either direction, with
proportional-integral step control, free dense output for equally spaced
samples, and bookkeeping for the diagnostics the landing problems need:
the minimum radius over accepted steps (with quadratic refinement at
interior lows) and throttle switch detection on the sampled switching
values.

The core is compiled with numba when it is importable and falls back to
the same pure-Python code otherwise.  Residual evaluations inside the
shooting loops use the terminal fast path, which skips sampling and
diagnostics entirely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from .dynamics import (
    CostRegime,
    Costate,
    Direction,
    Engine,
    LanderState,
    _eval_raw,
    _pm_value,
    _running_cost,
)

# Dormand-Prince 5(4) tableau.
_C2, _C3, _C4, _C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63, _A64, _A65 = (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                                49.0 / 176.0, -5103.0 / 18656.0)
_B1, _B3, _B4, _B5, _B6 = (35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0,
                           -2187.0 / 6784.0, 11.0 / 84.0)
_E1, _E3, _E4, _E5, _E6, _E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0,
                                -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)
# Dense-output weights for the 5th-order continuous extension.
_D1, _D3, _D4, _D5, _D6, _D7 = (-12715105075.0 / 11282082432.0,
                                87487479700.0 / 32700410799.0,
                                -10690763975.0 / 1880347072.0,
                                701980252875.0 / 199316789632.0,
                                -1453857185.0 / 822651844.0,
                                69997945.0 / 29380423.0)

_STATUS_DONE = 0
_STATUS_UNDERFLOW = 1
_STATUS_BUDGET = 2
_STATUS_BAD_START = 3

_REASONS = {
    0: "step size underflow",
    1: "nonphysical point (radius or mass not positive)",
    2: "singular steering direction",
}


class PropagationError(RuntimeError):
    """Propagation could not be completed; carries any partial trajectory."""

    def __init__(self, message: str, partial: Optional["Trajectory"] = None):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class IntegrationSettings:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-9
    max_steps: int = 20000
    sample_count: int = 400
    fixed_step: Optional[float] = None  # disables adaptivity when set

    def __post_init__(self) -> None:
        for name in ("rel_tol", "abs_tol"):
            value = getattr(self, name)
            if not (0.0 < value <= 1e-3):
                raise ValueError(f"{name} must lie in (0, 1e-3], got {value!r}")
        if self.max_steps < 1:
            raise ValueError(f"max_steps must be at least 1, got {self.max_steps!r}")
        if self.sample_count < 2:
            raise ValueError(f"sample_count must be at least 2, got {self.sample_count!r}")
        if self.fixed_step is not None and not (self.fixed_step > 0):
            raise ValueError(f"fixed_step must be positive, got {self.fixed_step!r}")


def _make_core(eval_raw):
    """Build the integration loop around a scalar point-evaluation function."""

    def core(y0, length, dmul, kind, factor, kappa, delta, pm_on, tmax, vex,
             rtol, atol, max_steps, sample_s, fixed_step):
        n_q = sample_s.shape[0]
        samples = np.empty((n_q, 8))
        acc_s = np.empty(max_steps + 1)
        acc_r = np.empty(max_steps + 1)
        y = y0.copy()
        ynew = np.empty(8)
        ytmp = np.empty(8)
        k1 = np.empty(8)
        k2 = np.empty(8)
        k3 = np.empty(8)
        k4 = np.empty(8)
        k5 = np.empty(8)
        k6 = np.empty(8)
        k7 = np.empty(8)
        rc1 = np.empty(8)
        rc2 = np.empty(8)
        rc3 = np.empty(8)
        rc4 = np.empty(8)
        rc5 = np.empty(8)

        t = 0.0
        i_q = 0
        while i_q < n_q and sample_s[i_q] <= 0.0:
            for j in range(8):
                samples[i_q, j] = y[j]
            i_q += 1
        acc_s[0] = 0.0
        acc_r[0] = y[0]
        n_acc = 1
        n_steps = 0
        n_rejected = 0
        reason = 0.0

        res = eval_raw(y[0], y[1], y[2], y[3], y[4], y[5], y[6], y[7],
                       kind, factor, kappa, delta, pm_on, tmax, vex)
        if res[0] != 0:
            return (_STATUS_BAD_START, res[0], i_q, n_acc, n_steps, n_rejected,
                    t, samples, acc_s, acc_r, y)
        for j in range(8):
            k1[j] = dmul * res[5 + j]

        # Starting step: compare the state to its first derivative, then
        # refine with one Euler trial, all in the error-weighted norm.
        if fixed_step > 0.0:
            h = fixed_step
        else:
            d0 = 0.0
            d1 = 0.0
            for j in range(8):
                sc = atol + rtol * abs(y[j])
                d0 += (y[j] / sc) ** 2
                d1 += (k1[j] / sc) ** 2
            d0 = math.sqrt(d0 / 8.0)
            d1 = math.sqrt(d1 / 8.0)
            if d0 < 1e-5 or d1 < 1e-5:
                h = 1e-6 * length
            else:
                h = 0.01 * d0 / d1
            if h > length:
                h = length
            for j in range(8):
                ytmp[j] = y[j] + h * k1[j]
            res = eval_raw(ytmp[0], ytmp[1], ytmp[2], ytmp[3], ytmp[4], ytmp[5],
                           ytmp[6], ytmp[7], kind, factor, kappa, delta, pm_on,
                           tmax, vex)
            if res[0] == 0:
                d2 = 0.0
                for j in range(8):
                    sc = atol + rtol * abs(y[j])
                    d2 += ((dmul * res[5 + j] - k1[j]) / sc) ** 2
                d2 = math.sqrt(d2 / 8.0) / h
                dm = max(d1, d2)
                if dm > 1e-15:
                    h1 = (0.01 / dm) ** 0.2
                    h = min(100.0 * h, h1, length)
            else:
                h = 1e-6 * length

        h_min = 1e-14 * length
        fac_old = 1e-4
        safe = 0.9
        beta = 0.04
        expo1 = 0.2 - beta * 0.75
        last_rejected = False
        status = _STATUS_DONE

        while t < length * (1.0 - 1e-16):
            if n_steps + n_rejected >= max_steps:
                status = _STATUS_BUDGET
                break
            if h > length - t:
                h = length - t

            bad = 0
            # stage 2
            for j in range(8):
                ytmp[j] = y[j] + h * _A21 * k1[j]
            res = eval_raw(ytmp[0], ytmp[1], ytmp[2], ytmp[3], ytmp[4], ytmp[5],
                           ytmp[6], ytmp[7], kind, factor, kappa, delta, pm_on, tmax, vex)
            bad = res[0]
            if bad == 0:
                for j in range(8):
                    k2[j] = dmul * res[5 + j]
                # stage 3
                for j in range(8):
                    ytmp[j] = y[j] + h * (_A31 * k1[j] + _A32 * k2[j])
                res = eval_raw(ytmp[0], ytmp[1], ytmp[2], ytmp[3], ytmp[4], ytmp[5],
                               ytmp[6], ytmp[7], kind, factor, kappa, delta, pm_on, tmax, vex)
                bad = res[0]
            if bad == 0:
                for j in range(8):
                    k3[j] = dmul * res[5 + j]
                # stage 4
                for j in range(8):
                    ytmp[j] = y[j] + h * (_A41 * k1[j] + _A42 * k2[j] + _A43 * k3[j])
                res = eval_raw(ytmp[0], ytmp[1], ytmp[2], ytmp[3], ytmp[4], ytmp[5],
                               ytmp[6], ytmp[7], kind, factor, kappa, delta, pm_on, tmax, vex)
                bad = res[0]
            if bad == 0:
                for j in range(8):
                    k4[j] = dmul * res[5 + j]
                # stage 5
                for j in range(8):
                    ytmp[j] = y[j] + h * (_A51 * k1[j] + _A52 * k2[j] + _A53 * k3[j]
                                          + _A54 * k4[j])
                res = eval_raw(ytmp[0], ytmp[1], ytmp[2], ytmp[3], ytmp[4], ytmp[5],
                               ytmp[6], ytmp[7], kind, factor, kappa, delta, pm_on, tmax, vex)
                bad = res[0]
            if bad == 0:
                for j in range(8):
                    k5[j] = dmul * res[5 + j]
                # stage 6
                for j in range(8):
                    ytmp[j] = y[j] + h * (_A61 * k1[j] + _A62 * k2[j] + _A63 * k3[j]
                                          + _A64 * k4[j] + _A65 * k5[j])
                res = eval_raw(ytmp[0], ytmp[1], ytmp[2], ytmp[3], ytmp[4], ytmp[5],
                               ytmp[6], ytmp[7], kind, factor, kappa, delta, pm_on, tmax, vex)
                bad = res[0]
            if bad == 0:
                for j in range(8):
                    k6[j] = dmul * res[5 + j]
                # 5th-order solution, also stage 7 input (first-same-as-last)
                for j in range(8):
                    ynew[j] = y[j] + h * (_B1 * k1[j] + _B3 * k3[j] + _B4 * k4[j]
                                          + _B5 * k5[j] + _B6 * k6[j])
                res = eval_raw(ynew[0], ynew[1], ynew[2], ynew[3], ynew[4], ynew[5],
                               ynew[6], ynew[7], kind, factor, kappa, delta, pm_on, tmax, vex)
                bad = res[0]

            if bad != 0:
                reason = bad
                n_rejected += 1
                h *= 0.25
                last_rejected = True
                if h < h_min:
                    status = _STATUS_UNDERFLOW
                    break
                continue
            for j in range(8):
                k7[j] = dmul * res[5 + j]

            err = 0.0
            for j in range(8):
                e = h * (_E1 * k1[j] + _E3 * k3[j] + _E4 * k4[j] + _E5 * k5[j]
                         + _E6 * k6[j] + _E7 * k7[j])
                sc = atol + rtol * max(abs(y[j]), abs(ynew[j]))
                err += (e / sc) ** 2
            err = math.sqrt(err / 8.0)
            if not (err <= 1e300):
                err = 1e6

            if err <= 1.0 or fixed_step > 0.0:
                # dense output over (t, t + h]
                if i_q < n_q and sample_s[i_q] <= t + h + 1e-12 * length:
                    for j in range(8):
                        dy = ynew[j] - y[j]
                        bspl = h * k1[j] - dy
                        rc1[j] = y[j]
                        rc2[j] = dy
                        rc3[j] = bspl
                        rc4[j] = dy - h * k7[j] - bspl
                        rc5[j] = h * (_D1 * k1[j] + _D3 * k3[j] + _D4 * k4[j]
                                      + _D5 * k5[j] + _D6 * k6[j] + _D7 * k7[j])
                    while i_q < n_q and sample_s[i_q] <= t + h + 1e-12 * length:
                        theta = (sample_s[i_q] - t) / h
                        if theta < 0.0:
                            theta = 0.0
                        elif theta > 1.0:
                            theta = 1.0
                        theta1 = 1.0 - theta
                        for j in range(8):
                            samples[i_q, j] = rc1[j] + theta * (
                                rc2[j] + theta1 * (rc3[j] + theta * (rc4[j] + theta1 * rc5[j])))
                        i_q += 1

                t += h
                for j in range(8):
                    y[j] = ynew[j]
                    k1[j] = k7[j]
                if n_acc <= max_steps:
                    acc_s[n_acc] = t
                    acc_r[n_acc] = y[0]
                    n_acc += 1
                n_steps += 1

                if fixed_step <= 0.0:
                    fac11 = err ** expo1
                    fac = fac11 / fac_old ** beta
                    fac = max(0.1, min(5.0, fac / safe))
                    hnew = h / fac
                    if last_rejected and hnew > h:
                        hnew = h
                    fac_old = max(err, 1e-4)
                    h = hnew
                last_rejected = False
            else:
                fac11 = err ** expo1
                h = h / min(5.0, fac11 / safe)
                n_rejected += 1
                last_rejected = True
                if h < h_min:
                    status = _STATUS_UNDERFLOW
                    break

        if status == _STATUS_DONE:
            while i_q < n_q:
                for j in range(8):
                    samples[i_q, j] = y[j]
                i_q += 1
            t = length

        return (status, reason, i_q, n_acc, n_steps, n_rejected, t,
                samples, acc_s, acc_r, y)

    return core


def _make_diag(eval_raw, running_cost):
    """Per-sample control, switching and Hamiltonian traces."""

    def diag(ys, kind, factor, kappa, delta, pm_on, tmax, vex,
             out_u, out_sp, out_cp, out_s, out_h):
        worst = 0.0
        for i in range(ys.shape[0]):
            res = eval_raw(ys[i, 0], ys[i, 1], ys[i, 2], ys[i, 3],
                           ys[i, 4], ys[i, 5], ys[i, 6], ys[i, 7],
                           kind, factor, kappa, delta, pm_on, tmax, vex)
            if res[0] != 0:
                worst = res[0]
                out_u[i] = np.nan
                out_sp[i] = np.nan
                out_cp[i] = np.nan
                out_s[i] = np.nan
                out_h[i] = np.nan
                continue
            u = res[1]
            out_u[i] = u
            out_sp[i] = res[2]
            out_cp[i] = res[3]
            out_s[i] = res[4]
            ham = (ys[i, 4] * res[5] + ys[i, 5] * res[6] + ys[i, 6] * res[7]
                   + running_cost(u, kind, factor, kappa))
            if pm_on:
                ham += ys[i, 7] * res[8]
            out_h[i] = ham
        return worst

    return diag


try:  # pragma: no cover - exercised implicitly by every test run
    from numba import njit

    _eval_compiled = njit(cache=True)(_eval_raw)
    _running_cost_compiled = njit(cache=True)(_running_cost)
    _core = njit(cache=True)(_make_core(_eval_compiled))
    _diag = njit(cache=True)(_make_diag(_eval_compiled, _running_cost_compiled))
    COMPILED = True
except Exception:  # pragma: no cover
    _core = _make_core(_eval_raw)
    _diag = _make_diag(_eval_raw, _running_cost)
    COMPILED = False


def _regime_scalars(regime: CostRegime) -> Tuple[int, float, float, float, bool]:
    return (regime.kind, regime.factor, regime.kappa, regime.delta,
            regime.include_mass_adjoint)


@dataclass
class Trajectory:
    """Sampled propagation result with control and optimality diagnostics.

    times follow the propagation axis handed to `propagate` (decreasing for
    a reversed span).  `packed` holds one row per sample: r, v, w, m, p_r,
    p_v, p_w and the mass-adjoint channel.  When the regime excludes the
    mass adjoint, that channel is the homogeneous accumulator integrated
    from zero rather than the adjoint itself.
    """

    times: np.ndarray
    packed: np.ndarray
    u: np.ndarray
    sin_psi: np.ndarray
    cos_psi: np.ndarray
    switching: np.ndarray
    hamiltonian: np.ndarray
    min_radius: float
    switch_count: int
    switch_times: np.ndarray
    accepted_times: np.ndarray
    accepted_radius: np.ndarray
    direction: Direction
    regime: CostRegime
    engine: Engine
    n_steps: int
    n_rejected: int

    def __len__(self) -> int:
        return len(self.times)

    # column views
    @property
    def r(self) -> np.ndarray:
        return self.packed[:, 0]

    @property
    def v(self) -> np.ndarray:
        return self.packed[:, 1]

    @property
    def w(self) -> np.ndarray:
        return self.packed[:, 2]

    @property
    def m(self) -> np.ndarray:
        return self.packed[:, 3]

    @property
    def p_r(self) -> np.ndarray:
        return self.packed[:, 4]

    @property
    def p_v(self) -> np.ndarray:
        return self.packed[:, 5]

    @property
    def p_w(self) -> np.ndarray:
        return self.packed[:, 6]

    @property
    def pm_channel(self) -> np.ndarray:
        return self.packed[:, 7]

    def state(self, i: int) -> LanderState:
        row = self.packed[i]
        return LanderState(r=row[0], v=row[1], w=row[2], m=row[3])

    def costate(self, i: int) -> Costate:
        row = self.packed[i]
        p_m = row[7] if self.regime.include_mass_adjoint else None
        return Costate(p_r=row[4], p_v=row[5], p_w=row[6], p_m=p_m)

    def terminal_state(self) -> LanderState:
        return self.state(-1)

    def terminal_costate(self) -> Costate:
        return self.costate(-1)

    def rediagnosed(self, regime: CostRegime, pm_offset: float = 0.0) -> "Trajectory":
        """Same samples, control/switching/Hamiltonian recomputed under `regime`.

        pm_offset shifts the mass-adjoint channel first; the channel obeys a
        source equation independent of its own value, so adding the offset
        turns an accumulator started at zero into the adjoint itself.
        """
        packed = self.packed.copy()
        packed[:, 7] += pm_offset
        new = replace(self, packed=packed, regime=regime)
        _fill_diagnostics(new)
        new.switch_count, new.switch_times = _find_switches(new.times, new.switching)
        return new

    def time_reversed(self) -> "Trajectory":
        """View the same path with the time axis running the other way.

        A propagation over tau in [0, T] becomes one over t = T - tau, with
        samples reversed so times increase; the geometry, controls and
        diagnostics are untouched.
        """
        t_total = self.times[0] + self.times[-1]
        times = (t_total - self.times)[::-1].copy()
        flipped = replace(
            self,
            times=times,
            packed=self.packed[::-1].copy(),
            u=self.u[::-1].copy(),
            sin_psi=self.sin_psi[::-1].copy(),
            cos_psi=self.cos_psi[::-1].copy(),
            switching=self.switching[::-1].copy(),
            hamiltonian=self.hamiltonian[::-1].copy(),
            switch_times=np.sort(t_total - self.switch_times),
            accepted_times=np.sort(t_total - self.accepted_times),
            accepted_radius=self.accepted_radius[::-1].copy(),
            direction=(Direction.FORWARD if self.direction is Direction.BACKWARD
                       else Direction.BACKWARD),
        )
        return flipped

    def to_csv(self, path: Union[str, Path], scales) -> None:
        """Write the sampled trajectory with dimensional columns."""
        import csv

        rows = zip(
            self.times * scales.time,
            self.r * scales.length / 1000.0,
            (self.r - 1.0) * scales.length / 1000.0,
            self.v * scales.speed,
            self.w * scales.angular_rate,
            self.m * scales.mass,
            self.u,
            np.degrees(np.arctan2(self.sin_psi, self.cos_psi)),
            self.switching,
            self.hamiltonian,
        )
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["t_s", "r_km", "h_km", "v_mps", "omega_radps",
                             "m_kg", "u", "psi_deg", "S", "H"])
            for row in rows:
                writer.writerow([repr(float(value)) for value in row])


def _fill_diagnostics(traj: Trajectory) -> None:
    n = len(traj.times)
    traj.u = np.empty(n)
    traj.sin_psi = np.empty(n)
    traj.cos_psi = np.empty(n)
    traj.switching = np.empty(n)
    traj.hamiltonian = np.empty(n)
    kind, factor, kappa, delta, pm_on = _regime_scalars(traj.regime)
    _diag(traj.packed, kind, factor, kappa, delta, pm_on,
          traj.engine.tmax, traj.engine.v_exhaust,
          traj.u, traj.sin_psi, traj.cos_psi, traj.switching, traj.hamiltonian)


def _find_switches(times: np.ndarray, s_vals: np.ndarray) -> Tuple[int, np.ndarray]:
    """Count sign changes of the switching trace; locate them linearly."""
    crossings = []
    prev_sign = 0.0
    prev_t = 0.0
    prev_s = 0.0
    for t, s in zip(times, s_vals):
        if not np.isfinite(s):
            continue
        sign = math.copysign(1.0, s) if s != 0.0 else 0.0
        if sign != 0.0 and prev_sign != 0.0 and sign != prev_sign:
            crossings.append(prev_t + (t - prev_t) * (0.0 - prev_s) / (s - prev_s))
        if sign != 0.0:
            prev_sign = sign
            prev_t = t
            prev_s = s
    return len(crossings), np.array(crossings)


def _refined_min_radius(acc_s: np.ndarray, acc_r: np.ndarray) -> float:
    """Minimum radius over accepted nodes, refined by local parabola fits."""
    best = float(np.min(acc_r)) if len(acc_r) else math.inf
    for i in range(1, len(acc_r) - 1):
        if acc_r[i] < acc_r[i - 1] and acc_r[i] < acc_r[i + 1]:
            u0 = acc_s[i - 1] - acc_s[i]
            u2 = acc_s[i + 1] - acc_s[i]
            y0 = acc_r[i - 1] - acc_r[i]
            y2 = acc_r[i + 1] - acc_r[i]
            det = u0 * u2 * (u0 - u2)
            if det == 0.0:
                continue
            c2 = (y0 * u2 - y2 * u0) / det
            c1 = (y2 * u0 * u0 - y0 * u2 * u2) / det
            if c2 <= 0.0:
                continue
            u_star = -c1 / (2.0 * c2)
            if u0 < u_star < u2:
                best = min(best, acc_r[i] + c1 * u_star + c2 * u_star * u_star)
    return best


def _pack_initial(state: LanderState, costate: Costate, regime: CostRegime) -> np.ndarray:
    pm = _pm_value(costate, regime)
    return np.array([state.r, state.v, state.w, state.m,
                     costate.p_r, costate.p_v, costate.p_w, pm])


def _run_core(engine: Engine, y0: np.ndarray, t_start: float, t_end: float,
              regime: CostRegime, direction: Direction,
              settings: IntegrationSettings, sample_s: np.ndarray):
    length = abs(t_end - t_start)
    t_sign = 1.0 if t_end >= t_start else -1.0
    dmul = direction.sign * t_sign
    kind, factor, kappa, delta, pm_on = _regime_scalars(regime)
    fixed = settings.fixed_step if settings.fixed_step is not None else 0.0
    return _core(y0, length, dmul, kind, factor, kappa, delta, pm_on,
                 engine.tmax, engine.v_exhaust,
                 settings.rel_tol, settings.abs_tol, settings.max_steps,
                 sample_s, fixed)


def _build_trajectory(engine, regime, direction, t_start, t_sign,
                      sample_s, samples, n_filled, acc_s, acc_r, n_acc,
                      n_steps, n_rejected) -> Trajectory:
    times = t_start + t_sign * sample_s[:n_filled]
    packed = samples[:n_filled]
    acc_t = t_start + t_sign * acc_s[:n_acc]
    traj = Trajectory(
        times=times,
        packed=packed,
        u=np.empty(0), sin_psi=np.empty(0), cos_psi=np.empty(0),
        switching=np.empty(0), hamiltonian=np.empty(0),
        min_radius=math.nan,
        switch_count=0,
        switch_times=np.empty(0),
        accepted_times=acc_t,
        accepted_radius=acc_r[:n_acc].copy(),
        direction=direction,
        regime=regime,
        engine=engine,
        n_steps=n_steps,
        n_rejected=n_rejected,
    )
    _fill_diagnostics(traj)
    mins = _refined_min_radius(acc_s[:n_acc], acc_r[:n_acc])
    if n_filled:
        mins = min(mins, float(np.min(packed[:, 0])))
    traj.min_radius = mins
    traj.switch_count, traj.switch_times = _find_switches(traj.times, traj.switching)
    return traj


def propagate(engine: Engine, state: LanderState, costate: Costate,
              span: Tuple[float, float], regime: CostRegime,
              direction: Direction = Direction.FORWARD,
              settings: IntegrationSettings = IntegrationSettings()) -> Trajectory:
    """Propagate state and co-state over `span`, sampling uniformly.

    A reversed span (t_end below t_start) integrates the same field with
    time running the other way; `direction` selects the forward or the
    backward (sign-flipped) field itself.  A zero-length span returns the
    initial point unchanged as a single sample.
    """
    t_start, t_end = float(span[0]), float(span[1])
    if not (math.isfinite(t_start) and math.isfinite(t_end)):
        raise ValueError(f"span must be finite, got {span!r}")
    y0 = _pack_initial(state, costate, regime)
    if not np.all(np.isfinite(y0)):
        raise PropagationError("initial point is not finite")

    if t_end == t_start:
        samples = np.repeat(y0[None, :], 1, axis=0)
        return _build_trajectory(engine, regime, direction, t_start, 1.0,
                                 np.zeros(1), samples, 1,
                                 np.zeros(1), np.array([y0[0]]), 1, 0, 0)

    length = abs(t_end - t_start)
    t_sign = 1.0 if t_end >= t_start else -1.0
    sample_s = np.linspace(0.0, length, settings.sample_count)
    (status, reason, n_filled, n_acc, n_steps, n_rejected, _t_reached,
     samples, acc_s, acc_r, _y) = _run_core(
        engine, y0, t_start, t_end, regime, direction, settings, sample_s)

    if status != _STATUS_DONE:
        partial = _build_trajectory(engine, regime, direction, t_start, t_sign,
                                    sample_s, samples, n_filled, acc_s, acc_r,
                                    n_acc, n_steps, n_rejected)
        if status == _STATUS_BAD_START:
            message = f"initial point rejected: {_REASONS.get(reason, 'invalid')}"
        elif status == _STATUS_BUDGET:
            message = f"step budget of {settings.max_steps} exhausted"
        else:
            message = f"{_REASONS[0]}: {_REASONS.get(reason, 'error control failure')}"
        raise PropagationError(message, partial=partial)

    return _build_trajectory(engine, regime, direction, t_start, t_sign,
                             sample_s, samples, n_filled, acc_s, acc_r,
                             n_acc, n_steps, n_rejected)


def _terminal_packed(engine: Engine, y0: np.ndarray, t_end: float,
                     regime: CostRegime, direction: Direction,
                     settings: IntegrationSettings) -> np.ndarray:
    """Fast endpoint-only propagation from t = 0; used by shooting residuals."""
    if not math.isfinite(t_end):
        raise PropagationError(f"propagation span must be finite, got {t_end!r}")
    if t_end == 0.0:
        return y0.copy()
    empty = np.empty(0)
    (status, reason, _n_filled, _n_acc, _n_steps, _n_rej, _t_reached,
     _samples, _acc_s, _acc_r, y) = _run_core(
        engine, y0, 0.0, t_end, regime, direction, settings, empty)
    if status != _STATUS_DONE:
        raise PropagationError(
            f"propagation failed at t={_t_reached!r}: "
            f"{_REASONS.get(reason, 'step control failure') if status != _STATUS_BUDGET else 'step budget exhausted'}")
    return y

def terminal_point(engine: Engine, state: LanderState, costate: Costate,
                   t_end: float, regime: CostRegime,
                   direction: Direction = Direction.FORWARD,
                   settings: IntegrationSettings = IntegrationSettings()
                   ) -> Tuple[LanderState, Costate]:
    """Endpoint of the propagation from t = 0 to t_end, skipping sampling."""
    y0 = _pack_initial(state, costate, regime)
    if not np.all(np.isfinite(y0)):
        raise PropagationError("initial point is not finite")
    y = _terminal_packed(engine, y0, float(t_end), regime, direction, settings)
    terminal = LanderState(r=y[0], v=y[1], w=y[2], m=y[3])
    p_m = y[7] if regime.include_mass_adjoint else None
    return terminal, Costate(p_r=y[4], p_v=y[5], p_w=y[6], p_m=p_m)
