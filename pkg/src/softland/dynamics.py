"""Planar powered-descent dynamics and the optimality conditions.

The lander is a point mass over a spherically symmetric body, described in
scaled polar coordinates: radius r, radial speed v, angular rate w and mass m
(gravitational parameter, body radius and initial mass are all 1).  The
adjoint variables p_r, p_v, p_w and optionally the mass adjoint p_m ride
along; the thrust pitch angle psi is measured from the local horizontal and
is carried as (sin_psi, cos_psi) so there is no branch cut to manage.

Three cost regimes share one set of equations:

* time-optimal: the throttle sits at the upper bound for the whole descent,
* fuel-optimal: bang-bang throttle, smoothed through a width parameter delta,
* homotopy: a convex blend from the time cost (kappa = 1) down to the fuel
  cost (kappa -> 0), smoothed the same way.

The module keeps every formula in small scalar helpers (`_eval_raw`,
`_hamiltonian_raw`) that the adaptive integrator compiles; the dataclass
operations below are thin, validated wrappers over the same code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np


class SingularSteeringError(RuntimeError):
    """The steering direction is undefined: the (p_v, p_w/r) vector vanished."""


class FormulationMismatchError(ValueError):
    """The cost regime needs the mass adjoint but the co-state does not carry it."""


class Direction(Enum):
    FORWARD = 1.0
    BACKWARD = -1.0

    @property
    def sign(self) -> float:
        return self.value


# Cost-regime codes shared with the compiled integrator core.
COAST = 0
TIME = 1
FUEL = 2
HOMOTOPY = 3

_KIND_NAMES = {COAST: "coast", TIME: "time", FUEL: "fuel", HOMOTOPY: "homotopy"}

# Below this, the steering vector is treated as vanished.
_STEER_TINY = 1e-280


@dataclass(frozen=True)
class Engine:
    """Scaled engine parameters for one problem."""

    tmax: float  # maximum thrust over (initial weight at the surface)
    v_exhaust: float  # Isp*ge over the speed scale

    def __post_init__(self) -> None:
        if not (math.isfinite(self.tmax) and self.tmax > 0):
            raise ValueError(f"scaled thrust must be positive, got {self.tmax!r}")
        if not (math.isfinite(self.v_exhaust) and self.v_exhaust > 0):
            raise ValueError(f"scaled exhaust velocity must be positive, got {self.v_exhaust!r}")

    @classmethod
    def from_constants(cls, constants, scales) -> "Engine":
        return cls(
            tmax=constants.tmax / scales.force,
            v_exhaust=constants.exhaust_velocity / scales.speed,
        )


@dataclass(frozen=True)
class CostRegime:
    """Which cost is being minimized, plus the smoothing/continuation knobs.

    factor is the positive cost-normalization multiplier: the weight on the
    running cost recovered alongside a solution (time and homotopy regimes)
    or attached to the fuel flow (fuel regime).  It is 0 while a solve has
    not recovered it yet.  include_mass_adjoint says whether p_m takes part
    in the switching value and the Hamiltonian; the fuel and homotopy
    regimes always need it.
    """

    kind: int
    factor: float = 0.0
    kappa: float = 1.0
    delta: float = 0.1
    include_mass_adjoint: bool = True

    def __post_init__(self) -> None:
        if self.kind not in _KIND_NAMES:
            raise ValueError(f"unknown cost-regime kind {self.kind!r}")
        # Only finiteness is required here: the factor is a shooting unknown
        # in the full-normalization formulations, so solver iterates may pass
        # transiently negative trial values.  Solutions enforce positivity.
        if not math.isfinite(self.factor):
            raise ValueError(f"cost factor must be finite, got {self.factor!r}")
        if not (0.0 < self.kappa <= 1.0):
            raise ValueError(f"kappa must lie in (0, 1], got {self.kappa!r}")
        if not (math.isfinite(self.delta) and self.delta > 0):
            raise ValueError(f"smoothing width must be positive, got {self.delta!r}")
        if self.kind in (FUEL, HOMOTOPY) and not self.include_mass_adjoint:
            raise FormulationMismatchError(
                f"the {_KIND_NAMES[self.kind]} regime requires the mass adjoint"
            )

    @classmethod
    def coast(cls) -> "CostRegime":
        return cls(kind=COAST, include_mass_adjoint=False)

    @classmethod
    def time_optimal(cls, factor: float = 0.0, include_mass_adjoint: bool = True) -> "CostRegime":
        return cls(kind=TIME, factor=factor, include_mass_adjoint=include_mass_adjoint)

    @classmethod
    def fuel_optimal(cls, factor: float, delta: float) -> "CostRegime":
        return cls(kind=FUEL, factor=factor, delta=delta)

    @classmethod
    def homotopy(cls, factor: float, kappa: float, delta: float) -> "CostRegime":
        return cls(kind=HOMOTOPY, factor=factor, kappa=kappa, delta=delta)

    @property
    def name(self) -> str:
        return _KIND_NAMES[self.kind]


@dataclass(frozen=True)
class LanderState:
    r: float  # radius, scaled
    v: float  # radial speed, scaled
    w: float  # angular rate, scaled
    m: float  # mass, scaled


@dataclass(frozen=True)
class Costate:
    p_r: float
    p_v: float
    p_w: float
    p_m: Optional[float] = None  # None when the formulation does not carry it


@dataclass(frozen=True)
class Control:
    u: float  # throttle in [0, 1]
    sin_psi: float
    cos_psi: float

    def __post_init__(self) -> None:
        if not (-1e-12 <= self.u <= 1.0 + 1e-12):
            raise ValueError(f"throttle must lie in [0, 1], got {self.u!r}")
        norm = self.sin_psi**2 + self.cos_psi**2
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"(sin_psi, cos_psi) must be unit length, squared norm {norm!r}")

    @property
    def psi(self) -> float:
        return math.atan2(self.sin_psi, self.cos_psi)


# ---------------------------------------------------------------------------
# scalar core shared with the compiled integrator
# ---------------------------------------------------------------------------

def _eval_raw(r, v, w, m, pr, pv, pw, pm,
              kind, factor, kappa, delta, pm_on, tmax, vex):
    """Control law, switching value and forward-time derivatives at one point.

    Returns (flag, u, sin_psi, cos_psi, s_value,
             dr, dv, dw, dm, dpr, dpv, dpw, dpm)
    with flag 0.0 on success, 1.0 on a nonphysical point (r or m not
    positive), 2.0 on a vanished steering vector.  The flag is a float so
    the whole tuple is homogeneous, which lets the compiled integrator
    index it by position.  The mass-adjoint equation is always
    evaluated: when pm_on is false the channel just accumulates from
    whatever start value the caller seeded, without feeding back into the
    switching value or the Hamiltonian (the throttle never depends on it in
    the time regime anyway).
    """
    if r <= 0.0 or m <= 0.0:
        return (1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    inv_r = 1.0 / r
    pw_r = pw * inv_r
    if kind == 0:  # coast: no thrust, steering placeholder along the horizontal
        u = 0.0
        sp = 0.0
        cp = 1.0
        s_value = 0.0
    else:
        nrm = math.sqrt(pv * pv + pw_r * pw_r)
        if nrm < _STEER_TINY:
            return (2.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
        sp = -pv / nrm
        cp = pw_r / nrm
        s_value = -tmax * (nrm / m + (pm / vex if pm_on else 0.0))
        if kind == 1:  # time: the switching value stays negative, full throttle
            u = 1.0
        elif kind == 2:  # fuel
            s_value += factor
            u = 0.5 * (1.0 - s_value / math.sqrt(s_value * s_value + delta))
        else:  # homotopy
            s_value += 1.0 - kappa
            if kappa >= 1.0:
                # The blend still carries the pure time cost, whose switching
                # value never reaches zero: the bound is active, exactly.
                u = 1.0
            else:
                u = 0.5 * (1.0 - s_value / math.sqrt(s_value * s_value + delta))

    acc = u * tmax / m
    grav = inv_r * inv_r
    tang = acc * cp + 2.0 * v * w
    dr = v
    dv = acc * sp - grav + r * w * w
    dw = -tang * inv_r
    dm = -u * tmax / vex
    dpr = -2.0 * pv * grav * inv_r - pv * w * w - pw * tang * inv_r * inv_r
    dpv = -pr + 2.0 * pw * w * inv_r
    dpw = -2.0 * pv * r * w + 2.0 * pw * v * inv_r
    dpm = u * tmax / (m * m) * (pv * sp - pw * cp * inv_r)
    return (0.0, u, sp, cp, s_value, dr, dv, dw, dm, dpr, dpv, dpw, dpm)


def _running_cost(u, kind, factor, kappa):
    if kind == 1:
        return factor
    if kind == 2:
        return factor * u
    if kind == 3:
        return factor * kappa + (1.0 - kappa) * u
    return 0.0


def _hamiltonian_raw(r, v, w, m, pr, pv, pw, pm,
                     kind, factor, kappa, delta, pm_on, tmax, vex):
    """Hamiltonian under the pointwise-optimal control; same flag convention."""
    out = _eval_raw(r, v, w, m, pr, pv, pw, pm,
                    kind, factor, kappa, delta, pm_on, tmax, vex)
    flag = out[0]
    if flag != 0.0:
        return (flag, 0.0)
    u = out[1]
    dr, dv, dw, dm = out[5], out[6], out[7], out[8]
    ham = pr * dr + pv * dv + pw * dw + _running_cost(u, kind, factor, kappa)
    if pm_on:
        ham += pm * dm
    return (0.0, ham)


def _regime_args(regime: CostRegime) -> Tuple[int, float, float, float, bool]:
    return (regime.kind, regime.factor, regime.kappa, regime.delta,
            regime.include_mass_adjoint)


def _pm_value(costate: Costate, regime: CostRegime) -> float:
    if regime.include_mass_adjoint and costate.p_m is None:
        raise FormulationMismatchError(
            f"the {regime.name} regime requires the mass adjoint but the co-state has none"
        )
    return 0.0 if costate.p_m is None else costate.p_m


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def optimal_steering(costate: Costate, r: float) -> Tuple[float, float]:
    """Thrust direction minimizing the Hamiltonian: (sin_psi, cos_psi).

    Invariant under positive rescaling of the co-state.
    """
    if not (r > 0.0):
        raise ValueError(f"radius must be positive, got {r!r}")
    pw_r = costate.p_w / r
    nrm = math.hypot(costate.p_v, pw_r)
    if nrm < _STEER_TINY:
        raise SingularSteeringError("steering vector (p_v, p_w/r) has vanished")
    return (-costate.p_v / nrm, pw_r / nrm)


def smoothed_throttle(s_value: float, delta: float) -> float:
    """Smooth step from 1 (s << 0) to 0 (s >> 0) with width sqrt(delta)."""
    return 0.5 * (1.0 - s_value / math.sqrt(s_value * s_value + delta))


def switching_value(state: LanderState, costate: Costate, regime: CostRegime,
                    engine: Engine) -> float:
    """Throttle switching value S; thrust is favored where S < 0."""
    pm = _pm_value(costate, regime)
    out = _eval_raw(state.r, state.v, state.w, state.m,
                    costate.p_r, costate.p_v, costate.p_w, pm,
                    *_regime_args(regime), engine.tmax, engine.v_exhaust)
    flag = out[0]
    if flag == 1:
        raise ValueError(f"nonphysical state: r={state.r!r}, m={state.m!r}")
    if flag == 2:
        raise SingularSteeringError("steering vector (p_v, p_w/r) has vanished")
    return out[4]


def throttle(s_value: float, regime: CostRegime) -> float:
    """Optimal throttle for a given switching value under the regime."""
    if regime.kind == COAST:
        return 0.0
    if regime.kind == TIME:
        return 1.0
    if regime.kind == HOMOTOPY and regime.kappa >= 1.0:
        return 1.0
    return smoothed_throttle(s_value, regime.delta)


def optimal_control(state: LanderState, costate: Costate, regime: CostRegime,
                    engine: Engine) -> Control:
    """Steering and throttle minimizing the Hamiltonian at one point."""
    if regime.kind == COAST:
        return Control(u=0.0, sin_psi=0.0, cos_psi=1.0)
    sin_psi, cos_psi = optimal_steering(costate, state.r)
    s_value = switching_value(state, costate, regime, engine)
    return Control(u=throttle(s_value, regime), sin_psi=sin_psi, cos_psi=cos_psi)


def state_rhs(state: LanderState, control: Control, engine: Engine,
              direction: Direction = Direction.FORWARD) -> np.ndarray:
    """Time derivative of (r, v, w, m) under the given control."""
    if state.r <= 0.0 or state.m <= 0.0:
        raise ValueError(f"nonphysical state: r={state.r!r}, m={state.m!r}")
    acc = control.u * engine.tmax / state.m
    inv_r = 1.0 / state.r
    sign = direction.sign
    return sign * np.array([
        state.v,
        acc * control.sin_psi - inv_r * inv_r + state.r * state.w**2,
        -(acc * control.cos_psi + 2.0 * state.v * state.w) * inv_r,
        -control.u * engine.tmax / engine.v_exhaust,
    ])

def costate_rhs(state: LanderState, costate: Costate, control: Control,
                regime: CostRegime, engine: Engine,
                direction: Direction = Direction.FORWARD) -> np.ndarray:
    """Time derivative of the co-state; includes the p_m row only when carried.

    Backward propagation negates the forward rows, same as the state side.
    """
    pm = _pm_value(costate, regime)
    if state.r <= 0.0 or state.m <= 0.0:
        raise ValueError(f"nonphysical state: r={state.r!r}, m={state.m!r}")
    inv_r = 1.0 / state.r
    acc = control.u * engine.tmax / state.m
    tang = acc * control.cos_psi + 2.0 * state.v * state.w
    grav = inv_r * inv_r
    dpr = (-2.0 * costate.p_v * grav * inv_r - costate.p_v * state.w**2
           - costate.p_w * tang * inv_r * inv_r)
    dpv = -costate.p_r + 2.0 * costate.p_w * state.w * inv_r
    dpw = -2.0 * costate.p_v * state.r * state.w + 2.0 * costate.p_w * state.v * inv_r
    rows = [dpr, dpv, dpw]
    if costate.p_m is not None:
        dpm = (control.u * engine.tmax / state.m**2
               * (costate.p_v * control.sin_psi - costate.p_w * control.cos_psi * inv_r))
        rows.append(dpm)
    return direction.sign * np.array(rows)


def hamiltonian(state: LanderState, costate: Costate, control: Control,
                regime: CostRegime, engine: Engine) -> float:
    """Hamiltonian value at one point under the given control.

    The mass-adjoint term participates only when the regime carries it.
    """
    pm = _pm_value(costate, regime)
    f = state_rhs(state, control, engine, Direction.FORWARD)
    value = costate.p_r * f[0] + costate.p_v * f[1] + costate.p_w * f[2]
    if regime.include_mass_adjoint:
        value += pm * f[3]
    return value + _running_cost(control.u, regime.kind, regime.factor, regime.kappa)
