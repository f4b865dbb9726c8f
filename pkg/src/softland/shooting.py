"""Shooting formulations that turn the landing problems into root finding.

Each formulation packs the unknown boundary values into a flat vector,
propagates the coupled state/co-state system across the unknown flight
time, and reports boundary-condition mismatches for the root finder.
Forward variants start at the given initial condition and target the
touchdown state; backward variants anchor at touchdown, where almost
everything is known, and match the initial condition at the far end.

The backward time-optimal formulation adds the physics that makes it
robust: the touchdown co-states live on the unit octant sphere, the
touchdown mass and the flight time are seeded from an energy-budget
estimate, and the mass adjoint is carried as a zero-seeded channel so its
missing initial value falls out of the solve instead of being searched
for.  An optional substitution stores the flight-time unknown as its
logarithm, which makes negative flight times unrepresentable.

All vectors and residuals here are nondimensional; `InitialCondition`
owns the conversion from dimensional inputs.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

import numpy as np

from .dynamics import (
    FUEL,
    HOMOTOPY,
    TIME,
    Costate,
    CostRegime,
    Direction,
    Engine,
    FormulationMismatchError,
    LanderState,
    _hamiltonian_raw,
    _regime_args,
)
from .integrator import (
    IntegrationSettings,
    PropagationError,
    Trajectory,
    _terminal_packed,
    propagate,
)
from .rootfind import SolveReport, SolverSettings, SolveStatus, solve
from .scaling import PhysicalConstants, Scales

# Feasibility tolerance on the scaled minimum radius (about 1.7 mm): below
# integrator noise, above roundoff.
SURFACE_TOLERANCE = 1e-9

# Stream tag separating guess draws from initial-condition draws.
_GUESS_STREAM = 90001


class Formulation(Enum):
    """Unknown-vector layout and residual assembly of one shooting variant.

    Slot layouts (final slot is always the flight time):
      FWD_ICVN_TIME   [p_r0, p_v0, p_w0, p_m0, p0, t_f]
      FWD_SICVN_TIME  [p_r0, p_v0, p_w0, t_f]
      BWD_PIIM_TIME   [p_r, p_v, p_w, m, t_f]     co-states and mass at touchdown
      FWD_ICVN_FUEL   [p_r0, p_v0, p_w0, p_m0, p0F, t_f]
      BWD_HOMOTOPY    [p_r, p_v, p_w, m, t_f]     touchdown values, p_m(touchdown) = 0
      FWD_HOMOTOPY    [p_r0, p_v0, p_w0, p_m0, t_f]
    """

    FWD_ICVN_TIME = "fwd-icvn-time"
    FWD_SICVN_TIME = "fwd-sicvn-time"
    BWD_PIIM_TIME = "bwd-piim-time"
    FWD_ICVN_FUEL = "fwd-icvn-fuel"
    BWD_HOMOTOPY = "bwd-homotopy"
    FWD_HOMOTOPY = "fwd-homotopy"

    @property
    def unknowns(self) -> int:
        return _VECTOR_LENGTHS[self]

    @property
    def backward(self) -> bool:
        return self in (Formulation.BWD_PIIM_TIME, Formulation.BWD_HOMOTOPY)

    @property
    def regime_kind(self) -> int:
        return _REGIME_KINDS[self]


_VECTOR_LENGTHS = {
    Formulation.FWD_ICVN_TIME: 6,
    Formulation.FWD_SICVN_TIME: 4,
    Formulation.BWD_PIIM_TIME: 5,
    Formulation.FWD_ICVN_FUEL: 6,
    Formulation.BWD_HOMOTOPY: 5,
    Formulation.FWD_HOMOTOPY: 5,
}

_REGIME_KINDS = {
    Formulation.FWD_ICVN_TIME: TIME,
    Formulation.FWD_SICVN_TIME: TIME,
    Formulation.BWD_PIIM_TIME: TIME,
    Formulation.FWD_ICVN_FUEL: FUEL,
    Formulation.BWD_HOMOTOPY: HOMOTOPY,
    Formulation.FWD_HOMOTOPY: HOMOTOPY,
}

# Command-line method names.
METHOD_FORMULATIONS = {
    "backward-piim": Formulation.BWD_PIIM_TIME,
    "forward-icvn": Formulation.FWD_ICVN_TIME,
    "forward-sicvn": Formulation.FWD_SICVN_TIME,
    "direct-icvn": Formulation.FWD_ICVN_FUEL,
    "homotopy-backward": Formulation.BWD_HOMOTOPY,
    "homotopy-forward": Formulation.FWD_HOMOTOPY,
}


@dataclass(frozen=True)
class InitialCondition:
    """One landing problem: dimensional inputs plus their scaled mirrors."""

    r0_km: float
    v0_mps: float
    omega0_radps: float
    m0_kg: float
    constants: PhysicalConstants
    scales: Scales
    engine: Engine
    r0: float  # scaled radius
    v0: float  # scaled radial speed
    w0: float  # scaled angular rate

    @classmethod
    def from_dimensional(cls, r0_km: float, v0_mps: float, omega0_radps: float,
                         m0_kg: float,
                         constants: Optional[PhysicalConstants] = None
                         ) -> "InitialCondition":
        constants = PhysicalConstants() if constants is None else constants
        r0_m = r0_km * 1000.0
        if not (math.isfinite(r0_m) and r0_m >= constants.radius * (1.0 - 1e-12)):
            raise ValueError(
                f"initial radius {r0_km!r} km is below the surface "
                f"({constants.radius / 1000.0} km)")
        for name, value in (("v0_mps", v0_mps), ("omega0_radps", omega0_radps)):
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
        scales = Scales.for_problem(constants, m0_kg)
        engine = Engine.from_constants(constants, scales)
        return cls(
            r0_km=r0_km, v0_mps=v0_mps, omega0_radps=omega0_radps, m0_kg=m0_kg,
            constants=constants, scales=scales, engine=engine,
            r0=r0_m / scales.length,
            v0=v0_mps / scales.speed,
            w0=omega0_radps / scales.angular_rate,
        )

    @property
    def initial_state(self) -> LanderState:
        return LanderState(r=self.r0, v=self.v0, w=self.w0, m=1.0)

    def as_dict(self) -> dict:
        return {"r0_km": self.r0_km, "v0_mps": self.v0_mps,
                "omega0_radps": self.omega0_radps, "m0_kg": self.m0_kg}


@dataclass(frozen=True)
class EstimateBundle:
    """Energy-budget estimates seeding the time-optimal solve (all scaled)."""

    e0: float  # specific mechanical energy, zero at rest on the surface
    delta_v: float  # speed change needed to null that energy
    delta_m_hat: float  # propellant estimate as a fraction of the initial mass
    t_f_hat: float  # flight-time estimate at full throttle
    t_max: float  # hard bound: full throttle burns the entire vehicle mass


def estimate(ic: InitialCondition, engine: Optional[Engine] = None) -> EstimateBundle:
    """Flight-time and propellant estimates from the initial energy budget.

    Potential energy uses the local gravity at the initial radius, matching
    the near-surface regime the admissible domain covers.  The propellant
    follows from the rocket equation with a 5% finite-thrust allowance, and
    the time estimate divides it by the full-throttle mass flow.
    """
    engine = ic.engine if engine is None else engine
    if ic.r0 < 1.0:
        raise ValueError(f"scaled initial radius {ic.r0!r} is below the surface")
    e0 = 0.5 * (ic.v0**2 + (ic.w0 * ic.r0)**2) + (ic.r0 - 1.0) / ic.r0**2
    delta_v = math.sqrt(2.0 * e0)
    delta_m_hat = 1.05 * (1.0 - math.exp(-delta_v / engine.v_exhaust))
    t_max = engine.v_exhaust / engine.tmax
    return EstimateBundle(
        e0=e0,
        delta_v=delta_v,
        delta_m_hat=delta_m_hat,
        t_f_hat=delta_m_hat * engine.v_exhaust / engine.tmax,
        t_max=t_max,
    )


@dataclass(frozen=True)
class ShootingVector:
    """Flat unknown vector of one formulation.

    With the remedy active the final slot stores xi with t_f = exp(xi), so
    every representable vector decodes to a positive flight time; without
    it the slot is the flight time itself, sign and all.
    """

    kind: Formulation
    values: np.ndarray
    remedy_active: bool = False

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float).copy()
        if values.shape != (self.kind.unknowns,):
            raise ValueError(
                f"{self.kind.value} takes {self.kind.unknowns} unknowns, "
                f"got shape {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def t_f(self) -> float:
        slot = float(self.values[-1])
        return math.exp(slot) if self.remedy_active else slot

    def with_values(self, values: np.ndarray) -> "ShootingVector":
        return ShootingVector(self.kind, values, self.remedy_active)

    def apply_remedy(self) -> "ShootingVector":
        if self.remedy_active:
            return self
        t_f = float(self.values[-1])
        if not (t_f > 0.0):
            raise ValueError(f"cannot encode a nonpositive flight time {t_f!r}")
        values = self.values.copy()
        values[-1] = math.log(t_f)
        return ShootingVector(self.kind, values, True)

    def without_remedy(self) -> "ShootingVector":
        if not self.remedy_active:
            return self
        values = self.values.copy()
        values[-1] = math.exp(values[-1])
        return ShootingVector(self.kind, values, False)


def initial_guess(kind: Formulation, ic: InitialCondition,
                  rng: np.random.Generator, remedy: bool = False,
                  tf_mode: str = "estimate") -> ShootingVector:
    """Random starting vector for one solve attempt.

    Free co-state slots draw uniformly from (-1, 1) and the positive slots
    from (0, 1).  The backward kinds draw the touchdown co-state direction
    uniformly on the unit sphere and fold it into the octant (+, -, +),
    and seed the touchdown mass from the propellant estimate.  tf_mode
    picks the flight-time seed: "estimate" uses the analytic estimate
    (the direct fuel formulation draws between the estimate and the hard
    bound, where its longer flight time must lie), "uniform" draws from
    (0, t_max].
    """
    est = estimate(ic)
    if kind.backward:
        direction = rng.standard_normal(3)
        nrm = float(np.linalg.norm(direction))
        while nrm < 1e-12:
            direction = rng.standard_normal(3)
            nrm = float(np.linalg.norm(direction))
        direction /= nrm
        head = [abs(direction[0]), -abs(direction[1]), abs(direction[2]),
                1.0 - est.delta_m_hat]
    elif kind is Formulation.FWD_SICVN_TIME:
        head = list(rng.uniform(-1.0, 1.0, size=3))
    elif kind is Formulation.FWD_HOMOTOPY:
        head = list(rng.uniform(-1.0, 1.0, size=3)) + [rng.uniform(0.0, 1.0)]
    else:  # full-normalization kinds: p_m0 and the cost factor are positive
        head = list(rng.uniform(-1.0, 1.0, size=3)) + \
            [rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)]

    if tf_mode == "estimate":
        if kind is Formulation.FWD_ICVN_FUEL:
            t_f = est.t_f_hat + (est.t_max - est.t_f_hat) * rng.uniform()
        else:
            t_f = est.t_f_hat
    elif tf_mode == "uniform":
        t_f = est.t_max * (1.0 - rng.random())
    else:
        raise ValueError(f"unknown tf_mode {tf_mode!r}")

    if remedy:
        slot = math.log(t_f) if t_f > 0.0 else math.log(est.t_max / 2.0)
        return ShootingVector(kind, np.array(head + [slot]), True)
    return ShootingVector(kind, np.array(head + [t_f]), False)


def _check_regime(kind: Formulation, regime: CostRegime) -> None:
    if regime.kind != kind.regime_kind:
        raise FormulationMismatchError(
            f"{kind.value} needs a {_KIND_LABELS[kind.regime_kind]} regime, "
            f"got {regime.name}")


_KIND_LABELS = {TIME: "time-optimal", FUEL: "fuel-optimal", HOMOTOPY: "homotopy"}


def _endpoint_hamiltonian(y: np.ndarray, regime: CostRegime, engine: Engine) -> float:
    flag, value = _hamiltonian_raw(y[0], y[1], y[2], y[3], y[4], y[5], y[6], y[7],
                                   *_regime_args(regime), engine.tmax,
                                   engine.v_exhaust)
    if flag == 1:
        raise PropagationError(
            f"nonphysical endpoint: r={y[0]!r}, m={y[3]!r}")
    if flag == 2:
        raise PropagationError("steering direction vanished at the endpoint")
    return value


def _residual_array(kind: Formulation, values: np.ndarray, remedy: bool,
                    ic: InitialCondition, regime: CostRegime,
                    settings: IntegrationSettings) -> np.ndarray:
    """Residual assembly on the raw solver vector; see `residual`."""
    engine = ic.engine
    slot = values[-1]
    t_f = math.exp(slot) if remedy else slot
    if not math.isfinite(t_f):
        raise PropagationError(f"flight time decoded to {t_f!r}")

    if kind.backward:
        # anchored at touchdown: soft-landing state, unknown mass, p_m = 0
        y0 = np.array([1.0, 0.0, 0.0, values[3],
                       values[0], values[1], values[2], 0.0])
        y = _terminal_packed(engine, y0, t_f, regime, Direction.BACKWARD, settings)
        mismatch = [y[0] - ic.r0, y[1] - ic.v0, y[2] - ic.w0, y[3] - 1.0]
        if kind is Formulation.BWD_PIIM_TIME:
            norm3 = values[0]**2 + values[1]**2 + values[2]**2
            return np.array(mismatch + [norm3 - 1.0])
        return np.array(mismatch + [_endpoint_hamiltonian(y, regime, engine)])

    pm0 = 0.0 if kind is Formulation.FWD_SICVN_TIME else values[3]
    if kind in (Formulation.FWD_ICVN_TIME, Formulation.FWD_ICVN_FUEL):
        regime = replace(regime, factor=values[4])
    y0 = np.array([ic.r0, ic.v0, ic.w0, 1.0,
                   values[0], values[1], values[2], pm0])
    y = _terminal_packed(engine, y0, t_f, regime, Direction.FORWARD, settings)
    landing = [y[0] - 1.0, y[1], y[2]]

    if kind is Formulation.FWD_SICVN_TIME:
        norm3 = values[0]**2 + values[1]**2 + values[2]**2
        return np.array(landing + [norm3 - 1.0])
    if kind is Formulation.FWD_HOMOTOPY:
        return np.array(landing + [y[7], _endpoint_hamiltonian(y, regime, engine)])
    norm5 = float(np.dot(values[:5], values[:5]))
    return np.array(landing + [y[7], norm5 - 1.0,
                               _endpoint_hamiltonian(y, regime, engine)])


def residual(z: ShootingVector, ic: InitialCondition, regime: CostRegime,
             settings: IntegrationSettings = IntegrationSettings()) -> np.ndarray:
    """Boundary-condition mismatch of one shooting vector.

    The full-normalization kinds read their cost factor from the vector,
    overriding whatever the regime carries.  Propagation failures raise;
    the root finder treats them as failed trial points.  Nonpositive
    decoded flight times are propagated over a reversed span rather than
    rejected, so unremedied solves can expose their negative-time
    solutions for what they are.
    """
    _check_regime(z.kind, regime)
    return _residual_array(z.kind, np.asarray(z.values, dtype=float),
                           z.remedy_active, ic, regime, settings)


@dataclass(frozen=True)
class ReconstructionResult:
    """Quantities recovered after a reduced time-optimal solve.

    delta_p_m is the total variation of the mass adjoint along the path;
    choosing p_m0 = -delta_p_m drives the adjoint to zero at touchdown.
    p0 is the cost factor making the Hamiltonian vanish, positive whenever
    the engine can hover at touchdown.  k rescales the recovered factor
    onto the reduced normalization; it exists only while |delta_p_m| < 1.
    """

    delta_p_m: float
    p_m0: float
    k: Optional[float]
    p0: float
    initial_costate: Costate  # full co-state at departure, p_m included


def reconstruct(kind: Formulation, trajectory: Trajectory,
                ic: InitialCondition) -> ReconstructionResult:
    """Recover p_m0 and the cost factor from a reduced time-optimal solution.

    `trajectory` must be the solved path in forward time order (backward
    solutions reversed first).  Its mass-adjoint channel is the zero-seeded
    accumulator the solve produced: for the backward formulation that
    accumulator already equals the adjoint, for the forward reduced one it
    equals the adjoint's variation since departure.
    """
    if kind is Formulation.BWD_PIIM_TIME:
        delta_p_m = -float(trajectory.pm_channel[0])
    elif kind is Formulation.FWD_SICVN_TIME:
        delta_p_m = float(trajectory.pm_channel[-1])
    else:
        raise FormulationMismatchError(
            f"reconstruction applies to the reduced time-optimal kinds, "
            f"not {kind.value}")
    p_m0 = -delta_p_m

    r_td = float(trajectory.r[-1])
    m_td = float(trajectory.m[-1])
    p_v_td = float(trajectory.p_v[-1])
    p_w_td = float(trajectory.p_w[-1])
    p0 = ic.engine.tmax / m_td * math.hypot(p_v_td, p_w_td / r_td) + p_v_td
    if not (p0 > 0.0):
        raise ValueError(
            f"recovered cost factor {p0!r} is not positive; "
            f"the solution violates the touchdown thrust-over-weight argument")

    k = 1.0 / math.sqrt(1.0 - delta_p_m**2) if abs(delta_p_m) < 1.0 else None
    initial = Costate(p_r=float(trajectory.p_r[0]), p_v=float(trajectory.p_v[0]),
                      p_w=float(trajectory.p_w[0]), p_m=p_m0)
    return ReconstructionResult(delta_p_m=delta_p_m, p_m0=p_m0, k=k, p0=p0,
                                initial_costate=initial)


class LandingOutcome(Enum):
    SUCCESSFUL_LANDING = "successful-landing"
    NEGATIVE_FINAL_TIME = "negative-final-time"
    SUBSURFACE = "subsurface"
    NOT_CONVERGED = "not-converged"


def classify(report: SolveReport, trajectory: Optional[Trajectory]
             ) -> LandingOutcome:
    """Physical verdict on a solve, separate from numerical convergence.

    A converged root is only a landing if its flight time is positive and
    the path never dips below the surface; the sign check comes first
    because a reversed-time path has no meaningful minimum radius.
    """
    if report.status is not SolveStatus.CONVERGED or trajectory is None:
        return LandingOutcome.NOT_CONVERGED
    t_f = float(trajectory.times[-1]) - float(trajectory.times[0])
    if t_f <= 0.0:
        return LandingOutcome.NEGATIVE_FINAL_TIME
    if trajectory.min_radius < 1.0 - SURFACE_TOLERANCE:
        return LandingOutcome.SUBSURFACE
    return LandingOutcome.SUCCESSFUL_LANDING


@dataclass
class SolveOutcome:
    """Everything one shooting solve produced, dimensional fields included."""

    kind: Formulation
    ic: InitialCondition
    report: SolveReport
    outcome: LandingOutcome
    vector: ShootingVector
    regime: CostRegime
    t_f: float  # scaled, signed
    t_f_s: float  # seconds
    fuel_kg: Optional[float]
    reconstruction: Optional[ReconstructionResult]
    trajectory: Optional[Trajectory]  # forward time order
    attempts: int = 1
    solve_seconds: float = 0.0  # informational; never serialized

    @property
    def converged(self) -> bool:
        return self.report.status is SolveStatus.CONVERGED

    @property
    def p0(self) -> Optional[float]:
        if self.reconstruction is not None:
            return self.reconstruction.p0
        if self.kind in (Formulation.FWD_ICVN_TIME, Formulation.FWD_ICVN_FUEL):
            return float(self.vector.values[4])
        if self.regime.kind == HOMOTOPY:
            return self.regime.factor
        return None

    def to_json_dict(self) -> dict:
        recon = None
        if self.reconstruction is not None:
            recon = {
                "delta_p_m": self.reconstruction.delta_p_m,
                "p_m0": self.reconstruction.p_m0,
                "k": self.reconstruction.k,
                "p0": self.reconstruction.p0,
            }
        return {
            "kind": self.kind.value,
            "initial_condition": self.ic.as_dict(),
            "outcome": self.outcome.value,
            "converged": self.converged,
            "t_f": self.t_f,
            "t_f_s": self.t_f_s,
            "fuel_kg": self.fuel_kg,
            "p0": self.p0,
            "min_radius": (None if self.trajectory is None
                           else self.trajectory.min_radius),
            "switch_count": (None if self.trajectory is None
                             else self.trajectory.switch_count),
            "unknowns": [float(v) for v in self.vector.values],
            "remedy_active": self.vector.remedy_active,
            "reconstruction": recon,
            "attempts": self.attempts,
            "solver": self.report.to_json_dict(),
        }


def _sampled_settings(settings: IntegrationSettings) -> IntegrationSettings:
    if settings.sample_count >= 400:
        return settings
    return replace(settings, sample_count=400)


def solution_trajectory(kind: Formulation, vec: ShootingVector,
                        ic: InitialCondition, regime: CostRegime,
                        settings: IntegrationSettings = IntegrationSettings()
                        ) -> Trajectory:
    """Fully sampled forward-time path for a solved (or trial) vector.

    Diagnostics come back under the regime completed with the recovered
    cost factor, and the mass-adjoint channel is shifted to the adjoint
    itself for the reduced forward kind.
    """
    values = vec.values
    t_f = vec.t_f
    settings = _sampled_settings(settings)
    engine = ic.engine

    if kind.backward:
        state = LanderState(r=1.0, v=0.0, w=0.0, m=float(values[3]))
        costate = Costate(p_r=float(values[0]), p_v=float(values[1]),
                          p_w=float(values[2]), p_m=0.0)
        back = propagate(engine, state, costate, (0.0, t_f), regime,
                         Direction.BACKWARD, settings)
        traj = back.time_reversed()
        if kind is Formulation.BWD_PIIM_TIME:
            try:
                recon = reconstruct(kind, traj, ic)
            except ValueError:
                return traj  # wrong solution; keep it inspectable as-is
            full = CostRegime.time_optimal(factor=recon.p0)
            return traj.rediagnosed(full)
        return traj.rediagnosed(regime)

    pm0 = 0.0 if kind is Formulation.FWD_SICVN_TIME else float(values[3])
    if kind in (Formulation.FWD_ICVN_TIME, Formulation.FWD_ICVN_FUEL):
        regime = replace(regime, factor=float(values[4]))
    costate = Costate(p_r=float(values[0]), p_v=float(values[1]),
                      p_w=float(values[2]), p_m=pm0)
    traj = propagate(engine, ic.initial_state, costate, (0.0, t_f), regime,
                     Direction.FORWARD, settings)
    if kind is Formulation.FWD_SICVN_TIME:
        try:
            recon = reconstruct(kind, traj, ic)
        except ValueError:
            return traj
        full = CostRegime.time_optimal(factor=recon.p0)
        return traj.rediagnosed(full, pm_offset=recon.p_m0)
    return traj.rediagnosed(regime)


def finalize(kind: Formulation, ic: InitialCondition, report: SolveReport,
             vec: ShootingVector, regime: CostRegime,
             settings: IntegrationSettings = IntegrationSettings(),
             attempts: int = 1, solve_seconds: float = 0.0) -> SolveOutcome:
    """Post-solve pipeline: re-propagate, reconstruct, classify, package."""
    trajectory: Optional[Trajectory] = None
    reconstruction: Optional[ReconstructionResult] = None
    fuel_kg: Optional[float] = None
    final_regime = regime
    t_f = vec.t_f

    if report.status is SolveStatus.CONVERGED:
        try:
            trajectory = solution_trajectory(kind, vec, ic, regime, settings)
        except PropagationError:
            # converged numerically but the path cannot be re-propagated;
            # the classification below falls back to not-converged
            trajectory = None
        if trajectory is not None:
            final_regime = trajectory.regime
            fuel_kg = (1.0 - float(trajectory.m[-1])) * ic.m0_kg
            if kind in (Formulation.BWD_PIIM_TIME, Formulation.FWD_SICVN_TIME):
                try:
                    reconstruction = reconstruct(kind, trajectory, ic)
                except ValueError:
                    reconstruction = None  # wrong solution, still classifiable

    outcome = classify(report, trajectory)
    return SolveOutcome(
        kind=kind, ic=ic, report=report, outcome=outcome, vector=vec,
        regime=final_regime, t_f=t_f, t_f_s=t_f * ic.scales.time,
        fuel_kg=fuel_kg, reconstruction=reconstruction, trajectory=trajectory,
        attempts=attempts, solve_seconds=solve_seconds,
    )


def base_regime(kind: Formulation, delta: float = 0.1, kappa: float = 1.0,
                factor: float = 0.0) -> CostRegime:
    """Regime matching a formulation; the solve may override the factor."""
    if kind.regime_kind == TIME:
        return CostRegime.time_optimal(factor=factor)
    if kind.regime_kind == FUEL:
        return CostRegime.fuel_optimal(factor=factor, delta=delta)
    return CostRegime.homotopy(factor=factor, kappa=kappa, delta=delta)


def solve_shooting(kind: Formulation, ic: InitialCondition, regime: CostRegime,
                   guess: ShootingVector,
                   solver: SolverSettings = SolverSettings(),
                   integration: IntegrationSettings = IntegrationSettings()
                   ) -> SolveReport:
    """One root-finding run from one guess; no retries, no packaging."""
    _check_regime(kind, regime)
    remedy = guess.remedy_active

    def fn(zvec: np.ndarray) -> np.ndarray:
        return _residual_array(kind, zvec, remedy, ic, regime, integration)

    return solve(fn, guess.values, solver)


def solve_time_optimal(ic: InitialCondition,
                       kind: Formulation = Formulation.BWD_PIIM_TIME,
                       remedy: bool = True,
                       tf_mode: str = "estimate",
                       seed: int = 0,
                       rng: Optional[np.random.Generator] = None,
                       max_attempts: int = 8,
                       solver: SolverSettings = SolverSettings(),
                       integration: IntegrationSettings = IntegrationSettings()
                       ) -> SolveOutcome:
    """Minimum-flight-time landing via the chosen shooting formulation.

    Draws fresh guesses from the rng stream until one converges or the
    attempt budget runs out; batch statistics use max_attempts=1 so rates
    measure single-guess behavior.  The returned trajectory runs forward
    in time regardless of the formulation's propagation direction.
    """
    if kind.regime_kind != TIME:
        raise FormulationMismatchError(f"{kind.value} is not a time-optimal kind")
    if rng is None:
        rng = np.random.default_rng((seed, _GUESS_STREAM))
    regime = base_regime(kind)

    began = time.perf_counter()
    report = None
    vec = None
    attempts = 0
    for attempts in range(1, max(1, max_attempts) + 1):
        guess = initial_guess(kind, ic, rng, remedy=remedy, tf_mode=tf_mode)
        report = solve_shooting(kind, ic, regime, guess, solver, integration)
        vec = guess.with_values(report.z)
        if report.status is SolveStatus.CONVERGED:
            break
    elapsed = time.perf_counter() - began
    return finalize(kind, ic, report, vec, regime, integration,
                    attempts=attempts, solve_seconds=elapsed)
