"""Continuation from the minimum-time landing to the minimum-fuel landing.

The fuel problem's bang-bang throttle makes cold-start shooting fragile,
so it is reached in stages: a blend parameter kappa walks the running
cost from the time-optimal seed (kappa = 1) toward the fuel cost, at a
generous throttle-smoothing width; then the width delta is sharpened to
its target with kappa held at the final blend.  Every stage warm-starts
from the previous converged vector, and the cost factor recovered from
the seed solve stays fixed throughout.  A failed stage backtracks by
inserting the geometric mean between the last converged and the failed
parameter value; repeated consecutive failures abort the run with the
trace collected so far.

The conventional single-formulation route is also provided: the full
normalization fuel solve continued in delta alone, used as the reference
the staged route is compared against.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .dynamics import CostRegime, Costate, Direction
from .integrator import IntegrationSettings, terminal_point
from .rootfind import SolveReport, SolverSettings, SolveStatus
from .shooting import (
    Formulation,
    InitialCondition,
    LandingOutcome,
    ShootingVector,
    SolveOutcome,
    finalize,
    initial_guess,
    solve_shooting,
    solve_time_optimal,
)

_GUESS_STREAM = 90017  # keep fuel-guess draws apart from the time-solve stream


@dataclass(frozen=True)
class HomotopySchedule:
    """Stage ladder: blend values first, then smoothing widths.

    The blend phase runs at the first smoothing width; the width phase
    then continues at the final blend value over the remaining widths.
    """

    kappa_sequence: Tuple[float, ...] = (1.0, 0.5, 0.25, 0.125, 0.0625)
    delta_sequence: Tuple[float, ...] = (
        1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9)
    max_backtracks: int = 5

    def __post_init__(self) -> None:
        if not self.kappa_sequence or not self.delta_sequence:
            raise ValueError("schedules must be nonempty")
        for name, seq in (("kappa_sequence", self.kappa_sequence),
                          ("delta_sequence", self.delta_sequence)):
            if any(not (0.0 < v) for v in seq):
                raise ValueError(f"{name} values must be positive")
            if any(b >= a for a, b in zip(seq, seq[1:])):
                raise ValueError(f"{name} must be strictly decreasing")
        if any(v > 1.0 for v in self.kappa_sequence):
            raise ValueError("blend values cannot exceed 1")
        if self.max_backtracks < 1:
            raise ValueError("max_backtracks must be positive")


@dataclass(frozen=True)
class StageRecord:
    kappa: float
    delta: float
    t_f: float  # scaled
    t_f_s: float
    fuel_kg: float
    iterations: int
    function_evaluations: int
    backtracks: int  # failed solves consumed since the previous record

    def to_json_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "delta": self.delta,
            "t_f": self.t_f,
            "t_f_s": self.t_f_s,
            "fuel_kg": self.fuel_kg,
            "iterations": self.iterations,
            "function_evaluations": self.function_evaluations,
            "backtracks": self.backtracks,
        }


@dataclass
class HomotopyTrace:
    """Everything a staged fuel solve produced, stage by stage."""

    kind: Formulation
    p0: float  # cost factor carried unchanged from the seed solve
    schedule: HomotopySchedule
    seed: SolveOutcome
    stages: List[StageRecord] = field(default_factory=list)
    final: Optional[SolveOutcome] = None
    solve_seconds: float = 0.0  # informational; never serialized

    @property
    def converged(self) -> bool:
        return (self.final is not None
                and self.final.outcome is LandingOutcome.SUCCESSFUL_LANDING)

    def kappa_path(self) -> List[Tuple[float, float]]:
        """(kappa, t_f) pairs of the blend phase, in solve order."""
        first_delta = self.schedule.delta_sequence[0]
        return [(s.kappa, s.t_f) for s in self.stages if s.delta == first_delta]

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "p0": self.p0,
            "kappa_sequence": list(self.schedule.kappa_sequence),
            "delta_sequence": list(self.schedule.delta_sequence),
            "seed": self.seed.to_json_dict(),
            "stages": [s.to_json_dict() for s in self.stages],
            "final": None if self.final is None else self.final.to_json_dict(),
        }


class HomotopyError(RuntimeError):
    """A stage ran out of backtracks; carries the trace collected so far."""

    def __init__(self, message: str, trace: Optional[HomotopyTrace] = None):
        super().__init__(message)
        self.trace = trace


def _stage_fuel(kind: Formulation, vec: ShootingVector, ic: InitialCondition,
                regime: CostRegime, settings: IntegrationSettings) -> float:
    """Propellant spent by the stage's solution, in kg."""
    if kind.backward:
        return (1.0 - float(vec.values[3])) * ic.m0_kg
    costate = Costate(p_r=float(vec.values[0]), p_v=float(vec.values[1]),
                      p_w=float(vec.values[2]), p_m=float(vec.values[3]))
    state, _ = terminal_point(ic.engine, ic.initial_state, costate, vec.t_f,
                              regime, Direction.FORWARD, settings)
    return (1.0 - state.m) * ic.m0_kg


def _seed_vector(kind: Formulation, seed: SolveOutcome) -> ShootingVector:
    """Warm-start vector for the first stage, from the time-optimal seed."""
    values = seed.vector.values
    if kind is Formulation.BWD_HOMOTOPY:
        if seed.kind is not Formulation.BWD_PIIM_TIME:
            raise ValueError("the backward route seeds from a backward "
                             "time-optimal solution")
        return ShootingVector(kind, values.copy(), seed.vector.remedy_active)
    if seed.kind is not Formulation.FWD_SICVN_TIME:
        raise ValueError("the forward route seeds from the reduced forward "
                         "time-optimal solution")
    if seed.reconstruction is None:
        raise ValueError("the seed solution carries no reconstruction")
    stacked = np.array([values[0], values[1], values[2],
                        seed.reconstruction.p_m0, values[3]])
    return ShootingVector(kind, stacked, seed.vector.remedy_active)


def solve_fuel_homotopy(ic: InitialCondition,
                        direction: str = "backward",
                        schedule: HomotopySchedule = HomotopySchedule(),
                        seed_outcome: Optional[SolveOutcome] = None,
                        seed: int = 0,
                        rng: Optional[np.random.Generator] = None,
                        solver: SolverSettings = SolverSettings(),
                        integration: IntegrationSettings = IntegrationSettings()
                        ) -> HomotopyTrace:
    """Minimum-fuel landing by staged continuation from the time-optimal seed.

    `direction` picks the propagation route: "backward" anchors every
    stage at touchdown (the robust default), "forward" shoots from the
    initial state.  A converged time-optimal outcome of the matching
    formulation can be passed to skip the seed solve.
    """
    began = time.perf_counter()
    if direction == "backward":
        kind = Formulation.BWD_HOMOTOPY
        seed_kind = Formulation.BWD_PIIM_TIME
    elif direction == "forward":
        kind = Formulation.FWD_HOMOTOPY
        seed_kind = Formulation.FWD_SICVN_TIME
    else:
        raise ValueError(f"direction must be backward or forward, got {direction!r}")

    if seed_outcome is None:
        seed_outcome = solve_time_optimal(ic, seed_kind, remedy=True, seed=seed,
                                          rng=rng, solver=solver,
                                          integration=integration)
    if seed_outcome.outcome is not LandingOutcome.SUCCESSFUL_LANDING:
        raise HomotopyError(
            f"time-optimal seed solve ended as {seed_outcome.outcome.value}")
    if seed_outcome.reconstruction is None:
        raise HomotopyError("time-optimal seed carries no recovered cost factor")

    p0 = seed_outcome.reconstruction.p0
    trace = HomotopyTrace(kind=kind, p0=p0, schedule=schedule, seed=seed_outcome)
    vec = _seed_vector(kind, seed_outcome)

    first_delta = schedule.delta_sequence[0]
    ladder = [(kappa, first_delta) for kappa in schedule.kappa_sequence]
    kappa_end = schedule.kappa_sequence[-1]
    ladder += [(kappa_end, d) for d in schedule.delta_sequence if d < first_delta]

    report: Optional[SolveReport] = None
    regime = CostRegime.homotopy(factor=p0, kappa=kappa_end,
                                 delta=schedule.delta_sequence[-1])
    # Walk the ladder as a stack so backtracking can insert intermediates.
    stack = list(reversed(ladder))
    last_good = (schedule.kappa_sequence[0], first_delta)
    consecutive = 0
    while stack:
        kappa, delta = stack.pop()
        regime = CostRegime.homotopy(factor=p0, kappa=kappa, delta=delta)
        report = solve_shooting(kind, ic, regime, vec, solver, integration)
        if report.status is SolveStatus.CONVERGED:
            vec = vec.with_values(report.z)
            trace.stages.append(StageRecord(
                kappa=kappa, delta=delta, t_f=vec.t_f,
                t_f_s=vec.t_f * ic.scales.time,
                fuel_kg=_stage_fuel(kind, vec, ic, regime, integration),
                iterations=report.iterations,
                function_evaluations=report.function_evaluations,
                backtracks=consecutive,
            ))
            last_good = (kappa, delta)
            consecutive = 0
            continue
        consecutive += 1
        if consecutive >= schedule.max_backtracks:
            trace.solve_seconds = time.perf_counter() - began
            raise HomotopyError(
                f"stage kappa={kappa!r} delta={delta!r} failed after "
                f"{consecutive} consecutive backtracks "
                f"({report.status.value}: {report.message})", trace)
        # retry the failed target after an intermediate stage at the
        # geometric mean of the last converged and the failed value
        stack.append((kappa, delta))
        if delta == last_good[1]:
            stack.append((math.sqrt(last_good[0] * kappa), delta))
        else:
            stack.append((kappa, math.sqrt(last_good[1] * delta)))

    trace.final = finalize(kind, ic, report, vec, regime, integration,
                           attempts=1)
    trace.solve_seconds = time.perf_counter() - began
    return trace


def solve_fuel_direct(ic: InitialCondition,
                      deltas: Tuple[float, ...] = HomotopySchedule().delta_sequence,
                      seed_outcome: Optional[SolveOutcome] = None,
                      seed: int = 0,
                      rng: Optional[np.random.Generator] = None,
                      max_attempts: int = 12,
                      max_backtracks: int = 5,
                      solver: SolverSettings = SolverSettings(),
                      integration: IntegrationSettings = IntegrationSettings()
                      ) -> SolveOutcome:
    """Minimum-fuel landing by the full-normalization formulation alone.

    Solves the six-unknown fuel system at the widest smoothing, then
    sharpens delta down the ladder with warm starts and the same
    geometric-mean backtracking as the staged route.  The first stage
    starts from random guesses unless a converged time-optimal outcome
    with a reconstruction is supplied, in which case its normalized full
    co-state seeds the solve.
    """
    began = time.perf_counter()
    kind = Formulation.FWD_ICVN_FUEL
    if rng is None:
        rng = np.random.default_rng((seed, _GUESS_STREAM))
    if any(b >= a for a, b in zip(deltas, deltas[1:])) or not deltas:
        raise ValueError("deltas must be strictly decreasing and nonempty")

    guesses = []
    if seed_outcome is not None and seed_outcome.reconstruction is not None:
        recon = seed_outcome.reconstruction
        c = recon.initial_costate
        head = np.array([c.p_r, c.p_v, c.p_w, recon.p_m0, recon.p0])
        head /= np.linalg.norm(head)  # onto the five-term unit sphere
        slot = seed_outcome.vector.values[-1]
        guesses.append(ShootingVector(
            kind, np.concatenate([head, [slot]]),
            seed_outcome.vector.remedy_active))

    regime = CostRegime.fuel_optimal(factor=0.0, delta=deltas[0])
    report: Optional[SolveReport] = None
    vec: Optional[ShootingVector] = None
    guess: Optional[ShootingVector] = None
    attempts = 0
    for attempts in range(1, max(1, max_attempts) + 1):
        guess = guesses.pop(0) if guesses else initial_guess(
            kind, ic, rng, remedy=True)
        report = solve_shooting(kind, ic, regime, guess, solver, integration)
        if report.status is SolveStatus.CONVERGED:
            vec = guess.with_values(report.z)
            break
    if vec is None:
        return finalize(kind, ic, report, guess.with_values(report.z),
                        regime, integration, attempts=attempts,
                        solve_seconds=time.perf_counter() - began)

    # Sharpen the smoothing down the ladder.  If the ladder stalls, the
    # outcome reports the last converged width through its regime.
    good_report = report
    stack = list(reversed(deltas[1:]))
    last_good = deltas[0]
    consecutive = 0
    while stack:
        delta = stack.pop()
        regime = CostRegime.fuel_optimal(factor=0.0, delta=delta)
        report = solve_shooting(kind, ic, regime, vec, solver, integration)
        if report.status is SolveStatus.CONVERGED:
            vec = vec.with_values(report.z)
            good_report = report
            last_good = delta
            consecutive = 0
            continue
        consecutive += 1
        if consecutive >= max_backtracks:
            break
        stack.append(delta)
        stack.append(math.sqrt(last_good * delta))

    return finalize(kind, ic, good_report, vec,
                    CostRegime.fuel_optimal(factor=0.0, delta=last_good),
                    integration, attempts=attempts,
                    solve_seconds=time.perf_counter() - began)
