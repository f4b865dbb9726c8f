"""Batch evaluation over the admissible envelope of initial conditions.

Cases are drawn componentwise uniformly from the admissible box, each one
from its own seeded sub-stream so any case can be reproduced in isolation
and results never depend on scheduling order.  Each case gets exactly one
random guess by default: batch rates measure single-guess convergence of
a formulation, not retry patience.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .dynamics import TIME
from .integrator import IntegrationSettings
from .rootfind import SolverSettings
from .scaling import PhysicalConstants
from .shooting import (
    Formulation,
    InitialCondition,
    LandingOutcome,
    SolveOutcome,
    solve_time_optimal,
)

_GUESS_STREAM = 90001  # matches the single-solve guess stream tag


@dataclass(frozen=True)
class DomainA:
    """Admissible box of initial conditions, dimensional bounds."""

    r0_km: Tuple[float, float] = (1738.0, 1911.9738)
    v0_mps: Tuple[float, float] = (-83.9779, 83.9779)
    omega0_radps: Tuple[float, float] = (0.0, 9.6638e-4)
    m0_kg: Tuple[float, float] = (240.0, 600.0)

    def __post_init__(self) -> None:
        for name in ("r0_km", "v0_mps", "omega0_radps", "m0_kg"):
            lo, hi = getattr(self, name)
            if not (lo < hi):
                raise ValueError(f"{name} bounds must satisfy lo < hi, "
                                 f"got ({lo!r}, {hi!r})")

    def contains(self, ic: InitialCondition) -> bool:
        return (self.r0_km[0] <= ic.r0_km <= self.r0_km[1]
                and self.v0_mps[0] <= ic.v0_mps <= self.v0_mps[1]
                and self.omega0_radps[0] <= ic.omega0_radps <= self.omega0_radps[1]
                and self.m0_kg[0] <= ic.m0_kg <= self.m0_kg[1])

    def sample(self, rng: np.random.Generator,
               constants: Optional[PhysicalConstants] = None) -> InitialCondition:
        return InitialCondition.from_dimensional(
            r0_km=rng.uniform(*self.r0_km),
            v0_mps=rng.uniform(*self.v0_mps),
            omega0_radps=rng.uniform(*self.omega0_radps),
            m0_kg=rng.uniform(*self.m0_kg),
            constants=constants,
        )


def sample_domain(n: int, seed: int, domain: DomainA = DomainA(),
                  constants: Optional[PhysicalConstants] = None
                  ) -> List[InitialCondition]:
    """Deterministic batch of cases; case i draws from sub-stream (seed, i)."""
    if n < 1:
        raise ValueError(f"need at least one case, got {n!r}")
    return [domain.sample(np.random.default_rng((seed, i)), constants)
            for i in range(n)]


@dataclass(frozen=True)
class BatchOptions:
    remedy: bool = True
    tf_seed_mode: str = "estimate"  # or "uniform" over (0, t_max]
    max_attempts: int = 1  # one guess per case keeps rates comparable

    def __post_init__(self) -> None:
        if self.tf_seed_mode not in ("estimate", "uniform"):
            raise ValueError(f"unknown tf_seed_mode {self.tf_seed_mode!r}")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be positive")


@dataclass
class CaseRecord:
    index: int
    ic: InitialCondition
    outcome: LandingOutcome
    converged: bool
    iterations: int
    function_evaluations: int
    t_f_s: float
    fuel_kg: Optional[float]
    min_radius: Optional[float]
    p0: Optional[float]
    unknowns: Optional[List[float]]  # converged solution vector, raw slots
    message: str = ""
    solve_seconds: float = 0.0  # informational; excluded from the CSV

    CSV_COLUMNS = ("index", "r0_km", "v0_mps", "omega0_radps", "m0_kg",
                   "outcome", "converged", "iterations",
                   "function_evaluations", "t_f_s", "fuel_kg", "min_radius",
                   "p0")

    def csv_row(self) -> list:
        def num(value):
            return "" if value is None else repr(float(value))

        return [self.index, repr(self.ic.r0_km), repr(self.ic.v0_mps),
                repr(self.ic.omega0_radps), repr(self.ic.m0_kg),
                self.outcome.value, int(self.converged), self.iterations,
                self.function_evaluations, num(self.t_f_s), num(self.fuel_kg),
                num(self.min_radius), num(self.p0)]


@dataclass(frozen=True)
class BatchStats:
    """Aggregate outcome counts plus solver-effort means over the successes."""

    n_total: int
    n_success: int
    n_negative_tf: int
    n_subsurface: int
    n_not_converged: int
    mean_iterations: Optional[float]
    mean_function_evaluations: Optional[float]
    mean_solve_seconds: Optional[float]  # informational, hardware-bound

    def __post_init__(self) -> None:
        parts = (self.n_success + self.n_negative_tf + self.n_subsurface
                 + self.n_not_converged)
        if parts != self.n_total:
            raise ValueError(
                f"outcome counts {parts} do not partition n_total {self.n_total}")

    @property
    def success_rate(self) -> float:
        return self.n_success / self.n_total if self.n_total else 0.0

    def to_json_dict(self, include_timing: bool = False) -> dict:
        out = {
            "n_total": self.n_total,
            "n_success": self.n_success,
            "n_negative_tf": self.n_negative_tf,
            "n_subsurface": self.n_subsurface,
            "n_not_converged": self.n_not_converged,
            "success_rate": self.success_rate,
            "mean_iterations": self.mean_iterations,
            "mean_function_evaluations": self.mean_function_evaluations,
        }
        # Wall-clock means vary run to run, so emitted files skip them
        # unless explicitly asked for.
        if include_timing:
            out["mean_solve_seconds"] = self.mean_solve_seconds
        return out


def _record_from_outcome(index: int, outcome: SolveOutcome) -> CaseRecord:
    return CaseRecord(
        index=index,
        ic=outcome.ic,
        outcome=outcome.outcome,
        converged=outcome.converged,
        iterations=outcome.report.iterations,
        function_evaluations=outcome.report.function_evaluations,
        t_f_s=outcome.t_f_s,
        fuel_kg=outcome.fuel_kg,
        min_radius=(None if outcome.trajectory is None
                    else outcome.trajectory.min_radius),
        p0=outcome.p0,
        unknowns=([float(v) for v in outcome.vector.values]
                  if outcome.converged else None),
        solve_seconds=outcome.solve_seconds,
    )


def _solve_case(args) -> CaseRecord:
    (index, ic, kind_value, remedy, tf_seed_mode, max_attempts, seed,
     solver, integration) = args
    kind = Formulation(kind_value)
    rng = np.random.default_rng((seed, _GUESS_STREAM, index))
    try:
        outcome = solve_time_optimal(
            ic, kind, remedy=remedy, tf_mode=tf_seed_mode, rng=rng,
            max_attempts=max_attempts, solver=solver, integration=integration)
    except Exception as exc:  # isolate the case, never abort the batch
        return CaseRecord(
            index=index, ic=ic, outcome=LandingOutcome.NOT_CONVERGED,
            converged=False, iterations=0, function_evaluations=0,
            t_f_s=math.nan, fuel_kg=None, min_radius=None, p0=None,
            unknowns=None, message=f"{type(exc).__name__}: {exc}")
    return _record_from_outcome(index, outcome)


def run_batch(cases: Sequence[InitialCondition], kind: Formulation,
              options: BatchOptions = BatchOptions(), seed: int = 0,
              workers: int = 1,
              solver: SolverSettings = SolverSettings(),
              integration: IntegrationSettings = IntegrationSettings()
              ) -> Tuple[BatchStats, List[CaseRecord]]:
    """Solve every case independently and aggregate the outcome counts.

    Only the time-optimal formulations run as batches; the fuel
    continuation needs a per-case seed solve and is driven case by case
    instead.  Guess draws come from per-case sub-streams keyed by
    (seed, stream, case index), so records are identical however the
    cases are scheduled.
    """
    if kind.regime_kind != TIME:
        raise ValueError(f"batch runs cover the time-optimal formulations, "
                         f"not {kind.value}")
    jobs = [(i, ic, kind.value, options.remedy, options.tf_seed_mode,
             options.max_attempts, seed, solver, integration)
            for i, ic in enumerate(cases)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_solve_case, jobs, chunksize=8))
    else:
        records = [_solve_case(job) for job in jobs]
    records.sort(key=lambda rec: rec.index)

    return aggregate(records), records


def aggregate(records: Sequence[CaseRecord]) -> BatchStats:
    counts = {outcome: 0 for outcome in LandingOutcome}
    for rec in records:
        counts[rec.outcome] += 1
    successes = [rec for rec in records
                 if rec.outcome is LandingOutcome.SUCCESSFUL_LANDING]

    def mean(values) -> Optional[float]:
        values = list(values)
        return float(np.mean(values)) if values else None

    return BatchStats(
        n_total=len(records),
        n_success=counts[LandingOutcome.SUCCESSFUL_LANDING],
        n_negative_tf=counts[LandingOutcome.NEGATIVE_FINAL_TIME],
        n_subsurface=counts[LandingOutcome.SUBSURFACE],
        n_not_converged=counts[LandingOutcome.NOT_CONVERGED],
        mean_iterations=mean(rec.iterations for rec in successes),
        mean_function_evaluations=mean(rec.function_evaluations
                                       for rec in successes),
        mean_solve_seconds=mean(rec.solve_seconds for rec in successes),
    )


def write_case_csv(records: Sequence[CaseRecord],
                   path: Union[str, Path]) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(CaseRecord.CSV_COLUMNS)
        for rec in records:
            writer.writerow(rec.csv_row())
