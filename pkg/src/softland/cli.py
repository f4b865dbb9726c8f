"""Command-line front end: solve-time, solve-fuel, and batch runs.

Inputs are dimensional (km, m/s, rad/s, kg), everything internal is
scaled, and emitted numbers are dimensional again.  All artifacts are
deterministic for a fixed configuration and seed: JSON keys are sorted
and wall-clock timings never enter a file, only the console.

Exit codes: 0 success, 2 usage error, 3 solver failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional

from .homotopy import (
    HomotopyError,
    HomotopySchedule,
    solve_fuel_direct,
    solve_fuel_homotopy,
)
from .montecarlo import (
    BatchOptions,
    DomainA,
    run_batch,
    sample_domain,
    write_case_csv,
)
from .scaling import PhysicalConstants
from .shooting import (
    METHOD_FORMULATIONS,
    InitialCondition,
    LandingOutcome,
    SolveOutcome,
    solve_time_optimal,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_SOLVER = 3
EXIT_IO = 4

_TIME_METHODS = ("backward-piim", "forward-icvn", "forward-sicvn")
_FUEL_METHODS = ("homotopy-backward", "homotopy-forward", "direct-icvn")

# Per-subcommand defaults, applied after --config merging so that an
# explicit flag always beats the config file and the config file always
# beats these.
_DEFAULTS = {
    "solve-time": {
        "method": "backward-piim", "remedy": True, "tf_seed": "estimate",
        "max_attempts": 8, "seed": 0,
    },
    "solve-fuel": {
        "method": "homotopy-backward", "seed": 0,
        "kappa_schedule": None, "delta_schedule": None,
    },
    "batch": {
        "method": "backward-piim", "remedy": True, "tf_seed": "estimate",
        "seed": 0, "workers": 1,
    },
}

_IC_FIELDS = ("r0_km", "v0_mps", "omega0_radps", "m0_kg")


class UsageError(Exception):
    pass


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="softland",
        description="Time- and fuel-optimal lunar soft-landing solver.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", type=str, default=None,
                       help="JSON file whose keys mirror the long flags")
        p.add_argument("--constants", type=str, default=None,
                       help="JSON file overriding the physical constants")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out-dir", type=str, default=None)

    def add_ic(p: argparse.ArgumentParser) -> None:
        p.add_argument("--r0-km", type=float, default=None)
        p.add_argument("--v0-mps", type=float, default=None)
        p.add_argument("--omega0-radps", type=float, default=None)
        p.add_argument("--m0-kg", type=float, default=None)

    p_time = sub.add_parser("solve-time", help="minimum flight time")
    add_ic(p_time)
    p_time.add_argument("--method", choices=_TIME_METHODS, default=None)
    p_time.add_argument("--remedy", action=argparse.BooleanOptionalAction,
                        default=None,
                        help="search the log of the flight time")
    p_time.add_argument("--tf-seed", choices=("estimate", "uniform"),
                        default=None)
    p_time.add_argument("--max-attempts", type=int, default=None)
    p_time.add_argument("--traj-csv", type=str, default=None)
    add_common(p_time)

    p_fuel = sub.add_parser("solve-fuel", help="minimum fuel")
    add_ic(p_fuel)
    p_fuel.add_argument("--method", choices=_FUEL_METHODS, default=None)
    p_fuel.add_argument("--kappa-schedule", type=str, default=None,
                        help="comma-separated blend values, decreasing")
    p_fuel.add_argument("--delta-schedule", type=str, default=None,
                        help="comma-separated smoothing widths, decreasing")
    p_fuel.add_argument("--traj-csv", type=str, default=None)
    add_common(p_fuel)

    p_batch = sub.add_parser("batch", help="sampled batch of cases")
    p_batch.add_argument("--n", type=int, default=None)
    p_batch.add_argument("--method", choices=_TIME_METHODS, default=None)
    p_batch.add_argument("--remedy", action=argparse.BooleanOptionalAction,
                         default=None)
    p_batch.add_argument("--tf-seed", choices=("estimate", "uniform"),
                         default=None)
    p_batch.add_argument("--workers", type=int, default=None)
    add_common(p_batch)

    return parser


def _merge_config(args: argparse.Namespace) -> dict:
    """Config file fills flags left at None; hard defaults fill the rest."""
    values = vars(args).copy()
    command = values.pop("command")
    config_path = values.pop("config", None)

    config = {}
    if config_path is not None:
        text = Path(config_path).read_text()  # OSError maps to the I/O exit
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {config_path}: invalid JSON ({exc})")
        if not isinstance(raw, dict):
            raise UsageError(f"config {config_path}: expected a JSON object")
        config = {str(key).replace("-", "_"): val for key, val in raw.items()}
        unknown = set(config) - set(values)
        if unknown:
            raise UsageError(
                f"config {config_path}: unknown keys {sorted(unknown)}")

    for key, value in config.items():
        if values[key] is None:
            values[key] = value
    for key, default in _DEFAULTS[command].items():
        if values.get(key) is None:
            values[key] = default
    values["command"] = command
    return values


def _constants_from(values: dict) -> PhysicalConstants:
    path = values.get("constants")
    if path is None:
        return PhysicalConstants()
    try:
        return PhysicalConstants.from_json(path)
    except ValueError as exc:
        raise UsageError(f"constants {path}: {exc}")


def _ic_from(values: dict, constants: PhysicalConstants) -> InitialCondition:
    missing = [f for f in _IC_FIELDS if values.get(f) is None]
    if missing:
        flags = ", ".join("--" + f.replace("_", "-") for f in missing)
        raise UsageError(f"missing initial condition flags: {flags}")
    try:
        return InitialCondition.from_dimensional(
            r0_km=float(values["r0_km"]), v0_mps=float(values["v0_mps"]),
            omega0_radps=float(values["omega0_radps"]),
            m0_kg=float(values["m0_kg"]), constants=constants)
    except ValueError as exc:
        raise UsageError(str(exc))


def _parse_schedule(text: Optional[str]) -> Optional[tuple]:
    if text is None:
        return None
    try:
        parts = tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise UsageError(f"bad schedule {text!r}: expected comma-separated "
                         f"numbers")
    if not parts:
        raise UsageError(f"bad schedule {text!r}: empty")
    return parts


def _emit(payload: dict) -> None:
    sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_json(payload: dict, path: Path) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _out_dir(values: dict) -> Optional[Path]:
    raw = values.get("out_dir")
    if raw is None:
        return None
    path = Path(raw)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _maybe_write_traj(outcome: Optional[SolveOutcome],
                      values: dict) -> None:
    raw = values.get("traj_csv")
    if raw is None:
        return
    if outcome is None or outcome.trajectory is None:
        print("no trajectory available, skipping --traj-csv", file=sys.stderr)
        return
    outcome.trajectory.to_csv(raw, outcome.ic.scales)


def _cmd_solve_time(values: dict) -> int:
    constants = _constants_from(values)
    ic = _ic_from(values, constants)
    if values["max_attempts"] < 1:
        raise UsageError("--max-attempts must be positive")
    kind = METHOD_FORMULATIONS[values["method"]]
    outcome = solve_time_optimal(
        ic, kind, remedy=values["remedy"], tf_mode=values["tf_seed"],
        seed=values["seed"], max_attempts=values["max_attempts"])
    payload = outcome.to_json_dict()
    _emit(payload)
    out_dir = _out_dir(values)
    if out_dir is not None:
        _write_json(payload, out_dir / "solution.json")
    _maybe_write_traj(outcome, values)
    print(f"solve time {outcome.solve_seconds:.3f} s", file=sys.stderr)
    if outcome.outcome is LandingOutcome.SUCCESSFUL_LANDING:
        return EXIT_OK
    return EXIT_SOLVER


def _cmd_solve_fuel(values: dict) -> int:
    constants = _constants_from(values)
    ic = _ic_from(values, constants)
    kappas = _parse_schedule(values.get("kappa_schedule"))
    deltas = _parse_schedule(values.get("delta_schedule"))
    method = values["method"]
    out_dir = _out_dir(values)

    if method == "direct-icvn":
        if kappas is not None:
            raise UsageError("--kappa-schedule applies to the homotopy "
                             "methods only")
        try:
            outcome = solve_fuel_direct(
                ic, deltas=deltas or HomotopySchedule().delta_sequence,
                seed=values["seed"])
        except ValueError as exc:
            raise UsageError(str(exc))
        payload = outcome.to_json_dict()
        _emit(payload)
        if out_dir is not None:
            _write_json(payload, out_dir / "solution.json")
        _maybe_write_traj(outcome, values)
        print(f"solve time {outcome.solve_seconds:.3f} s", file=sys.stderr)
        if outcome.outcome is LandingOutcome.SUCCESSFUL_LANDING:
            return EXIT_OK
        return EXIT_SOLVER

    defaults = HomotopySchedule()
    try:
        schedule = HomotopySchedule(
            kappa_sequence=kappas or defaults.kappa_sequence,
            delta_sequence=deltas or defaults.delta_sequence)
    except ValueError as exc:
        raise UsageError(str(exc))
    direction = "backward" if method == "homotopy-backward" else "forward"
    try:
        trace = solve_fuel_homotopy(ic, direction=direction,
                                    schedule=schedule, seed=values["seed"])
    except HomotopyError as exc:
        if exc.trace is not None:
            payload = exc.trace.to_json_dict()
            _emit(payload)
            if out_dir is not None:
                _write_json(payload, out_dir / "homotopy.json")
        print(f"continuation failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    payload = trace.to_json_dict()
    _emit(payload)
    if out_dir is not None:
        _write_json(payload, out_dir / "homotopy.json")
    _maybe_write_traj(trace.final, values)
    print(f"solve time {trace.solve_seconds:.3f} s", file=sys.stderr)
    final = trace.final
    if final is not None and final.outcome is LandingOutcome.SUCCESSFUL_LANDING:
        return EXIT_OK
    return EXIT_SOLVER


def _cmd_batch(values: dict) -> int:
    constants = _constants_from(values)
    n = values.get("n")
    if n is None or n < 1:
        raise UsageError("--n must be a positive case count")
    if values["workers"] < 1:
        raise UsageError("--workers must be positive")
    kind = METHOD_FORMULATIONS[values["method"]]
    options = BatchOptions(remedy=values["remedy"],
                           tf_seed_mode=values["tf_seed"])
    cases = sample_domain(n, values["seed"], DomainA(), constants)
    stats, records = run_batch(cases, kind, options, seed=values["seed"],
                               workers=values["workers"])
    payload = stats.to_json_dict()
    _emit(payload)
    out_dir = _out_dir(values)
    if out_dir is not None:
        _write_json(payload, out_dir / "stats.json")
        write_case_csv(records, out_dir / "cases.csv")
    if stats.mean_solve_seconds is not None:
        print(f"mean solve time {stats.mean_solve_seconds:.3f} s "
              f"over {stats.n_success} successes", file=sys.stderr)
    return EXIT_OK


_COMMANDS = {
    "solve-time": _cmd_solve_time,
    "solve-fuel": _cmd_solve_fuel,
    "batch": _cmd_batch,
}


def main(argv: Optional[list] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        values = _merge_config(args)
        return _COMMANDS[values["command"]](values)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
