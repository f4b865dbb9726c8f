"""Physical constants and the nondimensional unit system.

Every solver-facing quantity is scaled so that the gravitational parameter,
the body radius and the lander's initial mass all become 1.  This keeps the
shooting unknowns O(1) and makes tolerances meaningful across the whole
admissible envelope.  The mass scale is deliberately per problem: a 240 kg
and a 600 kg lander both start at scaled mass 1, and the scaled maximum
thrust absorbs the difference.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Union


class UnitRole(str, Enum):
    """What a number measures, for scale lookup."""

    LENGTH = "length"
    SPEED = "speed"
    ANGULAR_RATE = "angular-rate"
    TIME = "time"
    MASS = "mass"
    FORCE = "force"
    ACCELERATION = "acceleration"


# JSON override keys accepted by PhysicalConstants.from_json.
_JSON_KEYS = {
    "mu": "mu",
    "R0_m": "radius",
    "Isp_s": "isp",
    "ge": "ge",
    "Tmax_N": "tmax",
}


@dataclass(frozen=True)
class PhysicalConstants:
    """Engine and environment constants, SI units."""

    mu: float = 4.90275e12  # gravitational parameter, m^3/s^2
    radius: float = 1.738e6  # body radius, m
    isp: float = 300.0  # specific impulse, s
    ge: float = 9.81  # standard gravity used in the Isp conversion, m/s^2
    tmax: float = 1500.0  # maximum thrust, N

    def __post_init__(self) -> None:
        for name in ("mu", "radius", "isp", "ge", "tmax"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValueError(f"constant {name!r} must be a positive finite number, got {value!r}")

    @property
    def exhaust_velocity(self) -> float:
        """Effective exhaust velocity Isp*ge, m/s."""
        return self.isp * self.ge

    @property
    def surface_gravity(self) -> float:
        """Gravitational acceleration at the body surface, m/s^2."""
        return self.mu / self.radius**2

    @classmethod
    def from_json(cls, source: Union[str, Path, dict]) -> "PhysicalConstants":
        """Build constants from a JSON document with keys mu, R0_m, Isp_s, ge, Tmax_N.

        Missing keys keep their defaults; unknown keys are rejected.
        """
        if isinstance(source, dict):
            doc = source
        else:
            doc = json.loads(Path(source).read_text())
        if not isinstance(doc, dict):
            raise ValueError("constants document must be a JSON object")
        unknown = set(doc) - set(_JSON_KEYS)
        if unknown:
            raise ValueError(f"unknown constants keys: {sorted(unknown)}")
        return cls(**{_JSON_KEYS[k]: float(v) for k, v in doc.items()})


@dataclass(frozen=True)
class Scales:
    """Reference scales tying the nondimensional problem to SI units."""

    length: float  # m
    speed: float  # m/s
    time: float  # s
    mass: float  # kg
    force: float  # N
    acceleration: float  # m/s^2
    angular_rate: float  # rad/s

    @classmethod
    def for_problem(cls, constants: PhysicalConstants, reference_mass: float) -> "Scales":
        """Scales for one landing problem; reference_mass is the initial mass in kg.

        Raises if the engine cannot support the initial weight: the descent
        problem needs a thrust-to-initial-weight ratio above 1, which also
        guarantees the recovered cost-normalization factor is positive.
        """
        if not (math.isfinite(reference_mass) and reference_mass > 0):
            raise ValueError(f"reference mass must be positive, got {reference_mass!r}")
        length = constants.radius
        speed = math.sqrt(constants.mu / constants.radius)
        time = length / speed
        acceleration = constants.mu / constants.radius**2
        force = reference_mass * acceleration
        if constants.tmax <= force:
            raise ValueError(
                f"maximum thrust {constants.tmax} N does not exceed the initial weight "
                f"{force:.3f} N; the lander cannot brake to a soft landing"
            )
        return cls(
            length=length,
            speed=speed,
            time=time,
            mass=reference_mass,
            force=force,
            acceleration=acceleration,
            angular_rate=1.0 / time,
        )

    def _factor(self, role: Union[UnitRole, str]) -> float:
        try:
            role = UnitRole(role)
        except ValueError:
            raise ValueError(f"unknown unit role {role!r}") from None
        return getattr(self, role.name.lower())

    def nondimensionalize(self, value: float, role: Union[UnitRole, str]) -> float:
        return value / self._factor(role)

    def dimensionalize(self, value: float, role: Union[UnitRole, str]) -> float:
        return value * self._factor(role)
