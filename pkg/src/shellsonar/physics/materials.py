"""Media, target geometry and named material presets."""
from __future__ import annotations

import math
from dataclasses import dataclass

from ..errors import ParameterError


def _positive(name, value):
    if not (math.isfinite(value) and value > 0):
        raise ParameterError(f"{name} must be positive and finite (was {value})")


@dataclass(frozen=True)
class FluidMedium:
    density: float
    sound_speed: float

    def __post_init__(self):
        _positive("density", self.density)
        _positive("sound_speed", self.sound_speed)

    @property
    def impedance(self) -> float:
        return self.density * self.sound_speed


@dataclass(frozen=True)
class ElasticSolid:
    density: float
    longitudinal_speed: float
    shear_speed: float

    def __post_init__(self):
        _positive("density", self.density)
        _positive("longitudinal_speed", self.longitudinal_speed)
        _positive("shear_speed", self.shear_speed)
        if not self.longitudinal_speed > self.shear_speed:
            raise ParameterError("longitudinal speed must exceed shear speed")

    @property
    def lame(self) -> tuple[float, float]:
        """First and second Lame parameters ``(lambda, mu)``."""
        mu = self.density * self.shear_speed**2
        lam = self.density * self.longitudinal_speed**2 - 2.0 * mu
        return lam, mu


@dataclass(frozen=True)
class ShellTarget:
    """Elastic spherical shell with a fluid core, immersed in a fluid host."""

    outer_radius_m: float
    thickness_m: float
    shell: ElasticSolid
    filler: FluidMedium
    host: FluidMedium

    def __post_init__(self):
        _positive("outer_radius_m", self.outer_radius_m)
        _positive("thickness_m", self.thickness_m)
        if not self.thickness_m < self.outer_radius_m:
            raise ParameterError("shell thickness must be smaller than the outer radius")

    @property
    def inner_radius_m(self) -> float:
        return self.outer_radius_m - self.thickness_m


ALUMINIUM = ElasticSolid(density=2700.0, longitudinal_speed=6420.0, shear_speed=3040.0)
WATER = FluidMedium(density=1000.0, sound_speed=1480.0)
AIR = FluidMedium(density=1.29, sound_speed=343.0)

PRESETS = {
    "aluminium": ALUMINIUM,
    "aluminum": ALUMINIUM,
    "water": WATER,
    "air": AIR,
}


def material(name: str):
    """Look up a preset medium by (case-insensitive) name."""
    try:
        return PRESETS[name.strip().lower()]
    except KeyError:
        raise ParameterError(
            f"unknown material {name!r}; known: {', '.join(sorted(PRESETS))}"
        ) from None


def parse_material(spec):
    """Build a medium from a preset name or a mapping of properties.

    A mapping with ``shear_speed`` yields an ``ElasticSolid``; one with
    ``sound_speed`` a ``FluidMedium``.
    """
    if isinstance(spec, str):
        return material(spec)
    spec = dict(spec)
    if "shear_speed" in spec:
        return ElasticSolid(
            float(spec["density"]),
            float(spec["longitudinal_speed"]),
            float(spec["shear_speed"]),
        )
    if "sound_speed" in spec:
        return FluidMedium(float(spec["density"]), float(spec["sound_speed"]))
    raise ParameterError(f"cannot interpret material specification {spec!r}")
