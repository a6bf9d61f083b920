"""Circular LEO orbit propagation and the shared Earth-centred frame."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Position3D:
    x_m: float
    y_m: float
    z_m: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x_m, self.y_m, self.z_m)):
            raise ValueError(f"non-finite position {self}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x_m, self.y_m, self.z_m], dtype=float)

    @classmethod
    def from_array(cls, a) -> "Position3D":
        return cls(float(a[0]), float(a[1]), float(a[2]))

    def norm(self) -> float:
        return math.sqrt(self.x_m**2 + self.y_m**2 + self.z_m**2)


@dataclass(frozen=True)
class OrbitalElements:
    """Circular-orbit Keplerian elements (e = 0, true anomaly folded into ω).

    Angles are given in degrees; radians are cached once on construction.
    """

    inclination_deg: float = 80.0
    raan_deg: float = 70.0
    arg_periapsis0_deg: float = 0.0
    altitude_m: float = 900e3
    earth_radius_m: float = 6371e3
    period_s: float = 6000.0

    def __post_init__(self):
        for name in ("altitude_m", "earth_radius_m", "period_s"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v}")
        object.__setattr__(self, "_beta", math.radians(self.inclination_deg))
        object.__setattr__(self, "_raan", math.radians(self.raan_deg))
        object.__setattr__(self, "_omega0", math.radians(self.arg_periapsis0_deg))

    @property
    def orbit_radius_m(self) -> float:
        return self.altitude_m + self.earth_radius_m


def argument_of_periapsis(elements: OrbitalElements, t: float) -> float:
    """ω(t) = ω0 + 2π·frac(t / period), wrapped to [0, 2π)."""
    if not math.isfinite(t):
        raise ValueError(f"non-finite time {t}")
    if t < 0:
        raise ValueError(f"time must be non-negative, got {t}")
    frac = math.fmod(t / elements.period_s, 1.0)
    w = math.fmod(elements._omega0 + TWO_PI * frac, TWO_PI)
    if w < 0:
        w += TWO_PI
    # fmod can return exactly 2π after rounding
    return 0.0 if w >= TWO_PI else w


def _orbit_point(elements: OrbitalElements, omega: float) -> np.ndarray:
    cb, sb = math.cos(elements._beta), math.sin(elements._beta)
    cO, sO = math.cos(elements._raan), math.sin(elements._raan)
    cw, sw = math.cos(omega), math.sin(omega)
    return elements.orbit_radius_m * np.array(
        [cw * cO - sw * cb * sO, cw * sO + sw * cb * cO, sw * sb]
    )


def satellite_position_array(elements: OrbitalElements, t: float) -> np.ndarray:
    return _orbit_point(elements, argument_of_periapsis(elements, t))


def propagate_satellite(elements: OrbitalElements, t: float) -> Position3D:
    """Earth-centred Cartesian satellite position at time ``t`` seconds."""
    return Position3D.from_array(satellite_position_array(elements, t))


class LocalFrame:
    """East-north-up tangent plane anchored on the Earth's surface.

    Vessel and UAV coordinates live in this plane (z = height above sea
    level); ``to_ecef`` maps them into the satellite's frame. Earth rotation
    is ignored.
    """

    def __init__(self, anchor_ecef):
        anchor = np.asarray(anchor_ecef, dtype=float)
        r = np.linalg.norm(anchor)
        if not r > 0:
            raise ValueError("anchor must be away from the Earth's centre")
        up = anchor / r
        ref = np.array([0.0, 0.0, 1.0]) if abs(up[2]) < 0.999 else np.array([1.0, 0.0, 0.0])
        east = np.cross(ref, up)
        east /= np.linalg.norm(east)
        north = np.cross(up, east)
        self.anchor = anchor
        self.basis = np.stack([east, north, up], axis=1)  # columns e, n, u

    @classmethod
    def below_satellite(cls, elements: OrbitalElements, t: float) -> "LocalFrame":
        """Frame anchored at the sub-satellite point at time ``t``."""
        p = satellite_position_array(elements, t)
        return cls(p / np.linalg.norm(p) * elements.earth_radius_m)

    def to_ecef(self, local) -> np.ndarray:
        local = np.asarray(local, dtype=float)
        return self.anchor + local @ self.basis.T

    def to_local(self, ecef) -> np.ndarray:
        return (np.asarray(ecef, dtype=float) - self.anchor) @ self.basis
