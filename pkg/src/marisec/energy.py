"""Rotary-wing propulsion power and trajectory energy."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np


@dataclass(frozen=True)
class RotorcraftParams:
    # Hover components and rotor constants follow the widely used rotary-wing
    # parameter set for a ~20 N airframe (Zeng, Xu & Zhang 2019); only the mass
    # is specific to this scenario.
    p_induced_w: float = 88.63
    p_blade_w: float = 79.86
    v_tip_ms: float = 120.0
    v_induced_hover_ms: float = 4.03
    drag_ratio: float = 0.6
    rotor_solidity: float = 0.05
    rotor_area_m2: float = 0.503
    air_density: float = 1.225
    mass_kg: float = 2.0
    gravity_ms2: float = 9.8

    def __post_init__(self):
        for name, v in self.__dict__.items():
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v}")

    @property
    def hover_power_w(self) -> float:
        return self.p_induced_w + self.p_blade_w


def propulsion_power(params: RotorcraftParams, v_h):
    """Propulsion power (W) at horizontal speed ``v_h`` (m/s); broadcasts."""
    v = np.asarray(v_h, dtype=float)
    if np.any(v < 0) or not np.all(np.isfinite(v)):
        raise ValueError(f"speed must be non-negative, got {v_h}")
    x = v**2 / (2.0 * params.v_induced_hover_ms**2)
    # sqrt(1 + x^2) - x without cancellation at high speed
    induced = params.p_induced_w * np.sqrt(1.0 / (np.sqrt(1.0 + x**2) + x))
    blade = params.p_blade_w * (1.0 + 3.0 * v**2 / params.v_tip_ms**2)
    parasite = 0.5 * params.drag_ratio * params.rotor_solidity * params.rotor_area_m2 * params.air_density * v**3
    out = induced + blade + parasite
    return float(out) if out.ndim == 0 else out


PathSample = Tuple[Sequence[float], float, float]  # (position xyz, v_h, v_v)


def trajectory_energy(params: RotorcraftParams, path: Sequence[PathSample], dt: float) -> float:
    """Energy (J) of a sampled 3D trajectory.

    ``path[i]`` is the state at time ``i * dt``. The propulsion integral uses a
    left Riemann sum over the ``len(path) - 1`` intervals; kinetic and
    potential terms use the first and last samples.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if len(path) == 0:
        raise ValueError("empty path")
    v_h = np.array([p[1] for p in path[:-1]], dtype=float)
    e_prop = float(np.sum(propulsion_power(params, v_h)) * dt) if len(v_h) else 0.0
    (pos0, vh0, vv0), (pos1, vh1, vv1) = path[0], path[-1]
    kinetic = 0.5 * params.mass_kg * ((vh1**2 + vv1**2) - (vh0**2 + vv0**2))
    potential = params.mass_kg * params.gravity_ms2 * (pos1[2] - pos0[2])
    return e_prop + kinetic + potential


def slot_energy(params: RotorcraftParams, v_h: float, v_f_prev: float, v_f: float, dz: float, dt: float) -> float:
    """Energy spent in one slot.

    Propulsion plus the rise in kinetic and potential energy. Decreases in
    mechanical energy are not credited back (the airframe does not
    regenerate), so the result is never below the propulsion term.
    """
    mech = 0.5 * params.mass_kg * (v_f**2 - v_f_prev**2) + params.mass_kg * params.gravity_ms2 * dz
    return propulsion_power(params, v_h) * dt + max(0.0, mech)
