"""Reduced 6-DOF vessel dynamics driven by thrust and random sea loads.

The state keeps the full pose/velocity vectors, but in surface mode heave,
roll and pitch are pinned to zero after every step, leaving a surge/sway/yaw
model integrated with semi-implicit Euler.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

# indices into eta / nu
X, Y, Z, ROLL, PITCH, YAW = range(6)
U, V, W, P, Q, R = range(6)


class VesselConfigError(ValueError):
    pass


@dataclass(frozen=True)
class VesselState:
    eta: np.ndarray  # [x, y, z, roll, pitch, yaw]
    nu: np.ndarray  # [u, v, w, p, q, r] body frame

    def __post_init__(self):
        object.__setattr__(self, "eta", np.asarray(self.eta, dtype=float).reshape(6))
        object.__setattr__(self, "nu", np.asarray(self.nu, dtype=float).reshape(6))

    @classmethod
    def at(cls, x: float, y: float, yaw: float = 0.0, u: float = 0.0) -> "VesselState":
        return cls(np.array([x, y, 0.0, 0.0, 0.0, yaw]), np.array([u, 0.0, 0.0, 0.0, 0.0, 0.0]))

    @property
    def speed(self) -> float:
        return math.hypot(self.nu[U], self.nu[V])


def rotation_matrix(theta) -> np.ndarray:
    """Body-to-world rotation for Euler angles (roll, pitch, yaw), zyx order."""
    phi, th, psi = (float(a) for a in theta)
    cphi, sphi = math.cos(phi), math.sin(phi)
    cth, sth = math.cos(th), math.sin(th)
    cpsi, spsi = math.cos(psi), math.sin(psi)
    return np.array(
        [
            [cpsi * cth, -spsi * cphi + cpsi * sth * sphi, spsi * sphi + cpsi * cphi * sth],
            [spsi * cth, cpsi * cphi + sphi * sth * spsi, -cpsi * sphi + sth * spsi * cphi],
            [-sth, cth * sphi, cth * cphi],
        ]
    )


def angular_rate_transform(theta) -> np.ndarray:
    """Maps body rates (p, q, r) to Euler angle rates; singular at pitch = ±90°."""
    phi, th, _ = (float(a) for a in theta)
    cphi, sphi = math.cos(phi), math.sin(phi)
    cth, tth = math.cos(th), math.tan(th)
    return np.array(
        [
            [1.0, sphi * tth, cphi * tth],
            [0.0, cphi, -sphi],
            [0.0, sphi / cth, cphi / cth],
        ]
    )


def kinematics(eta: np.ndarray) -> np.ndarray:
    """6x6 transformation taking body velocities nu to pose rates eta_dot."""
    J = np.zeros((6, 6))
    J[:3, :3] = rotation_matrix(eta[3:])
    J[3:, 3:] = angular_rate_transform(eta[3:])
    return J


def wrap_angle(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


@dataclass(frozen=True)
class RouteFollower:
    """Line-of-sight guidance along a polyline plus speed hold.

    Stateless: the active segment is the one nearest to the vessel, so the
    same pose always produces the same thrust.
    """

    waypoints: np.ndarray  # (n, 2) local x, y
    cruise_speed: float
    lookahead_m: float = 40.0
    speed_gain: float = 2e4
    heading_gain: float = 4.5e5
    yaw_rate_gain: float = 1.4e6

    def __post_init__(self):
        wp = np.asarray(self.waypoints, dtype=float).reshape(-1, 2)
        if len(wp) < 2:
            raise VesselConfigError("route needs at least two waypoints")
        object.__setattr__(self, "waypoints", wp)

    def _nearest(self, p):
        best = (math.inf, 0, 0.0)
        for i in range(len(self.waypoints) - 1):
            a, b = self.waypoints[i], self.waypoints[i + 1]
            ab = b - a
            s = float(np.clip(np.dot(p - a, ab) / np.dot(ab, ab), 0.0, 1.0))
            d = float(np.linalg.norm(a + s * ab - p))
            if d < best[0]:
                best = (d, i, s)
        return best[1], best[2]

    def target_heading(self, xy) -> float:
        p = np.asarray(xy, dtype=float)
        i, s = self._nearest(p)
        a, b = self.waypoints[i], self.waypoints[i + 1]
        seg_len = float(np.linalg.norm(b - a))
        along = s * seg_len + self.lookahead_m
        # walk forward along the polyline by the lookahead distance
        while along > seg_len and i < len(self.waypoints) - 2:
            along -= seg_len
            i += 1
            a, b = self.waypoints[i], self.waypoints[i + 1]
            seg_len = float(np.linalg.norm(b - a))
        target = a + (b - a) * (along / seg_len)
        d = target - p
        return math.atan2(d[1], d[0])

    def start_heading(self) -> float:
        d = self.waypoints[1] - self.waypoints[0]
        return math.atan2(d[1], d[0])

    def __call__(self, state: VesselState, damping: np.ndarray) -> np.ndarray:
        tau = np.zeros(6)
        u = state.nu[U]
        tau[U] = damping[U, U] * self.cruise_speed + self.speed_gain * (self.cruise_speed - u)
        err = wrap_angle(self.target_heading(state.eta[:2]) - state.eta[YAW])
        tau[R] = self.heading_gain * err - self.yaw_rate_gain * state.nu[R]
        return tau


ThrustPlan = Callable[[VesselState, np.ndarray], np.ndarray]


def _diag(values) -> np.ndarray:
    return np.diag(np.asarray(values, dtype=float))


@dataclass(frozen=True)
class VesselParams:
    """Rigid-body + added mass, linear damping and load model of one vessel.

    The defaults describe a ~50 t workboat; none of them are measured values.
    """

    mass_matrix: np.ndarray = field(default_factory=lambda: _diag([5e4, 6e4, 6e4, 1e6, 5e6, 5e6]))
    damping: np.ndarray = field(default_factory=lambda: _diag([1e4, 3e4, 3e4, 1e6, 1e6, 1e6]))
    coriolis_enabled: bool = False
    restoring: np.ndarray = field(default_factory=lambda: np.zeros(6))
    thrust_plan: Optional[ThrustPlan] = None
    # std of wind, current and wave loads; each redrawn every step
    disturbance_std: np.ndarray = field(
        default_factory=lambda: np.array([[800.0, 800.0, 0.0, 0.0, 0.0, 2e4]] * 3)
    )
    max_speed: float = 8.0
    surface: bool = True

    def __post_init__(self):
        M = np.asarray(self.mass_matrix, dtype=float)
        D = np.asarray(self.damping, dtype=float)
        if M.shape != (6, 6) or D.shape != (6, 6):
            raise VesselConfigError("mass and damping must be 6x6")
        if np.any(np.diag(M) <= 0):
            raise VesselConfigError("mass diagonal must be positive")
        if np.any(np.diag(D) < 0):
            raise VesselConfigError("damping diagonal must be non-negative")
        try:
            M_inv = np.linalg.inv(M)
        except np.linalg.LinAlgError as exc:
            raise VesselConfigError("singular mass matrix") from exc
        std = np.asarray(self.disturbance_std, dtype=float).reshape(-1, 6)
        object.__setattr__(self, "mass_matrix", M)
        object.__setattr__(self, "damping", D)
        object.__setattr__(self, "restoring", np.asarray(self.restoring, dtype=float).reshape(6))
        object.__setattr__(self, "disturbance_std", std)
        object.__setattr__(self, "_m_inv", M_inv)

    def coriolis(self, nu: np.ndarray) -> np.ndarray:
        """Surge/sway/yaw rigid-body Coriolis-centripetal matrix (skew-symmetric)."""
        C = np.zeros((6, 6))
        if not self.coriolis_enabled:
            return C
        m11, m22 = self.mass_matrix[U, U], self.mass_matrix[V, V]
        C[U, R] = -m22 * nu[V]
        C[V, R] = m11 * nu[U]
        C[R, U] = m22 * nu[V]
        C[R, V] = -m11 * nu[U]
        return C


_SURFACE_ETA = np.array([1.0, 1.0, 0.0, 0.0, 0.0, 1.0])
_SURFACE_NU = np.array([1.0, 1.0, 0.0, 0.0, 0.0, 1.0])


def step_vessel(state: VesselState, params: VesselParams, rng: Optional[np.random.Generator], dt: float) -> VesselState:
    """Advance one vessel by ``dt`` seconds.

    Velocity is updated first from the force balance, then the pose is
    integrated with the new velocity. ``rng=None`` disables the sea loads.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    nu = state.nu
    tau = np.zeros(6)
    if params.thrust_plan is not None:
        tau += params.thrust_plan(state, params.damping)
    std = params.disturbance_std
    if rng is not None:
        # draw every source even when its std is zero so the stream length is fixed
        tau += (rng.standard_normal(std.shape) * std).sum(axis=0)
    rhs = tau - params.coriolis(nu) @ nu - params.damping @ nu - params.restoring
    nu_new = nu + dt * (params._m_inv @ rhs)
    if params.surface:
        nu_new = nu_new * _SURFACE_NU
    speed = math.hypot(nu_new[U], nu_new[V])
    if speed > params.max_speed:
        nu_new[:2] *= params.max_speed / speed
    eta_new = state.eta + dt * (kinematics(state.eta) @ nu_new)
    if params.surface:
        eta_new = eta_new * _SURFACE_ETA
    eta_new[YAW] = wrap_angle(eta_new[YAW])
    return VesselState(eta_new, nu_new)


class Vessel:
    """Single-owner mutable wrapper stepping a vessel with sub-steps."""

    def __init__(self, params: VesselParams, state: VesselState, substeps: int = 5):
        self.params = params
        self.state = state
        self.substeps = substeps

    def advance(self, rng: Optional[np.random.Generator], dt: float) -> VesselState:
        h = dt / self.substeps
        for _ in range(self.substeps):
            self.state = step_vessel(self.state, self.params, rng, h)
        return self.state


def export_trajectory(path, times: Sequence[float], states: Sequence[VesselState]) -> None:
    """Write ``t, x, y, yaw, u, v, r`` rows for plotting."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x", "y", "yaw", "u", "v", "r"])
        for t, s in zip(times, states):
            w.writerow([t, s.eta[X], s.eta[Y], s.eta[YAW], s.nu[U], s.nu[V], s.nu[R]])


def with_plan(params: VesselParams, plan: Optional[ThrustPlan]) -> VesselParams:
    return replace(params, thrust_plan=plan)
