"""Satellite-maritime friendly-jamming MDP.

Composes the orbit, vessel, channel and energy models into reset/step
semantics with a two-component reward (secrecy, energy). Box and power
constraints (C1-C5) are enforced by projecting the action; the interference
limits (C6, C7) only act through reward penalties.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import channel as ch
from .energy import RotorcraftParams, slot_energy
from .geo import LocalFrame, OrbitalElements, satellite_position_array
from .vessel import RouteFollower, Vessel, VesselParams, VesselState

OBS_DIM = 31
ACT_DIM = 4

OBS_LAYOUT = (
    ("eta_alice", 6),
    ("nu_alice", 6),
    ("eta_eve", 6),
    ("nu_eve", 6),
    ("p_uav", 1),
    ("uav_pos", 3),
    ("sat_pos", 3),
)


class EpisodeDoneError(RuntimeError):
    pass


@dataclass(frozen=True)
class ConstraintSet:
    x_min_m: float = 0.0
    x_max_m: float = 80.0
    y_min_m: float = 0.0
    y_max_m: float = 80.0
    z_min_m: float = 50.0
    z_max_m: float = 70.0
    p_min_w: float = 0.0
    p_max_w: float = 0.1
    e0_j: float = 500.0
    i0_dbm: float = -74.0
    mu1: float = 1.0
    mu2: Optional[float] = None  # None -> 1 / (hover power * dt)
    rho1: float = 0.1
    rho2: float = 0.1
    w_pen: float = 0.5

    def __post_init__(self):
        if not (self.x_min_m < self.x_max_m and self.y_min_m < self.y_max_m and self.z_min_m <= self.z_max_m):
            raise ValueError("box bounds must be ordered")
        if not 0 <= self.p_min_w <= self.p_max_w:
            raise ValueError("power bounds must satisfy 0 <= p_min <= p_max")
        if not self.e0_j > 0:
            raise ValueError("E0 must be positive")

    @property
    def i0_w(self) -> float:
        return ch.dbm_to_w(self.i0_dbm)

    @property
    def lower(self) -> np.ndarray:
        return np.array([self.x_min_m, self.y_min_m, self.z_min_m])

    @property
    def upper(self) -> np.ndarray:
        return np.array([self.x_max_m, self.y_max_m, self.z_max_m])


@dataclass(frozen=True)
class VesselRoute:
    waypoints: tuple
    speed_ms: float
    along_jitter_m: float = 30.0
    cross_jitter_m: float = 10.0


@dataclass(frozen=True)
class ScenarioConfig:
    orbit: OrbitalElements = field(default_factory=OrbitalElements)
    link: ch.LinkBudget = field(default_factory=ch.LinkBudget)
    uav: RotorcraftParams = field(default_factory=RotorcraftParams)
    constraints: ConstraintSet = field(default_factory=ConstraintSet)
    vessel: VesselParams = field(default_factory=VesselParams)
    alice_route: VesselRoute = VesselRoute(((20080.0, 260.0), (20080.0, -220.0)), 3.0)
    eve_route: VesselRoute = VesselRoute(((-1100.0, -40.0), (-1100.0, 160.0)), 1.5)
    vessel_antenna_height_m: float = 5.0
    vessel_substeps: int = 5
    horizon: int = 40
    dt_s: float = 1.0
    v_h_max_ms: float = 20.0
    v_v_max_ms: float = 5.0
    anchor_time_s: float = 300.0
    phase_jitter_s: float = 60.0
    arena_scale_m: float = 5000.0
    shadowing: bool = True
    fading: bool = True

    @property
    def mu2(self) -> float:
        c = self.constraints
        return c.mu2 if c.mu2 is not None else 1.0 / (self.uav.hover_power_w * self.dt_s)


@dataclass(frozen=True)
class ActionVector:
    dx_m: float
    dy_m: float
    dz_m: float
    p_uav_w: float

    def as_array(self) -> np.ndarray:
        return np.array([self.dx_m, self.dy_m, self.dz_m, self.p_uav_w])


@dataclass(frozen=True)
class RewardVector:
    r_secrecy: float
    r_energy: float

    def as_array(self) -> np.ndarray:
        return np.array([self.r_secrecy, self.r_energy])


@dataclass(frozen=True)
class EnvState:
    eta_alice: np.ndarray
    nu_alice: np.ndarray
    eta_eve: np.ndarray
    nu_eve: np.ndarray
    p_uav_w: float
    uav_pos: np.ndarray  # local frame
    sat_pos: np.ndarray  # Earth-centred frame
    t_slot: int

    def raw_vector(self) -> np.ndarray:
        return np.concatenate(
            [self.eta_alice, self.nu_alice, self.eta_eve, self.nu_eve, [self.p_uav_w], self.uav_pos, self.sat_pos]
        )


def scalarize(reward, weights) -> float:
    """Linear scalarisation on the 2-simplex."""
    t1, t2 = (float(w) for w in weights)
    if t1 < 0 or t2 < 0 or abs(t1 + t2 - 1.0) > 1e-9:
        raise ValueError(f"weights must be non-negative and sum to 1, got {weights}")
    r = reward.as_array() if isinstance(reward, RewardVector) else np.asarray(reward, dtype=float)
    return t1 * float(r[0]) + t2 * float(r[1])


class MaritimeJammingEnv:
    """One satellite, two vessels (Alice, Eve) and a jamming UAV.

    ``reset(seed)`` re-seeds the environment stream; every random draw in an
    episode comes from that stream and none depends on the actions, so two
    policies run on the same seed see identical vessels, orbit and fading.
    """

    def __init__(self, config: Optional[ScenarioConfig] = None):
        self.cfg = config or ScenarioConfig()
        c = self.cfg
        self.frame = LocalFrame.below_satellite(c.orbit, c.anchor_time_s)
        self.mu2 = c.mu2
        self.i0_w = c.constraints.i0_w
        self._obs_scale = self._build_obs_scale()
        self._done = True
        self.state: Optional[EnvState] = None

    # -- observation --------------------------------------------------------
    def _build_obs_scale(self):
        c = self.cfg
        L = c.arena_scale_m
        centre = np.array(
            [
                0.5 * (c.constraints.x_min_m + c.constraints.x_max_m),
                0.5 * (c.constraints.y_min_m + c.constraints.y_max_m),
                0.0,
            ]
        )
        vmax = c.vessel.max_speed
        eta_off = np.concatenate([centre, np.zeros(3)])
        eta_scale = np.array([L, L, L, math.pi, math.pi, math.pi])
        nu_scale = np.array([vmax, vmax, vmax, 1.0, 1.0, 1.0])
        uav_off = np.array([centre[0], centre[1], 0.5 * (c.constraints.z_min_m + c.constraints.z_max_m)])
        uav_scale = np.array([L, L, max(c.constraints.z_max_m - c.constraints.z_min_m, 1.0)])
        off = np.concatenate([eta_off, np.zeros(6), eta_off, np.zeros(6), [0.0], uav_off, np.zeros(3)])
        scale = np.concatenate(
            [
                eta_scale,
                nu_scale,
                eta_scale,
                nu_scale,
                [max(c.constraints.p_max_w, 1e-12)],
                uav_scale,
                np.full(3, c.orbit.orbit_radius_m),
            ]
        )
        return off, scale

    def observe(self, state: Optional[EnvState] = None) -> np.ndarray:
        """Normalised 31-dim observation in the order of ``OBS_LAYOUT``."""
        s = state if state is not None else self.state
        off, scale = self._obs_scale
        return ((s.raw_vector() - off) / scale).astype(np.float32)

    # -- actions ------------------------------------------------------------
    def action_from_unit(self, u) -> ActionVector:
        """Map a squashed action in [-1, 1]^4 onto displacement and power."""
        u = np.clip(np.asarray(u, dtype=float), -1.0, 1.0)
        c = self.cfg
        cons = c.constraints
        step_h = c.v_h_max_ms * c.dt_s
        dx, dy = u[0] * step_h, u[1] * step_h
        p = cons.p_min_w + 0.5 * (u[3] + 1.0) * (cons.p_max_w - cons.p_min_w)
        return ActionVector(dx, dy, u[2] * c.v_v_max_ms * c.dt_s, p)

    def project_action(self, a: ActionVector) -> ActionVector:
        """Enforce the speed caps, the power box (C4) and the energy budget (C5)."""
        c = self.cfg
        cons = c.constraints
        dx, dy, dz = a.dx_m, a.dy_m, a.dz_m
        step_h = c.v_h_max_ms * c.dt_s
        n = math.hypot(dx, dy)
        if n > step_h:
            dx, dy = dx * step_h / n, dy * step_h / n
        step_v = c.v_v_max_ms * c.dt_s
        dz = min(max(dz, -step_v), step_v)
        p = min(max(a.p_uav_w, cons.p_min_w), cons.p_max_w)
        remaining = max(cons.e0_j - self._tx_energy, 0.0)
        p = min(p, remaining / c.dt_s)
        return ActionVector(dx, dy, dz, p)

    # -- dynamics -----------------------------------------------------------
    def _place_vessel(self, route: VesselRoute, rng) -> Vessel:
        wp = np.asarray(route.waypoints, dtype=float)
        d = wp[1] - wp[0]
        d /= np.linalg.norm(d)
        normal = np.array([-d[1], d[0]])
        start = wp[0] + d * rng.uniform(0.0, route.along_jitter_m) + normal * rng.uniform(
            -route.cross_jitter_m, route.cross_jitter_m
        )
        plan = RouteFollower(wp, route.speed_ms)
        params = replace(self.cfg.vessel, thrust_plan=plan)
        state = VesselState.at(start[0], start[1], yaw=plan.start_heading(), u=route.speed_ms)
        return Vessel(params, state, substeps=self.cfg.vessel_substeps)

    def reset(self, seed: Optional[int] = None) -> EnvState:
        c = self.cfg
        self.rng = np.random.default_rng(seed)
        cons = c.constraints
        lo, hi = cons.lower, cons.upper
        uav = self.rng.uniform(lo, hi)
        self._t0 = c.anchor_time_s + self.rng.uniform(-c.phase_jitter_s, c.phase_jitter_s)
        self.alice = self._place_vessel(c.alice_route, self.rng)
        self.eve = self._place_vessel(c.eve_route, self.rng)
        self.draws = ch.DrawFactory(c.link, self.rng, shadowing=c.shadowing, fading=c.fading)
        self._tx_energy = 0.0
        self._v_f = 0.0
        self._done = False
        self.state = EnvState(
            self.alice.state.eta.copy(),
            self.alice.state.nu.copy(),
            self.eve.state.eta.copy(),
            self.eve.state.nu.copy(),
            0.0,
            uav,
            satellite_position_array(c.orbit, self._t0),
            0,
        )
        return self.state

    def vessel_antenna(self, eta) -> np.ndarray:
        return np.array([eta[0], eta[1], self.cfg.vessel_antenna_height_m])

    def link_quantities(self, sat_ecef, uav, alice_ant, eve_ant, draw_a, draw_e, p_uav_w):
        """Channel gains, rates and interference for one slot's geometry."""
        link = self.cfg.link
        d_sa = float(np.linalg.norm(sat_ecef - self.frame.to_ecef(alice_ant)))
        d_se = float(np.linalg.norm(sat_ecef - self.frame.to_ecef(eve_ant)))
        d_ua = float(np.linalg.norm(uav - alice_ant))
        d_ue = float(np.linalg.norm(uav - eve_ant))
        h_sa = ch.channel_gain_s2v(link, d_sa, draw_a)
        h_se = ch.channel_gain_s2v(link, d_se, draw_e)
        h_ua = float(ch.channel_gain_u2v(link, d_ua, draw_a))
        h_ue = float(ch.channel_gain_u2v(link, d_ue, draw_e))
        r_a = float(ch.rate_alice(link, h_sa, h_ua, p_uav_w))
        r_e = float(ch.rate_eve(link, h_se, h_ue, p_uav_w))
        return {
            "d_sa": d_sa,
            "d_se": d_se,
            "d_ua": d_ua,
            "d_ue": d_ue,
            "h_ua": h_ua,
            "h_ue": h_ue,
            "r_alice": r_a,
            "r_eve": r_e,
            "r_sec": float(ch.secrecy_rate(r_a, r_e)),
            "i_alice_w": ch.interference_alice_w(link, h_ua, p_uav_w),
            "i_eve_w": ch.interference_eve_w(link, h_ue, p_uav_w),
        }

    def step(self, action):
        """Advance one slot. ``action`` is an ActionVector or a unit 4-vector."""
        if self._done:
            raise EpisodeDoneError("episode is done; call reset()")
        c = self.cfg
        cons = c.constraints
        s = self.state
        if not isinstance(action, ActionVector):
            action = self.action_from_unit(action)
        a = self.project_action(action)

        target = s.uav_pos + np.array([a.dx_m, a.dy_m, a.dz_m])
        uav = np.clip(target, cons.lower, cons.upper)
        inside = bool(np.all(np.abs(uav - target) <= 1e-9))
        move = uav - s.uav_pos
        v_h = math.hypot(move[0], move[1]) / c.dt_s
        v_v = abs(move[2]) / c.dt_s
        v_f = math.hypot(v_h, v_v)
        e_u = slot_energy(c.uav, v_h, self._v_f, v_f, move[2], c.dt_s)
        self._v_f = v_f

        t_slot = s.t_slot + 1
        self.alice.advance(self.rng, c.dt_s)
        self.eve.advance(self.rng, c.dt_s)
        sat = satellite_position_array(c.orbit, self._t0 + t_slot * c.dt_s)
        draw_a = self.draws.draw()
        draw_e = self.draws.draw()
        alice_ant = self.vessel_antenna(self.alice.state.eta)
        eve_ant = self.vessel_antenna(self.eve.state.eta)
        q = self.link_quantities(sat, uav, alice_ant, eve_ant, draw_a, draw_e, a.p_uav_w)

        self._tx_energy += a.p_uav_w * c.dt_s
        c6 = q["i_alice_w"] <= self.i0_w
        c7 = q["i_eve_w"] <= self.i0_w
        w1 = 1.0 if c6 else cons.w_pen
        w2 = 1.0 if c7 else cons.w_pen
        w_c = w1 * w2
        k = 1 if inside else 0
        rho1, rho2 = (1.0, 1.0) if inside else (cons.rho1, cons.rho2)
        reward = RewardVector(
            cons.mu1 * rho1 * w_c * q["r_sec"],
            -self.mu2 * rho2 * w_c * e_u,
        )

        self.state = EnvState(
            self.alice.state.eta.copy(),
            self.alice.state.nu.copy(),
            self.eve.state.eta.copy(),
            self.eve.state.nu.copy(),
            a.p_uav_w,
            uav,
            sat,
            t_slot,
        )
        budget_spent = self._tx_energy >= cons.e0_j
        self._done = t_slot >= c.horizon or budget_spent
        lo, hi = cons.lower - 1e-9, cons.upper + 1e-9
        info = {
            "t_slot": t_slot,
            "r_sec": q["r_sec"],
            "e_u": e_u,
            "r_alice": q["r_alice"],
            "r_eve": q["r_eve"],
            "i_alice_w": q["i_alice_w"],
            "i_eve_w": q["i_eve_w"],
            "p_uav_w": a.p_uav_w,
            "action": a,
            "k": k,
            "w1": w1,
            "w2": w2,
            "c1": bool(lo[0] <= uav[0] <= hi[0]),
            "c2": bool(lo[1] <= uav[1] <= hi[1]),
            "c3": bool(lo[2] <= uav[2] <= hi[2]),
            "c4": bool(cons.p_min_w <= a.p_uav_w <= cons.p_max_w),
            "c5": bool(self._tx_energy <= cons.e0_j + 1e-12),
            "c6": bool(c6),
            "c7": bool(c7),
            "tx_energy_j": self._tx_energy,
            "uav_pos": uav.copy(),
            "alice_ant": alice_ant,
            "eve_ant": eve_ant,
            "sat_pos": sat.copy(),
            "draw_alice": draw_a,
            "draw_eve": draw_e,
        }
        return self.state, reward, self._done, info

    @property
    def done(self) -> bool:
        return self._done


TRACE_COLUMNS = ["t", "x_u", "y_u", "z_u", "P_u", "R_sec", "E_u", "C6_ok", "C7_ok", "k"]


def trace_row(info) -> list:
    u = info["uav_pos"]
    return [
        info["t_slot"],
        u[0],
        u[1],
        u[2],
        info["p_uav_w"],
        info["r_sec"],
        info["e_u"],
        int(info["c6"]),
        int(info["c7"]),
        info["k"],
    ]


def write_trace(path, infos: Sequence[dict], header_comment: Optional[str] = None) -> None:
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for info in infos:
            w.writerow(trace_row(info))
