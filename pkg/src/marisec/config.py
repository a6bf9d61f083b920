"""Run configuration: flat ``section.key = value`` files with validated sections."""

from __future__ import annotations

import ast
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Dict, Iterable, Optional

from . import channel as ch
from .agent import AgentConfig
from .energy import RotorcraftParams
from .env import ConstraintSet, ScenarioConfig, VesselRoute
from .geo import OrbitalElements
from .mab import DEFAULT_ARMS
from .vessel import VesselParams, _diag


class ConfigError(ValueError):
    pass


@dataclass
class SatSection:
    inclination_deg: float = 80.0
    raan_deg: float = 70.0
    argp0_deg: float = 0.0
    altitude_m: float = 900e3
    earth_radius_m: float = 6371e3
    period_s: float = 6000.0
    anchor_time_s: float = 300.0
    phase_jitter_s: float = 60.0


@dataclass
class VesselSection:
    antenna_height_m: float = 5.0
    substeps: int = 5
    max_speed_ms: float = 8.0
    mass_kg: float = 5e4
    yaw_inertia_kgm2: float = 5e6
    surge_damping: float = 1e4
    sway_damping: float = 3e4
    yaw_damping: float = 1e6
    force_std_n: float = 800.0
    moment_std_nm: float = 2e4
    coriolis: bool = False
    alice_route: list = field(default_factory=lambda: [[20080.0, 260.0], [20080.0, -220.0]])
    alice_speed_ms: float = 3.0
    eve_route: list = field(default_factory=lambda: [[-1100.0, -40.0], [-1100.0, 160.0]])
    eve_speed_ms: float = 1.5
    along_jitter_m: float = 30.0
    cross_jitter_m: float = 10.0


@dataclass
class LinkSection:
    P_S_dbm: float = 49.03
    G_S_dbi: float = 52.0
    G_SS_dbi: float = 30.0
    G_U_dbi: float = 8.0
    G_E_dbi: float = 8.0
    sigma2_dbm: float = -107.0
    C_S: float = 46.4
    W_S: float = 2.0
    F_S: float = 31.3
    sigma_XS_db: float = 4.0
    C_U: float = 116.7
    W_U: float = 1.5
    d_c_m: float = 2600.0
    sigma_XU_db: float = 2.0


@dataclass
class UavSection:
    P_I_w: float = 88.63
    P_B_w: float = 79.86
    v_tip_ms: float = 120.0
    v_i_ms: float = 4.03
    drag_ratio: float = 0.6
    solidity: float = 0.05
    rotor_area_m2: float = 0.503
    rho: float = 1.225
    mass_kg: float = 2.0
    g_ms2: float = 9.8


@dataclass
class EnvSection:
    horizon: int = 40
    dt_s: float = 1.0
    x_min_m: float = 0.0
    x_max_m: float = 80.0
    y_min_m: float = 0.0
    y_max_m: float = 80.0
    z_min_m: float = 50.0
    z_max_m: float = 70.0
    p_min_w: float = 0.0
    p_max_dbm: float = 20.0
    e0_j: float = 500.0
    i0_dbm: float = -74.0
    mu1: float = 1.0
    mu2: Optional[float] = None
    rho1: float = 0.1
    rho2: float = 0.1
    w_pen: float = 0.5
    v_h_max_ms: float = 20.0
    v_v_max_ms: float = 5.0
    arena_scale_m: float = 5000.0
    shadowing: bool = True
    fading: bool = True


@dataclass
class EncSection:
    d_model: int = 64
    heads: int = 8
    ffn_mult: int = 8
    layers: int = 1
    window: int = 8
    varpi: float = 10000.0


@dataclass
class AgentSection:
    transformer: bool = True
    hidden: int = 128
    alpha: float = 0.2
    gamma: float = 0.9
    kappa: float = 0.005
    lr: float = 0.003
    batch_size: int = 128
    buffer_capacity: int = 100_000
    start_steps: int = 1000
    updates_per_step: int = 1


@dataclass
class MabSection:
    epsilon: float = 0.1
    arms: list = field(default_factory=lambda: list(DEFAULT_ARMS))
    per_step: bool = False


@dataclass
class RunSection:
    seed: int = 0
    total_steps: int = 200_000
    eval_every: int = 80
    checkpoint_every: int = 20_000
    checkpoint_buffer: bool = False
    out_dir: str = "runs"
    threads: int = 1


@dataclass
class EvalSection:
    episodes: int = 50
    seed_base: int = 1_000_000
    tau1: float = 0.5
    oracle_grid_m: float = 5.0


SECTIONS = {
    "sat": SatSection,
    "vessel": VesselSection,
    "link": LinkSection,
    "uav": UavSection,
    "env": EnvSection,
    "enc": EncSection,
    "agent": AgentSection,
    "mab": MabSection,
    "run": RunSection,
    "eval": EvalSection,
}

PROFILES = {
    "smoke": {"run.total_steps": 5000, "run.checkpoint_every": 5000},
    "desk": {"run.total_steps": 200_000},
    "full": {"run.total_steps": 1_000_000},
}


@dataclass
class RunConfig:
    sat: SatSection = field(default_factory=SatSection)
    vessel: VesselSection = field(default_factory=VesselSection)
    link: LinkSection = field(default_factory=LinkSection)
    uav: UavSection = field(default_factory=UavSection)
    env: EnvSection = field(default_factory=EnvSection)
    enc: EncSection = field(default_factory=EncSection)
    agent: AgentSection = field(default_factory=AgentSection)
    mab: MabSection = field(default_factory=MabSection)
    run: RunSection = field(default_factory=RunSection)
    eval: EvalSection = field(default_factory=EvalSection)

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        """Hash of every setting that shapes the trajectory of a run.

        Output location, threads, checkpoint cadence and the step budget are
        left out so a run can be resumed with a larger budget.
        """
        d = self.to_dict()
        skip = ("out_dir", "threads", "total_steps", "checkpoint_every", "checkpoint_buffer")
        d["run"] = {k: v for k, v in d["run"].items() if k not in skip}
        blob = json.dumps(d, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def with_overrides(self, overrides: Dict[str, object]) -> "RunConfig":
        cfg = RunConfig(**{k: replace(getattr(self, k)) for k in SECTIONS})
        for key, value in overrides.items():
            _assign(cfg, key, value)
        validate(cfg)
        return cfg


_WORDS = {"true": True, "false": False, "none": None, "auto": None}


def parse_value(text: str):
    text = text.strip()
    if text.lower() in _WORDS:
        return _WORDS[text.lower()]
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def _coerce(section, name: str, value):
    f = {x.name: x for x in fields(section)}[name]
    default = getattr(section, name)
    typ = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", str(f.type))
    if value is None:
        if "Optional" in typ:
            return None
        raise ConfigError(f"{name} may not be empty")
    if typ == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"{name} expects true/false, got {value!r}")
        return value
    if typ == "int":
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ConfigError(f"{name} expects an integer, got {value!r}")
        return int(value)
    if typ in ("float", "Optional[float]"):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name} expects a number, got {value!r}")
        return float(value)
    if typ == "str":
        return str(value)
    if typ == "list":
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{name} expects a list, got {value!r}")
        return [list(v) if isinstance(v, tuple) else v for v in value]
    return type(default)(value)


def _assign(cfg: RunConfig, key: str, value) -> None:
    if "." not in key:
        raise ConfigError(f"key {key!r} must be section.name")
    sec, name = key.split(".", 1)
    if sec not in SECTIONS:
        raise ConfigError(f"unknown section {sec!r}")
    section = getattr(cfg, sec)
    if name not in {f.name for f in fields(section)}:
        raise ConfigError(f"unknown key {key!r}")
    setattr(section, name, _coerce(section, name, value))


def parse_lines(lines: Iterable[str]) -> Dict[str, object]:
    out: Dict[str, object] = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = parse_value(value)
    return out


def validate(cfg: RunConfig) -> None:
    try:
        build_scenario(cfg)
        build_agent_config(cfg)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.run.total_steps < 1 or cfg.run.eval_every < 1 or cfg.run.checkpoint_every < 1:
        raise ConfigError("step counts must be positive")
    if cfg.eval.episodes < 1 or not 0.0 <= cfg.eval.tau1 <= 1.0 or cfg.eval.oracle_grid_m <= 0:
        raise ConfigError("invalid eval section")
    if not cfg.mab.arms or any(not 0.0 <= a <= 1.0 for a in cfg.mab.arms):
        raise ConfigError("mab.arms must be non-empty weights in [0, 1]")
    if not 0.0 <= cfg.mab.epsilon <= 1.0:
        raise ConfigError("mab.epsilon must lie in [0, 1]")


def load_config(path=None, overrides: Optional[Dict[str, object]] = None, profile: Optional[str] = None) -> RunConfig:
    """Defaults, then the file, then the profile, then explicit overrides."""
    merged: Dict[str, object] = {}
    if path is not None:
        merged.update(parse_lines(Path(path).read_text().splitlines()))
    if profile is not None:
        if profile not in PROFILES:
            raise ConfigError(f"unknown profile {profile!r}")
        merged.update(PROFILES[profile])
    merged.update(overrides or {})
    return RunConfig().with_overrides(merged)


def parse_overrides(items: Iterable[str]) -> Dict[str, object]:
    out = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must be key=value")
        k, v = item.split("=", 1)
        out[k.strip()] = parse_value(v)
    return out


def dump_config(cfg: RunConfig) -> str:
    lines = []
    for sec in SECTIONS:
        for k, v in asdict(getattr(cfg, sec)).items():
            lines.append(f"{sec}.{k} = {'none' if v is None else repr(v).lower() if isinstance(v, bool) else repr(v)}")
    return "\n".join(lines) + "\n"


def build_scenario(cfg: RunConfig) -> ScenarioConfig:
    s, v, e = cfg.sat, cfg.vessel, cfg.env
    orbit = OrbitalElements(s.inclination_deg, s.raan_deg, s.argp0_deg, s.altitude_m, s.earth_radius_m, s.period_s)
    k, u = cfg.link, cfg.uav
    link = ch.LinkBudget(
        k.P_S_dbm, k.G_S_dbi, k.G_SS_dbi, k.G_U_dbi, k.G_E_dbi, k.sigma2_dbm,
        k.C_S, k.W_S, k.F_S, k.sigma_XS_db, k.C_U, k.W_U, k.d_c_m, k.sigma_XU_db,
    )
    uav = RotorcraftParams(
        u.P_I_w, u.P_B_w, u.v_tip_ms, u.v_i_ms, u.drag_ratio, u.solidity, u.rotor_area_m2, u.rho, u.mass_kg, u.g_ms2
    )
    cons = ConstraintSet(
        e.x_min_m, e.x_max_m, e.y_min_m, e.y_max_m, e.z_min_m, e.z_max_m,
        e.p_min_w, ch.dbm_to_w(e.p_max_dbm), e.e0_j, e.i0_dbm,
        e.mu1, e.mu2, e.rho1, e.rho2, e.w_pen,
    )
    vp = VesselParams(
        mass_matrix=_diag([v.mass_kg, 1.2 * v.mass_kg, 1.2 * v.mass_kg, 1e6, v.yaw_inertia_kgm2, v.yaw_inertia_kgm2]),
        damping=_diag([v.surge_damping, v.sway_damping, v.sway_damping, 1e6, 1e6, v.yaw_damping]),
        coriolis_enabled=v.coriolis,
        disturbance_std=[[v.force_std_n, v.force_std_n, 0.0, 0.0, 0.0, v.moment_std_nm]] * 3,
        max_speed=v.max_speed_ms,
    )
    if s.anchor_time_s - s.phase_jitter_s < 0:
        raise ConfigError("sat.anchor_time_s must be at least sat.phase_jitter_s")
    if v.substeps < 1:
        raise ConfigError("vessel.substeps must be positive")
    return ScenarioConfig(
        orbit=orbit,
        link=link,
        uav=uav,
        constraints=cons,
        vessel=vp,
        alice_route=VesselRoute(tuple(map(tuple, v.alice_route)), v.alice_speed_ms, v.along_jitter_m, v.cross_jitter_m),
        eve_route=VesselRoute(tuple(map(tuple, v.eve_route)), v.eve_speed_ms, v.along_jitter_m, v.cross_jitter_m),
        vessel_antenna_height_m=v.antenna_height_m,
        vessel_substeps=v.substeps,
        horizon=e.horizon,
        dt_s=e.dt_s,
        v_h_max_ms=e.v_h_max_ms,
        v_v_max_ms=e.v_v_max_ms,
        anchor_time_s=s.anchor_time_s,
        phase_jitter_s=s.phase_jitter_s,
        arena_scale_m=e.arena_scale_m,
        shadowing=e.shadowing,
        fading=e.fading,
    )


def build_agent_config(cfg: RunConfig) -> AgentConfig:
    n, a = cfg.enc, cfg.agent
    return AgentConfig(
        transformer=a.transformer,
        d_model=n.d_model,
        heads=n.heads,
        ffn_mult=n.ffn_mult,
        layers=n.layers,
        window=n.window,
        varpi=n.varpi,
        hidden=a.hidden,
        alpha=a.alpha,
        gamma=a.gamma,
        kappa=a.kappa,
        lr=a.lr,
        batch_size=a.batch_size,
        buffer_capacity=a.buffer_capacity,
    )
