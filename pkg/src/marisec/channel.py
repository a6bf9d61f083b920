"""Satellite-to-vessel and UAV-to-vessel channels, rates and secrecy rate.

All budget quantities are converted from dB/dBm to linear watts and gains
once, when a :class:`LinkBudget` is built. Path loss in dB is an attenuation;
the matching linear power gain is ``10 ** (-PL_dB / 10)``. The link functions
broadcast over numpy arrays of distances and draws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def dbm_to_w(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def w_to_dbm(w: float) -> float:
    return 10.0 * math.log10(w) + 30.0


def db_to_lin(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class LinkBudget:
    p_sat_dbm: float = 49.03
    g_sat_dbi: float = 52.0
    g_vessel_sat_dbi: float = 30.0
    g_uav_dbi: float = 8.0
    g_eve_uav_dbi: float = 8.0
    noise_dbm: float = -107.0
    c_s: float = 46.4
    w_s: float = 2.0
    rician_k: float = 31.3
    sigma_shadow_s2v_db: float = 4.0
    c_u: float = 116.7
    w_u: float = 1.5
    d_ref_m: float = 2600.0
    sigma_shadow_u2v_db: float = 2.0

    def __post_init__(self):
        for name, v in self.__dict__.items():
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite")
        if self.d_ref_m <= 0:
            raise ValueError("d_ref_m must be positive")
        if self.rician_k < 0:
            raise ValueError("rician_k must be non-negative")
        if self.w_s <= 0 or self.w_u <= 0:
            raise ValueError("path-loss exponents must be positive")
        if self.sigma_shadow_s2v_db < 0 or self.sigma_shadow_u2v_db < 0:
            raise ValueError("shadowing std must be non-negative")
        lin = {
            "p_sat_w": dbm_to_w(self.p_sat_dbm),
            "g_sat": db_to_lin(self.g_sat_dbi),
            "g_vessel_sat": db_to_lin(self.g_vessel_sat_dbi),
            "g_uav": db_to_lin(self.g_uav_dbi),
            "g_eve_uav": db_to_lin(self.g_eve_uav_dbi),
            "noise_w": dbm_to_w(self.noise_dbm),
        }
        for k, v in lin.items():
            object.__setattr__(self, k, v)
        # satellite-side numerator constant of both SINRs
        object.__setattr__(self, "sat_eirp_rx", lin["p_sat_w"] * lin["g_sat"] * lin["g_vessel_sat"])


@dataclass(frozen=True)
class ChannelDraw:
    """One random realisation of the shadowing and fading seen by a vessel."""

    shadow_s2v_db: float = 0.0
    shadow_u2v_db: float = 0.0
    scatter_complex: complex = 0j
    rician_amp: float = 1.0

    @classmethod
    def deterministic(cls) -> "ChannelDraw":
        return cls()


def rician_mixture(k: float, scatter):
    """sqrt(K/(1+K)) + sqrt(1/(1+K)) * scatter; unit mean power for CN(0,1) scatter."""
    return math.sqrt(k / (1.0 + k)) + math.sqrt(1.0 / (1.0 + k)) * scatter


def rician_amplitude(k: float, scatter):
    return np.abs(rician_mixture(k, scatter))


class DrawFactory:
    """Samples :class:`ChannelDraw` objects from a seeded stream.

    Every call consumes the same number of variates regardless of which
    effects are enabled, so toggling shadowing does not shift the stream.
    """

    def __init__(self, budget: LinkBudget, rng: np.random.Generator, shadowing: bool = True, fading: bool = True):
        self.budget = budget
        self.rng = rng
        self.shadowing = shadowing
        self.fading = fading

    def draw(self) -> ChannelDraw:
        z = self.rng.standard_normal(6)
        b = self.budget
        scatter = complex(z[2], z[3]) / math.sqrt(2.0)
        fade = complex(z[4], z[5]) / math.sqrt(2.0)
        return ChannelDraw(
            shadow_s2v_db=float(b.sigma_shadow_s2v_db * z[0]) if self.shadowing else 0.0,
            shadow_u2v_db=float(b.sigma_shadow_u2v_db * z[1]) if self.shadowing else 0.0,
            scatter_complex=scatter if self.fading else 0j,
            rician_amp=float(rician_amplitude(b.rician_k, fade)) if self.fading else 1.0,
        )

    def draw_batch(self, n: int) -> ChannelDraw:
        """``n`` independent realisations packed as arrays (for Monte-Carlo use)."""
        z = self.rng.standard_normal((6, n))
        b = self.budget
        scatter = (z[2] + 1j * z[3]) / math.sqrt(2.0)
        fade = (z[4] + 1j * z[5]) / math.sqrt(2.0)
        zeros = np.zeros(n)
        return ChannelDraw(
            shadow_s2v_db=b.sigma_shadow_s2v_db * z[0] if self.shadowing else zeros,
            shadow_u2v_db=b.sigma_shadow_u2v_db * z[1] if self.shadowing else zeros,
            scatter_complex=scatter if self.fading else zeros.astype(complex),
            rician_amp=rician_amplitude(b.rician_k, fade) if self.fading else np.ones(n),
        )


def _check_distance(d_m) -> None:
    if not np.all(np.asarray(d_m) > 0):
        raise ValueError(f"distance must be positive, got {d_m}")


def pathloss_s2v_db(budget: LinkBudget, d_m: float, draw: ChannelDraw) -> float:
    _check_distance(d_m)
    return budget.c_s + 10.0 * budget.w_s * np.log10(d_m) + draw.shadow_s2v_db


def channel_gain_s2v(budget: LinkBudget, d_m: float, draw: ChannelDraw) -> complex:
    """Complex composite channel: path-loss amplitude times Rician mixture."""
    pl_lin = 10.0 ** (-pathloss_s2v_db(budget, d_m, draw) / 10.0)
    return np.sqrt(pl_lin) * rician_mixture(budget.rician_k, draw.scatter_complex)


def pathloss_u2v_db(budget: LinkBudget, d_m: float, draw: ChannelDraw) -> float:
    _check_distance(d_m)
    return budget.c_u + 10.0 * budget.w_u * np.log10(d_m / budget.d_ref_m) + draw.shadow_u2v_db


def channel_gain_u2v(budget: LinkBudget, d_m: float, draw: ChannelDraw) -> float:
    """Power gain ς² / PL with PL the linear attenuation."""
    pl_lin = 10.0 ** (pathloss_u2v_db(budget, d_m, draw) / 10.0)
    return draw.rician_amp**2 / pl_lin


def _rate(budget: LinkBudget, h_s, jam_rx_w):
    signal = budget.sat_eirp_rx * np.abs(h_s) ** 2
    return np.log2(1.0 + signal / (jam_rx_w + budget.noise_w))


def _check_power(p_uav_w) -> None:
    p = np.asarray(p_uav_w)
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ValueError(f"UAV power must be non-negative, got {p_uav_w}")


def interference_alice_w(budget: LinkBudget, h_ua: float, p_uav_w: float) -> float:
    return p_uav_w * budget.g_uav * h_ua


def interference_eve_w(budget: LinkBudget, h_ue: float, p_uav_w: float) -> float:
    return p_uav_w * budget.g_uav * budget.g_eve_uav * h_ue


def rate_alice(budget: LinkBudget, h_sa: complex, h_ua: float, p_uav_w: float) -> float:
    """Legitimate-vessel rate in bit/s/Hz with the UAV jamming as interference."""
    _check_power(p_uav_w)
    return _rate(budget, h_sa, interference_alice_w(budget, h_ua, p_uav_w))


def rate_eve(budget: LinkBudget, h_se: complex, h_ue: float, p_uav_w: float) -> float:
    """Eavesdropper rate; the jamming arrives with the extra gain toward Eve."""
    _check_power(p_uav_w)
    return _rate(budget, h_se, interference_eve_w(budget, h_ue, p_uav_w))


def secrecy_rate(r_alice, r_eve):
    if np.any(np.asarray(r_alice) < 0) or np.any(np.asarray(r_eve) < 0):
        raise ValueError("rates must be non-negative")
    return np.maximum(0.0, np.subtract(r_alice, r_eve))
