"""Reference policies and the per-slot secrecy upper bound."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import channel as ch
from .env import ActionVector, MaritimeJammingEnv


def non_uav_policy(state=None) -> ActionVector:
    """No jamming and no movement."""
    return ActionVector(0.0, 0.0, 0.0, 0.0)


def random_policy(state, rng: np.random.Generator) -> np.ndarray:
    """Uniform unit action; the env maps it into the projected action box."""
    return rng.uniform(-1.0, 1.0, size=4)


def oracle_candidates(env: MaritimeJammingEnv, eve_ant: np.ndarray, grid_m: float = 5.0) -> np.ndarray:
    """Grid over the feasible box plus the box point closest to Eve."""
    cons = env.cfg.constraints
    axes = [
        np.unique(np.append(np.arange(lo, hi, grid_m), hi))
        for lo, hi in zip(cons.lower, cons.upper)
    ]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    closest = np.clip(eve_ant, cons.lower, cons.upper)
    return np.vstack([mesh, closest])


def optimal_secrecy_oracle(env: MaritimeJammingEnv, trace: Sequence[dict], grid_m: float = 5.0) -> np.ndarray:
    """Per-slot bound: Alice unjammed, Eve jammed at P_max from the best feasible point.

    ``trace`` is the list of ``info`` dicts returned by ``env.step``; the
    bound reuses each slot's geometry and channel draws.
    """
    if len(trace) == 0:
        raise ValueError("empty trace")
    link = env.cfg.link
    p_max = env.cfg.constraints.p_max_w
    out = np.empty(len(trace))
    for i, info in enumerate(trace):
        sat = info["sat_pos"]
        alice, eve = info["alice_ant"], info["eve_ant"]
        da, de = info["draw_alice"], info["draw_eve"]
        d_sa = np.linalg.norm(sat - env.frame.to_ecef(alice))
        d_se = np.linalg.norm(sat - env.frame.to_ecef(eve))
        r_a = ch.rate_alice(link, ch.channel_gain_s2v(link, d_sa, da), 0.0, 0.0)
        cand = oracle_candidates(env, eve, grid_m)
        d_ue = np.linalg.norm(cand - eve, axis=1)
        h_ue = ch.channel_gain_u2v(link, d_ue, de)
        r_e = ch.rate_eve(link, ch.channel_gain_s2v(link, d_se, de), h_ue, p_max)
        out[i] = float(ch.secrecy_rate(r_a, np.min(r_e)))
    return out


def tracking_policy(env: MaritimeJammingEnv) -> ActionVector:
    """Scripted jammer: fly toward the box point nearest Eve and transmit at P_max."""
    s = env.state
    cons = env.cfg.constraints
    eve = env.vessel_antenna(s.eta_eve)
    d = np.clip(eve, cons.lower, cons.upper) - s.uav_pos
    return ActionVector(d[0], d[1], d[2], cons.p_max_w)
