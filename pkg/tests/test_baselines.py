from dataclasses import replace

import numpy as np
import pytest

from marisec import channel as ch
from marisec.baselines import (
    non_uav_policy,
    optimal_secrecy_oracle,
    oracle_candidates,
    random_policy,
    tracking_policy,
)
from marisec.config import RunConfig
from marisec.env import MaritimeJammingEnv, ScenarioConfig
from marisec.evaluation import SUMMARY_COLUMNS, evaluate, summarize


def rollout(env, seed, policy, steps=None):
    env.reset(seed)
    trace = []
    while not env.done and (steps is None or len(trace) < steps):
        trace.append(env.step(policy())[3])
    return trace


def test_non_uav_is_silent_and_still():
    a = non_uav_policy()
    assert a.as_array().tolist() == [0.0, 0.0, 0.0, 0.0]
    env = MaritimeJammingEnv()
    trace = rollout(env, 0, non_uav_policy)
    assert all(i["p_uav_w"] == 0.0 for i in trace)
    assert all(i["i_alice_w"] == 0.0 and i["i_eve_w"] == 0.0 for i in trace)


def test_oracle_without_jamming_equals_non_uav():
    cfg = ScenarioConfig(link=ch.LinkBudget(g_uav_dbi=-400.0))
    env = MaritimeJammingEnv(cfg)
    trace = rollout(env, 3, non_uav_policy)
    bound = optimal_secrecy_oracle(env, trace)
    np.testing.assert_allclose(bound, [i["r_sec"] for i in trace], rtol=1e-12, atol=1e-12)


def test_oracle_dominates_random_policies():
    env = MaritimeJammingEnv()
    for k in range(1000):
        g = np.random.default_rng([k, 9])
        trace = rollout(env, k % 50, lambda: random_policy(None, g), steps=4)
        bound = optimal_secrecy_oracle(env, trace)
        assert np.all(bound >= np.array([i["r_sec"] for i in trace]) - 1e-12)


def test_oracle_ignores_penalties():
    base = MaritimeJammingEnv()
    trace = rollout(base, 5, lambda: tracking_policy(base))
    cfg = ScenarioConfig()
    other = MaritimeJammingEnv(replace(cfg, constraints=replace(cfg.constraints, mu1=7.0, rho1=0.9, w_pen=0.2)))
    np.testing.assert_array_equal(optimal_secrecy_oracle(base, trace), optimal_secrecy_oracle(other, trace))


def test_oracle_rejects_empty_trace():
    with pytest.raises(ValueError):
        optimal_secrecy_oracle(MaritimeJammingEnv(), [])


def test_oracle_candidates_cover_box():
    env = MaritimeJammingEnv()
    c = oracle_candidates(env, np.array([-1100.0, 50.0, 5.0]), 5.0)
    assert c.min(axis=0).tolist() == [0.0, 0.0, 50.0]
    assert c.max(axis=0).tolist() == [80.0, 80.0, 70.0]
    assert c[-1].tolist() == [0.0, 50.0, 50.0]
    assert len(c) == 17 * 17 * 5 + 1


def test_random_policy_reproducible_and_feasible():
    a = [random_policy(None, np.random.default_rng(4)) for _ in range(2)]
    np.testing.assert_array_equal(a[0], a[1])
    env = MaritimeJammingEnv()
    g = np.random.default_rng(0)
    for info in rollout(env, 1, lambda: random_policy(None, g)):
        assert all(info[f"c{k}"] for k in range(1, 5))


def test_tracking_policy_reaches_nearest_box_point():
    env = MaritimeJammingEnv()
    trace = rollout(env, 2, lambda: tracking_policy(env))
    eve = trace[-1]["eve_ant"]
    want = np.clip(eve, env.cfg.constraints.lower, env.cfg.constraints.upper)
    np.testing.assert_allclose(trace[-1]["uav_pos"], want, atol=2.0)
    assert all(i["p_uav_w"] == pytest.approx(0.1) for i in trace)


def test_non_uav_evaluation_energy_is_hover():
    cfg = RunConfig()
    stats = evaluate(cfg, "nonuav", episodes=3)
    for s in stats:
        assert s.energy_j == pytest.approx(168.49 * 40)
        assert s.c6_rate == s.c7_rate == 0.0
        assert s.c1_c5_ok == 1.0


def test_summary_columns_and_ratio_bounds():
    cfg = RunConfig()
    for kind in ("nonuav", "random"):
        stats = evaluate(cfg, kind, episodes=4)
        assert all(0.0 <= s.oracle_ratio <= 1.0 for s in stats)
        row = summarize(kind, stats)
        assert list(row) == SUMMARY_COLUMNS


def test_shared_seeds_across_policies():
    cfg = RunConfig()
    seen = {}
    for kind in ("nonuav", "random"):
        traces = []
        evaluate(cfg, kind, episodes=2, trace_sink=lambda ep, tr: traces.append([i["eve_ant"] for i in tr]))
        seen[kind] = traces
    for a, b in zip(seen["nonuav"], seen["random"]):
        np.testing.assert_array_equal(np.array(a), np.array(b))


def test_agent_policy_requires_checkpoint():
    with pytest.raises(ValueError):
        evaluate(RunConfig(), "transsac", agent=None, episodes=1)
