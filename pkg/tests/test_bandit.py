import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hmdsim import bandit, engine, policies, workload
from hmdsim.bandit import (
    AgentConfig,
    AgentFileError,
    BanditAgent,
    BanditEnv,
    Context,
    RewardCache,
    episode_reward,
    select_action,
    train_curriculum,
    update,
)
from hmdsim.telemetry import TelemetryConfig

CTX = Context(0.5, 0.4, 0.3, 0.2)


def _agent(**kw):
    return BanditAgent(AgentConfig(**kw))


def test_arm_grid_round_trip():
    assert bandit.arm_action(0) == bandit.ActionPair(0, 0.125)
    assert bandit.arm_action(41) == bandit.ActionPair(16, 8.0)
    for arm in range(42):
        assert bandit.action_arm(bandit.arm_action(arm)) == arm
    with pytest.raises(IndexError):
        bandit.arm_action(42)


def test_greedy_at_zero_epsilon():
    agent = _agent()
    agent.net.biases[-1][:] = 0.0
    agent.net.weights[-1][:] = 0.0
    agent.net.biases[-1][7] = 1.0
    assert all(select_action(agent, CTX, 0.0) == 7 for _ in range(20))


def test_ties_break_to_first_arm():
    agent = _agent()
    agent.net.weights[-1][:] = 0.0
    agent.net.biases[-1][:] = 0.0
    assert select_action(agent, CTX, 0.0) == 0


def test_full_exploration_covers_arms():
    agent = _agent(seed=4)
    arms = {select_action(agent, CTX, 1.0) for _ in range(2000)}
    assert arms == set(range(42))
    with pytest.raises(ValueError):
        select_action(agent, CTX, 1.5)


def test_epsilon_schedule():
    agent = _agent()
    assert agent.epsilon(0, 1000) == 1.0
    assert agent.epsilon(50, 1000) == pytest.approx(0.525)
    assert agent.epsilon(100, 1000) == pytest.approx(0.05)
    assert agent.epsilon(999, 1000) == pytest.approx(0.05)


def test_single_transition_converges():
    agent = _agent(seed=1)
    batch = [(CTX, 5, -1.25)]
    for _ in range(500):
        update(agent, batch)
    assert abs(agent.q_values(CTX)[5] + 1.25) < 1e-2


def test_zero_loss_is_a_fixed_point():
    agent = _agent(seed=2)
    q = agent.q_values(CTX)[3]
    before = [p.copy() for p in agent.net.params]
    assert update(agent, [(CTX, 3, float(q))]) == 0.0
    assert all(np.array_equal(a, b) for a, b in zip(before, agent.net.params))


def test_batch_update_reduces_loss():
    agent = _agent(seed=3)
    rng = np.random.default_rng(0)
    batch = [(rng.random(4), int(rng.integers(42)), -float(rng.uniform(1, 3))) for _ in range(32)]
    first = update(agent, batch)
    for _ in range(300):
        last = update(agent, batch)
    assert last < first / 10


def test_update_rejects_bad_batches():
    agent = _agent()
    with pytest.raises(ValueError):
        update(agent, [])
    with pytest.raises(ValueError):
        update(agent, [(CTX, 0, float("nan"))])


def test_sgd_optimizer_runs():
    agent = _agent(optimizer="sgd", learning_rate=1e-2)
    for _ in range(300):
        update(agent, [(CTX, 2, -1.0)])
    assert abs(agent.q_values(CTX)[2] + 1.0) < 5e-2
    with pytest.raises(ValueError):
        _agent(optimizer="rmsprop")


_TINY = engine.run(engine.SimConfig(tenants=(engine.TenantConfig(workload.gen_zipf(4, 1.0, 10, seed=0)),)))


def _fake_result(seconds):
    return dataclasses.replace(_TINY, completion_ps=int(round(seconds * 1e12)))


def test_episode_reward_examples():
    assert episode_reward(_fake_result(1.3), 1.0) == pytest.approx(-1.3)
    assert episode_reward(_fake_result(1.0), 1.0) == pytest.approx(-1.0)
    # request mode: half the requests in the same time is twice the mock latency
    assert episode_reward(_fake_result(1.0), 1.0, requests=50, baseline_requests=100) == pytest.approx(-2.0)
    with pytest.raises(ValueError):
        episode_reward(_fake_result(1.0), 0.0)


def test_context_key_rounding():
    assert Context(0.123, 0.456, 0.0, -0.0).key() == (0.12, 0.46, 0.0, 0.0)
    assert CTX.masked(alloc=False).local_alloc == 0.0
    assert CTX.masked(network=False).network_traffic == 0.0


def test_reward_cache_round_trip(tmp_path):
    c = RewardCache()
    assert c.lookup((0.1,), 1) is None
    c.store((0.1,), 1, -1.5)
    assert c.lookup((0.1,), 1) == -1.5
    assert (c.hits, c.misses, c.hit_rate) == (1, 1, 0.5)
    c.save(tmp_path / "c.json")
    assert dict(RewardCache.load(tmp_path / "c.json").items()) == dict(c.items())


class TwoArmEnv:
    """Synthetic environment: arm 1 is always better."""

    baseline_time = 1.0

    def __init__(self):
        self.calls = 0

    def context(self, allocation):
        return Context(allocation, 0.5, 0.5, 0.0)

    def reward(self, allocation, action):
        self.calls += 1
        return -1.0 if action.theta_rate == 2.0 else -2.0


def test_two_arm_bandit_learns_better_arm():
    agent = _agent(bursts=(0,), rates=(1.0, 2.0), seed=0)
    env = TwoArmEnv()
    log = train_curriculum(agent, env, 400, allocations=(0.5, 0.2))
    assert [a.final_arm for a in log.allocations] == [1, 1]
    assert env.calls <= 4


@pytest.fixture(scope="module")
def small_env():
    tr = workload.gen_shifting(64, 8, 1000, 6000, seed=5)
    cfg = engine.SimConfig(tenants=(engine.TenantConfig(tr, policies.Bandit()),), telemetry=TelemetryConfig(marking_interval=1e-4))
    return BanditEnv(cfg)


def test_curriculum_cache_bounds(small_env):
    agent = _agent(seed=0)
    cache = RewardCache()
    log = train_curriculum(agent, small_env, 150, cache)
    assert len(log.allocations) == 9
    assert all(a.distinct_simulations <= 42 for a in log.allocations)
    assert log.distinct_simulations == len(cache) <= 378
    assert 0 <= log.hit_rate <= 1
    assert log.records()[0].startswith("# normalization")


def test_cache_entries_are_true_rewards(small_env):
    cache = RewardCache()
    train_curriculum(_agent(seed=1), small_env, 60, cache, allocations=(0.3,))
    entries = list(cache.items())
    assert len(entries) >= 10
    pick = np.random.default_rng(0).choice(len(entries), 10, replace=False)
    for i in pick:
        (_, arm), reward = entries[i]
        assert reward == small_env.reward(0.3, bandit.arm_action(arm))


def test_ablated_env_disables_burst(small_env):
    env = BanditEnv(small_env.base, use_burst=False)
    assert env.policy(bandit.ActionPair(8, 1.0)).theta_burst == 0


def test_env_rejects_multi_tenant(small_env):
    with pytest.raises(ValueError):
        BanditEnv(small_env.base.replace(tenants=small_env.base.tenants * 2))


def test_save_load_round_trip(tmp_path):
    agent = _agent(seed=7)
    path = tmp_path / "a.bin"
    bandit.save_agent(agent, path)
    again = bandit.load_agent(path)
    x = np.random.default_rng(0).random((5, 4))
    assert np.array_equal(agent.net(x), again.net(x))
    assert again.config.bursts == agent.config.bursts and again.config.rates == agent.config.rates


@given(st.integers(0, 4000))
def test_truncated_agent_file_rejected(cut):
    import tempfile
    from pathlib import Path

    with tempfile.TemporaryDirectory() as d:
        path = Path(d) / "a.bin"
        bandit.save_agent(_agent(hidden=(8,)), path)
        data = path.read_bytes()
        cut = cut % len(data)
        path.write_bytes(data[:cut])
        with pytest.raises(AgentFileError):
            bandit.load_agent(path)


def test_corrupt_agent_files_rejected(tmp_path):
    path = tmp_path / "a.bin"
    bandit.save_agent(_agent(hidden=(8,)), path)
    good = path.read_bytes()
    for bad in (b"XXXX" + good[4:], good[:4] + b"\x09" + good[5:], good + b"\x00"):
        path.write_bytes(bad)
        with pytest.raises(AgentFileError):
            bandit.load_agent(path)
