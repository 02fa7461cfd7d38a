import math

import numpy as np
import pytest
from scipy.stats import chisquare

from wrsn_sched.dqn import (
    DqnTrainer,
    ReplayBuffer,
    TrainConfig,
    Transition,
    greedy_rollout,
    sgd_step,
    select_action,
    td_target,
)
from wrsn_sched.embed import EmbeddingParams
from wrsn_sched.envs import is_solution, make_env
from wrsn_sched.errors import ConfigError, TrainingDivergedError, TrainingError
from wrsn_sched.instances import Variant


def _small(**overrides):
    values = dict(episodes=3, p=8, rounds=2, warmup=1, batch_size=2, capacity=50, log_every=1)
    values.update(overrides)
    return TrainConfig(**values)


def test_select_action_greedy():
    assert select_action([3, 1, 2], {1: 0.5, 2: 2.0, 3: 1.0}, 0.0) == 2
    assert select_action([3, 2], {2: 1.0, 3: 1.0}, 0.0) == 2
    assert select_action([], {}, 0.5) is None
    with pytest.raises(TrainingError):
        select_action([1, 2], {1: 0.0, 2: 0.0}, 0.5)


def test_select_action_explores_uniformly():
    rng = np.random.default_rng(0)
    picks = [select_action([1, 2, 3], {1: 9.0, 2: 0.0, 3: 0.0}, 1.0, rng) for _ in range(3000)]
    counts = [picks.count(v) for v in (1, 2, 3)]
    assert chisquare(counts).pvalue > 0.001


def test_td_target():
    assert td_target(1.0, [2.0, 0.5], 1.0) == 3.0
    assert td_target(1.0, [2.0], 1.0, terminal=True) == 1.0
    assert td_target(1.0, [], 1.0) == 1.0
    assert td_target(1.0, [2.5], 0.9) == pytest.approx(3.25)
    assert td_target(1.0, [2.0], 0.5, steps=2) == pytest.approx(1.5)


def test_replay_buffer_overwrites_oldest(p2_line):
    state = make_env(p2_line).reset()
    memory = ReplayBuffer(2)
    for action in (1, 2, 3):
        memory.push(Transition(state, action, 0.0, state, True))
    assert len(memory) == 2
    assert sorted(t.action for t in memory.buffer) == [2, 3]
    batch = memory.sample(5, np.random.default_rng(0))
    assert sorted(t.action for t in batch) == [2, 3]
    with pytest.raises(ConfigError):
        ReplayBuffer(0)


@pytest.mark.parametrize(
    "overrides",
    [
        dict(episodes=0),
        dict(gamma=1.5),
        dict(n_step=0),
        dict(batch_size=100, capacity=10),
        dict(epsilon_start=0.1, epsilon_end=0.5),
        dict(learning_rate=0.0),
        dict(p2_reward="distance"),
    ],
)
def test_train_config_validation(overrides):
    with pytest.raises(ConfigError):
        _small(**overrides).validate()


def test_epsilon_schedule():
    config = _small(episodes=10, epsilon_start=1.0, epsilon_end=0.1, epsilon_decay=0.5)
    assert config.epsilon_at(0) == 1.0
    assert config.epsilon_at(5) == pytest.approx(0.1)
    assert config.epsilon_at(9) == pytest.approx(0.1)


def test_default_discount():
    config = _small()
    assert config.gamma_for(Variant.P2_FULLY_CHARGING) == 1.0
    assert config.gamma_for(Variant.P3_KCOVERAGE) == 0.99
    assert _small(gamma=0.5).gamma_for(Variant.P3_KCOVERAGE) == 0.5


def test_from_config(config):
    train_config = TrainConfig.from_config(config, seed=42)
    assert train_config.seed == 42
    assert train_config.p == 8
    assert train_config.episodes == 3
    assert train_config.dt is None


def test_train_small(p2_line, p3_triple):
    for instance, n_step in ((p2_line, 1), (p3_triple, 2)):
        result = DqnTrainer(_small(n_step=n_step, eval_every=1)).train([instance])
        assert len(result.log) == 3
        assert result.params.is_finite()
        assert [entry.episode for entry in result.log] == [0, 1, 2]
        assert all(entry.eval_objective is not None for entry in result.log)


def test_train_is_seeded(p2_line):
    first = DqnTrainer(_small(seed=5)).train([p2_line]).params
    second = DqnTrainer(_small(seed=5)).train([p2_line]).params
    assert all(np.array_equal(a, b) for a, b in zip(first.as_dict().values(), second.as_dict().values()))


def test_train_rejects_mixed_variants(p2_line, p3_triple):
    with pytest.raises(TrainingError):
        DqnTrainer(_small()).train([p2_line, p3_triple])
    with pytest.raises(TrainingError):
        DqnTrainer(_small()).train([])


def test_greedy_rollout_is_deterministic(p2_line, p3_triple):
    params = EmbeddingParams.init(p=8, rounds=2, rng=np.random.default_rng(7), scale=0.5)
    for instance in (p2_line, p3_triple):
        first = greedy_rollout(instance, params)
        second = greedy_rollout(instance, params)
        assert first.order == second.order
        assert is_solution(first)
    assert math.isfinite(make_env(p2_line).objective(greedy_rollout(p2_line, params)))


def _frozen_batch(instance, rewards):
    env = make_env(instance)
    start = env.reset()
    return [Transition(start, v, reward, env.replay((v,)), True) for v, reward in zip(instance.requester_ids(), rewards)]


def test_sgd_step_lowers_loss_on_a_frozen_batch(p2_line):
    params = EmbeddingParams.init(p=8, rounds=2, rng=np.random.default_rng(11), scale=0.1)
    batch = _frozen_batch(p2_line, [1.0, -0.5, 2.0])
    losses = [sgd_step(params, batch, 1.0, 5e-3) for _ in range(200)]
    assert all(math.isfinite(loss) for loss in losses)
    assert losses[-1] < losses[0]
    assert params.is_finite()


def test_sgd_step_stops_on_non_finite_loss(p2_line):
    params = EmbeddingParams.init(p=8, rounds=2, rng=np.random.default_rng(12), scale=0.5)
    before = params.copy()
    batch = _frozen_batch(p2_line, [1.0, math.nan, 2.0])
    with pytest.raises(TrainingDivergedError, match="non-finite loss"):
        sgd_step(params, batch, 1.0, 1e-3)
    assert all(np.array_equal(a, b) for a, b in zip(before.as_dict().values(), params.as_dict().values()))
