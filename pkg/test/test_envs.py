import math

import numpy as np
import pytest

from wrsn_sched.envs import (
    FullyChargingEnv,
    KCoverageEnv,
    MobilePathEnv,
    constraint_violations,
    is_solution,
    make_env,
    replay_schedule,
    rollout,
    schedule_trace,
)
from wrsn_sched.errors import ScheduleError
from wrsn_sched.instances import GenParams, Variant, generate_instance


def _first(state, actions):
    return actions[0] if actions else None


def test_replay_p2_charge_time(make_p2):
    instance = make_p2([(30.0, 40.0)], residuals=[6800.0], transfer_rate=20.0, alpha=0.7)
    state = replay_schedule(instance, (1,))
    assert state.arrival_times == (10.0,)
    assert state.charge_durations == (200.0,)
    assert state.charge_energies == (4000.0,)
    assert state.clock == 210.0
    assert state.travel_distance == pytest.approx(100.0)
    assert state.total_energy == pytest.approx(4100.0)


def test_p2_objective_sums_prizes(make_p2):
    positions = [(10.0 * i, 0.0) for i in range(1, 7)]
    instance = make_p2(positions, prizes=[7, 30, 1, 1, 1, 1])
    env = make_env(instance)
    assert env.objective(env.reset()) == 0.0
    assert env.objective(env.replay((1, 2))) == 37.0


def test_p3_objective_is_negative_tour(make_p3):
    instance = make_p3(
        [(3.0, 0.0), (3.0, 4.0)], radius=150.0, residuals=[1000.0, 1000.0], depot=(0.0, 0.0)
    )
    env = make_env(instance)
    assert isinstance(env, KCoverageEnv)
    assert env.objective(env.replay((1, 2))) == pytest.approx(-12.0)


def test_insertion_ties(make_p2, make_p3):
    positions = [(10.0, 0.0), (20.0, 0.0), (30.0, 0.0)]
    p2 = FullyChargingEnv(make_p2(positions))
    assert p2.insert(p2.replay((1, 3)), 2).order == (1, 2, 3)
    assert p2.insert(p2.replay((1,)), 2).order == (2, 1)

    p3 = KCoverageEnv(
        make_p3(positions, radius=150.0, residuals=[1000.0] * 3, betas=[0.1] * 3, depot=(0.0, 0.0))
    )
    assert p3.insert(p3.replay((1, 3)), 2).order == (1, 3, 2)
    assert p3.insert(p3.replay((1,)), 2).order == (1, 2)


def test_p2_insert_picks_cheapest_position(p2_line):
    env = make_env(p2_line)
    state = env.insert(env.replay((2, 3)), 1)
    assert state.order == (1, 2, 3)
    assert state.travel_distance == pytest.approx(600.0)


def test_rewards(p1_pair, p2_line, make_p3):
    p1 = make_env(p1_pair)
    assert isinstance(p1, MobilePathEnv)
    assert p1.reward(p1.reset(), 1) == 1.0

    p2 = make_env(p2_line)
    assert p2.reward(p2.reset(), 1) == 10800.0
    assert make_env(p2_line, reward_mode="prize").reward(p2.reset(), 1) == 1.0

    late = make_env(make_p3([(90.0, 50.0)], radius=110.0, residuals=[5.0]))
    assert late.reward(late.reset(), 1) == -math.inf
    assert late.actions(late.reset()) == ()


def test_p2_rejects_over_budget(make_p2):
    env = make_env(make_p2([(100.0, 0.0), (200.0, 0.0)], energy_capacity=15000.0))
    first = env.step(env.reset(), 1)
    assert not first.rejected
    assert first.reward == 10800.0
    second = env.step(first.next_state, 2)
    assert second.rejected
    assert second.reward == 0.0
    assert second.next_state.order == (1,)
    assert second.next_state.rejected == {2}
    assert second.terminal
    with pytest.raises(ScheduleError):
        env.step(second.next_state, 2)


def test_rewards_telescope(p2_line, p3_triple):
    for instance in (p2_line, p3_triple):
        env = make_env(instance)
        start = env.reset()
        state, trace = rollout(env, _first)
        assert trace
        assert sum(step.reward for step in trace) == pytest.approx(
            env.reward_objective(state) - env.reward_objective(start)
        )


def test_p3_rollout_stops_when_covered(p3_triple):
    env = make_env(p3_triple)
    state, trace = rollout(env, _first)
    assert len(state.order) == 2
    assert env.coverage_restored(state)
    assert is_solution(state)


def test_constraint_violations(p3_triple, make_p1, still_track, make_p3):
    partial = replay_schedule(p3_triple, (1,))
    assert constraint_violations(partial) == ["coverage"]
    assert constraint_violations(partial, require_coverage=False) == []

    late = replay_schedule(make_p3([(90.0, 50.0)], radius=110.0, residuals=[5.0]), (1,))
    assert not late.feasible
    assert "unreachable visit" in constraint_violations(late, require_coverage=False)

    short = make_p1(
        [still_track((30.0, 40.0), 60.0), still_track((60.0, 80.0), 60.0)], residuals=[8000.0, 8000.0], timespan=60.0
    )
    assert constraint_violations(replay_schedule(short, (1, 2))) == ["timespan"]
    assert constraint_violations(replay_schedule(short, (1,))) == []


def test_p1_recurrence(p1_pair):
    state = replay_schedule(p1_pair, (1, 2))
    assert state.arrival_times[0] == 10.0
    assert state.charge_durations[0] == pytest.approx((8748.0 - 8000.0) / 40.0)
    assert state.arrival_times[1] == 39.0
    assert state.closing_distance == pytest.approx(100.0)
    assert is_solution(state)


def test_replay_rejects_duplicates(p2_line):
    with pytest.raises(ScheduleError):
        replay_schedule(p2_line, (1, 1))


def test_env_rejects_other_variant(p2_line):
    with pytest.raises(ScheduleError):
        KCoverageEnv(p2_line)


def test_schedule_trace(p2_line):
    state = replay_schedule(p2_line, (1, 2))
    trace = schedule_trace(state)
    assert [step.vertex for step in trace] == [1, 2]
    assert [step.insert_pos for step in trace] == [0, 1]
    assert [step.reward for step in trace] == [10800.0, 10800.0]
    assert [step.clock for step in trace] == [290.0, 580.0]
    assert trace[-1].distance == pytest.approx(400.0)


_EPISODE_PARAMS = {
    Variant.P1_MOBILE_PATH: dict(timespan=900.0),
    Variant.P2_FULLY_CHARGING: dict(side=300.0),
    Variant.P3_KCOVERAGE: dict(side=200.0, sensing_radius=150.0, coverage_k=2),
}


def _random_episode(env, rng):
    """Play random actions, yielding every outcome with the state it started from."""
    state = env.reset()
    while not env.is_terminal(state):
        actions = env.actions(state)
        outcome = env.step(state, actions[rng.integers(len(actions))])
        yield state, outcome
        state = outcome.next_state
        if outcome.terminal:
            break


@pytest.mark.parametrize("variant", list(Variant))
@pytest.mark.parametrize("seed", range(8))
def test_random_episodes_agree_with_replay(variant, seed):
    params = GenParams.for_variant(variant, **_EPISODE_PARAMS[variant])
    instance = generate_instance(variant, 7, params, seed=seed)
    env = make_env(instance)
    rng = np.random.default_rng(seed)
    start = state = env.reset()
    total = 0.0
    for before, outcome in _random_episode(env, rng):
        state = outcome.next_state
        total += outcome.reward
        if outcome.rejected:
            assert state.order == before.order
        assert state.feasible
        assert constraint_violations(state, require_coverage=False) == []

        replayed = env.replay(state.order)
        assert replayed.feasible
        assert state.clock == pytest.approx(replayed.clock)
        assert state.arrival_times == pytest.approx(replayed.arrival_times)
        assert state.travel_distance == pytest.approx(replayed.travel_distance)
        assert state.total_energy == pytest.approx(replayed.total_energy)
        if variant is Variant.P3_KCOVERAGE:
            assert state.coverage_table.table == replayed.coverage_table.table
            assert state.coverage_table.charged == replayed.coverage_table.charged

    assert total == pytest.approx(env.reward_objective(state) - env.reward_objective(start))
    if variant is Variant.P1_MOBILE_PATH:
        assert state.finish_time <= instance.horizon_end + 1e-6
    elif variant is Variant.P2_FULLY_CHARGING:
        assert state.total_energy <= instance.charger.energy_capacity + 1e-6
    else:
        for v, arrival in zip(state.order, state.arrival_times):
            assert arrival <= instance.t0 + instance.node(v).deadline + 1e-6
