import math

import pytest

from wrsn_sched.errors import SchedulerError
from wrsn_sched.scheduler import ChargingScheduler


def test_names(config):
    assert ChargingScheduler(config).names == ["dp", "dqn", "acs", "greedy", "random", "mst", "cmst", "brute"]


def test_unknown_solver(config, p2_line):
    scheduler = ChargingScheduler(config)
    with pytest.raises(SchedulerError, match="valids"):
        scheduler.solve(p2_line, "simplex")
    with pytest.raises(SchedulerError):
        scheduler.compare(p2_line, ["greedy", "simplex"])


def test_compare(config, p2_line):
    results = ChargingScheduler(config).compare(p2_line, ["greedy", "mst", "brute"])
    assert [result.solver for result in results] == ["greedy", "mst", "brute"]
    for result in results:
        assert result.feasible
        assert result.status == "ok"
        assert result.objective == 3.0
        assert result.distance_m == pytest.approx(600.0)
        assert result.wall_ms >= 0.0


def test_solver_errors_become_results(config, p2_line, make_p3):
    scheduler = ChargingScheduler(config)
    unsupported = scheduler.solve(p2_line, "dp")
    assert not unsupported.feasible
    assert unsupported.status.startswith("error")
    assert math.isnan(unsupported.objective)

    # node 2 can not be reached before its deadline, so k=2 is never restored
    unreachable = make_p3([(40.0, 50.0), (95.0, 95.0)], radius=150.0, residuals=[1000.0, 10.0], k=2)
    result = scheduler.solve(unreachable, "dp")
    assert result.status.startswith("infeasible")
    assert result.state is None


def test_partial_cover_is_reported_infeasible(config, make_p3):
    # node 2 can not be reached before its deadline
    instance = make_p3([(40.0, 50.0), (95.0, 95.0)], radius=150.0, residuals=[1000.0, 10.0], k=2)
    result = ChargingScheduler(config).solve(instance, "greedy")
    assert result.state.order == (1,)
    assert not result.feasible
    assert result.status == "infeasible"
