import math

import attr
import pytest

from wrsn_sched.errors import ConfigError, SchedulerError
from wrsn_sched.experiment import ExperimentSpec, _mean_std, run_experiment, summarize
from wrsn_sched.instances import Variant


def _spec(**overrides):
    values = dict(
        variant=Variant.P2_FULLY_CHARGING, axis="n", values=[3, 4], solvers=["greedy", "mst"], repetitions=2, seed=1
    )
    values.update(overrides)
    return ExperimentSpec(**values)


@pytest.mark.parametrize(
    "overrides",
    [
        dict(solvers=[]),
        dict(axis="speed"),
        dict(axis="k"),
        dict(values=[]),
        dict(values=[3.5]),
        dict(axis="alpha", values=[1.5]),
        dict(solvers=["dp"]),
        dict(repetitions=0),
    ],
)
def test_spec_validation(overrides):
    with pytest.raises(ConfigError):
        _spec(**overrides).validate()


def test_spec_unknown_solver():
    with pytest.raises(SchedulerError):
        _spec(solvers=["simplex"]).validate()


def test_config_for_cell(config):
    spec = _spec(variant=Variant.P3_KCOVERAGE, axis="k", values=[1, 2], solvers=["dp"])
    cell = spec.config_for(config, 2.0)
    assert cell.k == 2
    assert isinstance(cell.k, int)
    assert cell.variant == "p3"
    assert spec.instance_seed(3) == 4


def test_mean_std_ignores_missing_values():
    assert _mean_std([1.0, 3.0, math.nan]) == (2.0, 1.0)
    mean, std = _mean_std([math.nan])
    assert math.isnan(mean) and math.isnan(std)


def test_sweep_tables(tmp_path, config):
    spec = _spec(out=tmp_path)
    result = run_experiment(spec, config)
    assert len(result.runs) == 2 * 2 * 2
    assert len(result.timing) == len(result.runs)
    assert [(row.value, row.solver) for row in result.summary] == [(3, "greedy"), (3, "mst"), (4, "greedy"), (4, "mst")]
    assert all(row.runs == 2 for row in result.summary)
    assert all(0.0 <= row.feasible_rate <= 1.0 for row in result.summary)
    assert sorted(result.files) == ["runs", "summary", "timing"]
    header = (tmp_path / "runs.csv").read_text().splitlines()[0]
    assert "wall_ms" not in header
    assert "wall_ms" in (tmp_path / "timing.csv").read_text().splitlines()[0]
    assert summarize(spec, result.runs) == result.summary


def test_sweep_is_reproducible(tmp_path, config):
    first = run_experiment(_spec(out=tmp_path / "first"), config)
    second = run_experiment(_spec(out=tmp_path / "second"), attr.evolve(config, threads=3))
    for name in ("runs", "summary"):
        assert first.files[name].read_bytes() == second.files[name].read_bytes()


def test_sweep_trains_the_learned_solver(config):
    spec = _spec(values=[3], solvers=["dqn", "greedy"], repetitions=1)
    result = run_experiment(spec, config)
    assert [run.solver for run in result.runs] == ["dqn", "greedy"]
    assert result.runs[0].status == "ok"
    assert result.files == {}


def test_sweep_records_failed_solvers(config):
    spec = ExperimentSpec(
        variant=Variant.P3_KCOVERAGE, axis="n", values=[3], solvers=["dp"], repetitions=1, seed=0
    )
    cell_config = attr.evolve(config, side=100.0, radius=20.0, k=1)
    result = run_experiment(spec, cell_config)
    assert len(result.runs) == 1
    assert result.runs[0].status.startswith(("infeasible", "error"))
    assert not result.runs[0].feasible
