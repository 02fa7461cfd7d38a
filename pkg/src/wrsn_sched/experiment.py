"""Parameter sweeps: generate, train, solve and aggregate into CSV tables."""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import attr
import numpy as np

from wrsn_sched.config import SchedConfig
from wrsn_sched.dqn import DqnTrainer, TrainConfig
from wrsn_sched.embed import EmbeddingParams
from wrsn_sched.errors import ConfigError, TrainingError, WrsnError
from wrsn_sched.formaters.checkpoint import CheckpointFormater
from wrsn_sched.formaters.csv import SweepRunsCsvFormater, SweepSummaryCsvFormater, SweepTimingCsvFormater
from wrsn_sched.instances import ProblemInstance, Variant, generate_instance
from wrsn_sched.scheduler import ChargingScheduler
from wrsn_sched.solver import SolverResult

log = logging.getLogger(__name__)

TRAINING_SEED_OFFSET = 10000

# axis name -> (config field, cast, variants it applies to)
AXES: Dict[str, Tuple[str, Any, Tuple[Variant, ...]]] = {
    "n": ("n", int, tuple(Variant)),
    "dt": ("dt", float, tuple(Variant)),
    "ie": ("ie", float, (Variant.P2_FULLY_CHARGING,)),
    "k": ("k", int, (Variant.P3_KCOVERAGE,)),
    "alpha": ("alpha", float, tuple(Variant)),
    "timespan": ("timespan", float, (Variant.P1_MOBILE_PATH,)),
}


@attr.s(frozen=True)
class ExperimentSpec:
    variant = attr.ib(type=Variant, converter=Variant)
    axis = attr.ib(type=str)
    values = attr.ib(type=Tuple[float, ...], converter=tuple)
    solvers = attr.ib(type=Tuple[str, ...], converter=tuple)
    repetitions = attr.ib(default=3, type=int)
    seed = attr.ib(default=0, type=int)
    out = attr.ib(default=None, type=Optional[Path])

    @classmethod
    def from_config(cls, config: SchedConfig) -> "ExperimentSpec":
        return cls(
            variant=config.variant_enum,
            axis=config.axis,
            values=config.values,
            solvers=config.solvers,
            repetitions=config.repetitions,
            seed=config.seed,
            out=Path(config.out) if config.out else None,
        )

    def validate(self, scheduler: Optional[ChargingScheduler] = None) -> None:
        if not self.solvers:
            raise ConfigError("a sweep needs at least one solver")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if self.axis not in AXES:
            raise ConfigError(f"unknown sweep axis {self.axis!r}, valids: {sorted(AXES)}")
        _, cast, variants = AXES[self.axis]
        if self.variant not in variants:
            raise ConfigError(f"axis {self.axis} does not apply to {self.variant.value} instances")
        if not self.values:
            raise ConfigError(f"no values given for axis {self.axis}")
        for value in self.values:
            self._check_value(value, cast)
        scheduler = scheduler or ChargingScheduler()
        for solver in scheduler.resolve(self.solvers):
            if self.variant not in solver.variants:
                raise ConfigError(f"solver {solver.name} can not schedule {self.variant.value} instances")

    def _check_value(self, value: float, cast: Any) -> None:
        if cast is int and float(value) != int(value):
            raise ConfigError(f"axis {self.axis} takes integers, got {value}")
        if self.axis == "alpha":
            if not 0 < value <= 1:
                raise ConfigError(f"alpha {value} outside (0, 1]")
        elif value <= 0:
            raise ConfigError(f"axis {self.axis} needs positive values, got {value}")

    def axis_value(self, value: float) -> Union[int, float]:
        return AXES[self.axis][1](value)

    def config_for(self, base: SchedConfig, value: float) -> SchedConfig:
        field = AXES[self.axis][0]
        return attr.evolve(base, variant=self.variant.value, **{field: self.axis_value(value)})

    def instance_seed(self, repetition: int) -> int:
        return self.seed + repetition


@attr.s(frozen=True)
class SweepRun:
    variant = attr.ib(type=str)
    axis = attr.ib(type=str)
    value = attr.ib(type=Union[int, float])
    repetition = attr.ib(type=int)
    seed = attr.ib(type=int)
    solver = attr.ib(type=str)
    feasible = attr.ib(type=bool)
    objective = attr.ib(type=float)
    distance_m = attr.ib(type=float)
    energy_j = attr.ib(type=float)
    status = attr.ib(type=str)


@attr.s(frozen=True)
class SweepTiming:
    axis = attr.ib(type=str)
    value = attr.ib(type=Union[int, float])
    repetition = attr.ib(type=int)
    solver = attr.ib(type=str)
    wall_ms = attr.ib(type=float)


@attr.s(frozen=True)
class SweepSummary:
    variant = attr.ib(type=str)
    axis = attr.ib(type=str)
    value = attr.ib(type=Union[int, float])
    solver = attr.ib(type=str)
    runs = attr.ib(type=int)
    feasible_rate = attr.ib(type=float)
    objective_mean = attr.ib(type=float)
    objective_std = attr.ib(type=float)
    distance_mean = attr.ib(type=float)
    distance_std = attr.ib(type=float)
    energy_mean = attr.ib(type=float)
    energy_std = attr.ib(type=float)


@attr.s
class ExperimentResult:
    runs = attr.ib(factory=list, type=List[SweepRun])
    timing = attr.ib(factory=list, type=List[SweepTiming])
    summary = attr.ib(factory=list, type=List[SweepSummary])
    files = attr.ib(factory=dict, type=Dict[str, Path])


def _mean_std(values: Sequence[float]) -> Tuple[float, float]:
    finite = np.array([v for v in values if math.isfinite(v)], dtype=float)
    if finite.size == 0:
        return math.nan, math.nan
    return float(finite.mean()), float(finite.std())


def summarize(spec: ExperimentSpec, runs: Sequence[SweepRun]) -> List[SweepSummary]:
    """One row per (axis value, solver), in sweep order."""
    groups: Dict[Tuple[Union[int, float], str], List[SweepRun]] = {}
    for run in runs:
        groups.setdefault((run.value, run.solver), []).append(run)
    summary = []
    for (value, solver), group in groups.items():
        objective = _mean_std([run.objective for run in group])
        distance = _mean_std([run.distance_m for run in group])
        energy = _mean_std([run.energy_j for run in group])
        summary.append(
            SweepSummary(
                variant=spec.variant.value,
                axis=spec.axis,
                value=value,
                solver=solver,
                runs=len(group),
                feasible_rate=float(np.mean([run.feasible for run in group])),
                objective_mean=objective[0],
                objective_std=objective[1],
                distance_mean=distance[0],
                distance_std=distance[1],
                energy_mean=energy[0],
                energy_std=energy[1],
            )
        )
    return summary


def train_for_cell(spec: ExperimentSpec, config: SchedConfig) -> Optional[EmbeddingParams]:
    """Train the Q-network on instances disjoint from the evaluation seeds."""
    seed = spec.seed + TRAINING_SEED_OFFSET
    instances = [
        generate_instance(spec.variant, config.n, config.gen_params(), seed=seed + index)
        for index in range(max(1, config.train_instances))
    ]
    try:
        return DqnTrainer(TrainConfig.from_config(config, seed=seed)).train(instances).params
    except TrainingError as e:
        log.warning(f"training failed for {spec.axis}={config_value(spec, config)}: {e}")
        return None


def config_value(spec: ExperimentSpec, config: SchedConfig) -> Any:
    return getattr(config, AXES[spec.axis][0])


def _run_cell(
    spec: ExperimentSpec, config: SchedConfig, params: Optional[EmbeddingParams], value: Union[int, float], repetition: int
) -> List[Tuple[SweepRun, SweepTiming]]:
    seed = spec.instance_seed(repetition)
    config = attr.evolve(config, seed=seed)
    results: List[SolverResult]
    try:
        instance: Optional[ProblemInstance] = generate_instance(spec.variant, config.n, config.gen_params(), seed=seed)
    except WrsnError as e:
        log.warning(f"{spec.axis}={value} repetition {repetition}: instance generation failed: {e}")
        instance = None
        results = [SolverResult.failed(name, e) for name in spec.solvers]
    if instance is not None:
        # one scheduler per cell, solvers keep per-run state
        scheduler = ChargingScheduler(config, params)
        results = []
        for name in spec.solvers:
            try:
                results.append(scheduler.solve(instance, name))
            except WrsnError as e:
                results.append(SolverResult.failed(name, e))
    log.info(f"sweep cell {spec.axis}={value} repetition {repetition} done")
    return [
        (
            SweepRun(
                variant=spec.variant.value,
                axis=spec.axis,
                value=value,
                repetition=repetition,
                seed=seed,
                solver=result.solver,
                feasible=result.feasible,
                objective=result.objective,
                distance_m=result.distance_m,
                energy_j=result.energy_j,
                status=result.status,
            ),
            SweepTiming(axis=spec.axis, value=value, repetition=repetition, solver=result.solver, wall_ms=result.wall_ms),
        )
        for result in results
    ]


def run_experiment(spec: ExperimentSpec, config: Optional[SchedConfig] = None) -> ExperimentResult:
    config = config or SchedConfig()
    spec.validate(ChargingScheduler(config))
    checkpoint = None
    if "dqn" in spec.solvers and config.checkpoint:
        checkpoint = CheckpointFormater(config).read(Path(config.checkpoint))

    cells = []
    for raw in spec.values:
        value = spec.axis_value(raw)
        cell_config = spec.config_for(config, raw)
        params = checkpoint
        if "dqn" in spec.solvers and params is None:
            params = train_for_cell(spec, cell_config)
        cells += [(cell_config, params, value, repetition) for repetition in range(spec.repetitions)]

    log.info(
        f"Sweeping {spec.variant.value} over {spec.axis}={list(spec.values)} with {list(spec.solvers)}, "
        f"{len(cells)} cells on {config.threads} threads"
    )
    with ThreadPoolExecutor(max_workers=max(1, min(config.threads, len(cells)))) as pool:
        outcomes = list(pool.map(lambda cell: _run_cell(spec, *cell), cells))

    result = ExperimentResult()
    for rows in outcomes:
        for run, timing in rows:
            result.runs.append(run)
            result.timing.append(timing)
    result.summary = summarize(spec, result.runs)

    if spec.out is not None:
        out = Path(spec.out)
        result.files = {
            "runs": SweepRunsCsvFormater(config).write(out / "runs.csv", result.runs),
            "summary": SweepSummaryCsvFormater(config).write(out / "summary.csv", result.summary),
            "timing": SweepTimingCsvFormater(config).write(out / "timing.csv", result.timing),
        }
    return result
