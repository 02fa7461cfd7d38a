import logging
import sys
import traceback
from argparse import ArgumentParser, Namespace
from pathlib import Path
from typing import List, Optional, Sequence

import wrsn_sched
from wrsn_sched.config import SchedConfig, load_config
from wrsn_sched.dqn import DqnTrainer, TrainConfig
from wrsn_sched.envs import schedule_trace
from wrsn_sched.errors import (
    CheckpointError,
    ConfigError,
    GeometryError,
    InfeasibleScheduleError,
    InstanceError,
    SchedulerError,
)
from wrsn_sched.experiment import TRAINING_SEED_OFFSET, ExperimentSpec, run_experiment
from wrsn_sched.formaters.checkpoint import CheckpointFormater
from wrsn_sched.formaters.csv import (
    CoverageCsvFormater,
    DagEdgesCsvFormater,
    EpisodeTraceCsvFormater,
    GraphEdgesCsvFormater,
    SolverResultCsvFormater,
    TrainingLogCsvFormater,
)
from wrsn_sched.formaters.instance import InstanceFormater
from wrsn_sched.geometry import build_subregions
from wrsn_sched.graph import build_graph, build_time_expanded_dag, dag_edge_rows, edge_rows
from wrsn_sched.instances import ProblemInstance, Variant, generate_instance
from wrsn_sched.scheduler import ChargingScheduler

log = logging.getLogger(__name__)

COMMANDS = ("gen", "train", "solve", "sweep", "dump-graph", "dump-coverage")
EXIT_OK = 0
EXIT_INVALID = 1
EXIT_FAILED = 2

# flag name -> config key, all default to None so the config file is only overridden when given
OVERRIDES = (
    "variant",
    "n",
    "seed",
    "k",
    "alpha",
    "ie",
    "timespan",
    "dt",
    "solvers",
    "episodes",
    "out",
    "checkpoint",
    "require_feasible",
    "axis",
    "values",
    "repetitions",
)


def _parse_args(argv: Optional[Sequence[str]] = None) -> Namespace:
    parser = ArgumentParser(description="Mobile charger scheduling for wireless rechargeable sensor networks")
    parser.add_argument("command", choices=COMMANDS, help="Action to run")
    parser.add_argument("--config", "-c", help="Config file of 'key = value' lines", default=None)
    parser.add_argument("--instance", "-i", help="Instance file, generated from the flags when absent", default=None)
    parser.add_argument("--variant", choices=[variant.value for variant in Variant], default=None)
    parser.add_argument("--n", type=int, help="Number of sensor nodes", default=None)
    parser.add_argument("--seed", type=int, help="Random seed", default=None)
    parser.add_argument("--k", type=int, help="Coverage requirement (p3)", default=None)
    parser.add_argument("--alpha", type=float, help="Charging request threshold, fraction of capacity", default=None)
    parser.add_argument("--ie", type=float, help="Charger energy capacity in joules (p2)", default=None)
    parser.add_argument("--timespan", type=float, help="Charging timespan in seconds (p1)", default=None)
    parser.add_argument("--dt", type=float, help="Time step in seconds", default=None)
    parser.add_argument("--solvers", help="Comma separated solver names", default=None)
    parser.add_argument("--episodes", type=int, help="Training episodes", default=None)
    parser.add_argument("--out", "-o", help="Output directory or file", default=None)
    parser.add_argument("--checkpoint", help="Parameter checkpoint file", default=None)
    parser.add_argument("--axis", help="Sweep axis: n, dt, ie, k, alpha or timespan", default=None)
    parser.add_argument("--values", help="Comma separated sweep axis values", default=None)
    parser.add_argument("--repetitions", type=int, help="Instances per sweep axis value", default=None)
    parser.add_argument(
        "--require-feasible",
        default=None,
        action="store_true",
        help="Exit with status 2 when a solver returns no feasible schedule",
    )
    parser.add_argument("--debug", "-d", default=False, action="store_true", help="Enable debug logging")

    args = parser.parse_args(argv)
    args.log_level = logging.DEBUG if args.debug else logging.INFO
    return args


def _setup_logging(level: int = logging.INFO, filename: Optional[str] = None) -> None:
    """Configure standard logging."""
    logging.basicConfig(
        format="%(asctime)s %(filename)s:%(lineno)s %(levelname)s: %(message)s", level=level, filename=filename
    )


def _output(config: SchedConfig, default_name: str) -> Path:
    """`--out` names a file when it has a suffix, a directory otherwise."""
    out = Path(config.out)
    return out if out.suffix else out / default_name


def _instance(args: Namespace, config: SchedConfig) -> ProblemInstance:
    if args.instance:
        return InstanceFormater(config).read(Path(args.instance))
    instance = generate_instance(config.variant_enum, config.n, config.gen_params(), seed=config.seed)
    log.info(f"Generated {instance.variant.value} instance, n={instance.n}, seed={config.seed}")
    return instance


def gen(args: Namespace, config: SchedConfig) -> int:
    instance = _instance(args, config)
    InstanceFormater(config).write(_output(config, f"{config.variant}_n{config.n}_s{config.seed}.wrsn"), instance)
    return EXIT_OK


def train(args: Namespace, config: SchedConfig) -> int:
    seed = config.seed + TRAINING_SEED_OFFSET
    instances = [
        generate_instance(config.variant_enum, config.n, config.gen_params(), seed=seed + index)
        for index in range(max(1, config.train_instances))
    ]
    result = DqnTrainer(TrainConfig.from_config(config, seed=seed)).train(instances)
    checkpoint = Path(config.checkpoint) if config.checkpoint else _output(config, "params.params")
    CheckpointFormater(config).write(checkpoint, result.params)
    TrainingLogCsvFormater(config).write(Path(config.out) / "training.csv", result.log)
    return EXIT_OK


def solve(args: Namespace, config: SchedConfig) -> int:
    instance = _instance(args, config)
    scheduler = ChargingScheduler(config)
    results = scheduler.compare(instance)
    out = Path(config.out)
    SolverResultCsvFormater(config).write(out / "results.csv", results)
    kwargs = {"reward_mode": config.p2_reward} if instance.variant is Variant.P2_FULLY_CHARGING else {}
    for result in results:
        if result.state is not None:
            EpisodeTraceCsvFormater(config).write(out / f"trace_{result.solver}.csv", schedule_trace(result.state, **kwargs))
    for result in results:
        print(f"{result.solver}: objective={result.objective} feasible={result.feasible} status={result.status}")
    infeasible = [result.solver for result in results if not result.feasible]
    if config.require_feasible and infeasible:
        raise InfeasibleScheduleError(f"no feasible schedule from {', '.join(infeasible)}")
    return EXIT_OK


def sweep(args: Namespace, config: SchedConfig) -> int:
    result = run_experiment(ExperimentSpec.from_config(config), config)
    for name, path in result.files.items():
        log.info(f"{name} written to {path}")
    return EXIT_OK


def dump_graph(args: Namespace, config: SchedConfig) -> int:
    instance = _instance(args, config)
    out = Path(config.out)
    GraphEdgesCsvFormater(config).write(out / "edges.csv", edge_rows(build_graph(instance, config.dt)))
    if instance.variant is Variant.P3_KCOVERAGE:
        DagEdgesCsvFormater(config).write(out / "dag.csv", dag_edge_rows(build_time_expanded_dag(instance, config.dt)))
    return EXIT_OK


def dump_coverage(args: Namespace, config: SchedConfig) -> int:
    instance = _instance(args, config)
    table = build_subregions(instance, config.coverage_cell)
    CoverageCsvFormater(config).write(_output(config, "coverage.csv"), table)
    return EXIT_OK


HANDLERS = {
    "gen": gen,
    "train": train,
    "solve": solve,
    "sweep": sweep,
    "dump-graph": dump_graph,
    "dump-coverage": dump_coverage,
}


def run(args: Namespace) -> int:
    overrides = {key: getattr(args, key) for key in OVERRIDES}
    config = load_config(args.config, overrides=overrides)
    return HANDLERS[args.command](args, config)


def main(argv: Optional[List[str]] = None) -> None:
    """Main entry point."""
    print(f"wrsn_sched version {wrsn_sched.__version__}", file=sys.stderr)

    args = _parse_args(argv)
    _setup_logging(level=args.log_level)

    try:
        sys.exit(run(args))
    except InfeasibleScheduleError as e:
        print(f"Infeasible: {e}")
        sys.exit(EXIT_FAILED)
    except (ConfigError, InstanceError, SchedulerError, CheckpointError, GeometryError) as e:
        print(f"Invalid input: {e}")
        if args.debug:
            log.exception(e)
        sys.exit(EXIT_INVALID)
    except Exception as e:
        print(f"Unexpected error: {e}")
        if args.debug:
            traceback.print_exc()
            log.exception(e)
        sys.exit(EXIT_FAILED)
