import logging
import time
from typing import Iterable, List, Optional, Sequence

from wrsn_sched.config import SchedConfig
from wrsn_sched.embed import EmbeddingParams
from wrsn_sched.errors import SchedulerError, SolverError
from wrsn_sched.instances import ProblemInstance
from wrsn_sched.solver import Solver, SolverResult
from wrsn_sched.solvers import (
    AcsSolver,
    BruteForceSolver,
    CmstSolver,
    DqnSolver,
    DynamicProgrammingSolver,
    GreedySolver,
    MstSolver,
    RandomSolver,
)


class ChargingScheduler:
    """Registry of the charging solvers, resolved by name."""

    def __init__(self, config: Optional[SchedConfig] = None, params: Optional[EmbeddingParams] = None):
        self._config = config or SchedConfig()
        self.log = logging.getLogger(self.__class__.__name__)
        self.solvers: List[Solver] = [
            DynamicProgrammingSolver(self._config),
            DqnSolver(self._config, params),
            AcsSolver(self._config),
            GreedySolver(self._config),
            RandomSolver(self._config),
            MstSolver(self._config),
            CmstSolver(self._config),
            BruteForceSolver(self._config),
        ]

    @property
    def names(self) -> List[str]:
        return [solver.name for solver in self.solvers]

    def _get_solver(self, name: str) -> Solver:
        for solver in self.solvers:
            if name == solver.name:
                return solver
        raise SchedulerError(f"No solver found for '{name}', valids: {self.solvers}")

    def resolve(self, names: Iterable[str]) -> List[Solver]:
        return [self._get_solver(name) for name in names]

    def solve(self, instance: ProblemInstance, name: str) -> SolverResult:
        """Run one solver, turning solver failures into a result record."""
        solver = self._get_solver(name)
        self.log.info(f"Solving {instance.variant.value} instance of {instance.n} nodes with {solver}")
        start = time.perf_counter()
        try:
            state = solver.solve(instance)
        except SolverError as e:
            wall_ms = (time.perf_counter() - start) * 1000.0
            self.log.info(f"{solver} failed after {wall_ms:.1f} ms: {e}")
            return SolverResult.failed(name, e, wall_ms)
        wall_ms = (time.perf_counter() - start) * 1000.0
        result = SolverResult.from_state(name, state, wall_ms)
        self.log.info(
            f"{solver} finished in {wall_ms:.1f} ms: objective {result.objective:.3f}, "
            f"{len(state.order)} visits, {'feasible' if result.feasible else 'infeasible'}"
        )
        return result

    def compare(self, instance: ProblemInstance, names: Optional[Sequence[str]] = None) -> List[SolverResult]:
        names = list(names or self._config.solvers)
        self.resolve(names)
        return [self.solve(instance, name) for name in names]
