import logging
import math
from abc import ABC, abstractmethod
from typing import Optional, Tuple

import attr

from wrsn_sched.config import SchedConfig
from wrsn_sched.envs import ScheduleState, make_env
from wrsn_sched.errors import InfeasibleScheduleError, SolverError
from wrsn_sched.instances import ProblemInstance, Variant


@attr.s
class SolverResult:
    """Uniform record of one solver run."""

    solver = attr.ib(type=str)
    state = attr.ib(default=None, type=Optional[ScheduleState], repr=False)
    feasible = attr.ib(default=False, type=bool)
    objective = attr.ib(default=math.nan, type=float)
    distance_m = attr.ib(default=math.nan, type=float)
    energy_j = attr.ib(default=math.nan, type=float)
    wall_ms = attr.ib(default=0.0, type=float)
    status = attr.ib(default="ok", type=str)

    @classmethod
    def from_state(cls, solver: str, state: ScheduleState, wall_ms: float = 0.0):
        env = make_env(state.instance, state.dt)
        feasible = env.is_solution(state)
        return cls(
            solver=solver,
            state=state,
            feasible=feasible,
            objective=env.objective(state),
            distance_m=state.travel_distance,
            energy_j=state.total_energy,
            wall_ms=wall_ms,
            status="ok" if feasible else "infeasible",
        )

    @classmethod
    def failed(cls, solver: str, error: Exception, wall_ms: float = 0.0):
        status = "infeasible" if isinstance(error, InfeasibleScheduleError) else "error"
        return cls(solver=solver, wall_ms=wall_ms, status=f"{status}: {error}")


class Solver(ABC):
    """A charging scheduler producing one ScheduleState per instance."""

    variants: Tuple[Variant, ...] = tuple(Variant)

    @property
    @abstractmethod
    def name(self) -> str:
        ...

    def __init__(self, config: Optional[SchedConfig] = None):
        self._config = config or SchedConfig()
        self.log = logging.getLogger(self.__class__.__name__)

    def __repr__(self):
        return f"'{self.name}'"

    def supports(self, instance: ProblemInstance) -> bool:
        return instance.variant in self.variants

    def check(self, instance: ProblemInstance) -> None:
        if not self.supports(instance):
            supported = ", ".join(v.value for v in self.variants)
            raise SolverError(f"solver {self.name} handles {supported}, not {instance.variant.value}")

    @abstractmethod
    def solve(self, instance: ProblemInstance) -> ScheduleState:
        ...
