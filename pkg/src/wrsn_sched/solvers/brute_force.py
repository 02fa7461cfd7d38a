from typing import Optional

from wrsn_sched.config import SchedConfig
from wrsn_sched.envs import ChargingEnv, ScheduleState, make_env
from wrsn_sched.errors import InfeasibleScheduleError, InstanceTooLargeError
from wrsn_sched.instances import ProblemInstance, Variant
from wrsn_sched.solver import Solver
from wrsn_sched.solvers.common import better, coverage_done


class BruteForceSolver(Solver):
    """Depth-first enumeration of visit orders, pruned on feasibility.

    Infeasibility is monotone along an order (later visits only add time, travel and
    charge), so an infeasible prefix cuts its whole subtree. For k-coverage a prefix
    is also cut once its closed tour is not shorter than the incumbent.
    """

    def __init__(self, config: Optional[SchedConfig] = None, dt: Optional[float] = None, max_n: Optional[int] = None):
        super().__init__(config)
        self.dt = dt
        self.max_n = self._config.brute_max_n if max_n is None else max_n

    @property
    def name(self) -> str:
        return "brute"

    def solve(self, instance: ProblemInstance) -> ScheduleState:
        self.check(instance)
        requesters = instance.requester_ids()
        if len(requesters) > self.max_n:
            raise InstanceTooLargeError(
                f"{len(requesters)} requesters above the exhaustive search limit of {self.max_n}"
            )
        env = make_env(instance, self.dt, coverage_cell=self._config.coverage_cell)
        self._best: Optional[ScheduleState] = None
        self._expanded = 0
        self._search(env, env.reset(), instance.variant is Variant.P3_KCOVERAGE)
        self.log.debug(f"expanded {self._expanded} prefixes")
        if self._best is None:
            raise InfeasibleScheduleError("no visit order restores k-coverage within the deadlines")
        return env.replay(self._best.order)

    def _search(self, env: ChargingEnv, state: ScheduleState, kcoverage: bool) -> None:
        self._expanded += 1
        if kcoverage:
            if self._best is not None and state.travel_distance >= self._best.travel_distance:
                return
            if coverage_done(env, state):
                self._best = state
                return
        elif better(env, state, self._best):
            self._best = state
        for v in env.candidates(state):
            appended = env.append(state, v)
            if env.accept(appended):
                self._search(env, appended, kcoverage)
