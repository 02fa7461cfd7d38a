from wrsn_sched.envs import ScheduleState, make_env
from wrsn_sched.instances import ProblemInstance
from wrsn_sched.solver import Solver
from wrsn_sched.solvers.common import coverage_done, feasible_appends


class GreedySolver(Solver):
    """Always moves to the nearest node that can still be charged."""

    @property
    def name(self) -> str:
        return "greedy"

    def solve(self, instance: ProblemInstance) -> ScheduleState:
        self.check(instance)
        env = make_env(instance, coverage_cell=self._config.coverage_cell)
        state = env.reset()
        while not coverage_done(env, state):
            options = feasible_appends(env, state)
            if not options:
                break
            # nearest by the leg just travelled, ties to the lowest id
            vertex, state = min(options, key=lambda option: (option[1].legs[-1], option[0]))
            self.log.debug(f"greedy picks {vertex} at {state.legs[-1]:.2f} m")
        return state
