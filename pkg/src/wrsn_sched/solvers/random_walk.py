from typing import Optional

import numpy as np

from wrsn_sched.config import SchedConfig
from wrsn_sched.envs import ScheduleState, make_env
from wrsn_sched.instances import ProblemInstance
from wrsn_sched.solver import Solver
from wrsn_sched.solvers.common import better, coverage_done, feasible_appends


class RandomSolver(Solver):
    """Uniformly random feasible successor at every step, best of several restarts."""

    def __init__(self, config: Optional[SchedConfig] = None, seed: Optional[int] = None, restarts: Optional[int] = None):
        super().__init__(config)
        self.seed = self._config.seed if seed is None else seed
        self.restarts = self._config.restarts if restarts is None else restarts

    @property
    def name(self) -> str:
        return "random"

    def solve(self, instance: ProblemInstance) -> ScheduleState:
        self.check(instance)
        env = make_env(instance, coverage_cell=self._config.coverage_cell)
        rng = np.random.default_rng(self.seed)
        best: Optional[ScheduleState] = None
        for _ in range(max(1, self.restarts)):
            state = env.reset()
            while not coverage_done(env, state):
                options = feasible_appends(env, state)
                if not options:
                    break
                state = options[int(rng.integers(len(options)))][1]
            if better(env, state, best):
                best = state
        self.log.debug(f"best of {self.restarts} random tours: {best.order if best else ()}")
        return best if best is not None else env.reset()
