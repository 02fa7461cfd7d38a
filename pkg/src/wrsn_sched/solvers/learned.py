from pathlib import Path
from typing import Optional

from wrsn_sched.config import SchedConfig
from wrsn_sched.dqn import greedy_rollout
from wrsn_sched.embed import EmbeddingParams
from wrsn_sched.envs import ScheduleState
from wrsn_sched.errors import SolverError
from wrsn_sched.formaters.checkpoint import CheckpointFormater
from wrsn_sched.instances import ProblemInstance, Variant
from wrsn_sched.solver import Solver


class DqnSolver(Solver):
    """Greedy rollout of a trained Q-network."""

    def __init__(self, config: Optional[SchedConfig] = None, params: Optional[EmbeddingParams] = None):
        super().__init__(config)
        self.params = params

    @property
    def name(self) -> str:
        return "dqn"

    def _params(self) -> EmbeddingParams:
        if self.params is None:
            if not self._config.checkpoint:
                raise SolverError("the dqn solver needs trained parameters or a checkpoint")
            self.params = CheckpointFormater(self._config).read(Path(self._config.checkpoint))
        return self.params

    def solve(self, instance: ProblemInstance) -> ScheduleState:
        self.check(instance)
        kwargs = {"coverage_cell": self._config.coverage_cell}
        if instance.variant is Variant.P2_FULLY_CHARGING:
            kwargs["reward_mode"] = self._config.p2_reward
        dt = self._config.dt if instance.variant is Variant.P1_MOBILE_PATH else None
        return greedy_rollout(instance, self._params(), dt, **kwargs)
