"""Ant colony system for the k-coverage charging tour."""
import math
from typing import Dict, FrozenSet, List, Optional, Tuple

import attr
import numpy as np

from wrsn_sched.config import SchedConfig
from wrsn_sched.envs import ChargingEnv, ScheduleState, make_env
from wrsn_sched.errors import ConfigError, InfeasibleScheduleError
from wrsn_sched.instances import START_VERTEX, ProblemInstance, Variant
from wrsn_sched.solver import Solver
from wrsn_sched.solvers.common import coverage_done, feasible_appends
from wrsn_sched.solvers.greedy import GreedySolver

Edge = Tuple[int, int]


@attr.s
class AcsParams:
    agents = attr.ib(default=20, type=int)
    iterations = attr.ib(default=200, type=int)
    theta_global = attr.ib(default=0.1, type=float)
    theta_local = attr.ib(default=0.1, type=float)
    tau0 = attr.ib(default=None, type=Optional[float])
    a = attr.ib(default=1.0, type=float)
    b = attr.ib(default=2.0, type=float)
    q0 = attr.ib(default=0.9, type=float)
    seed = attr.ib(default=0, type=int)

    def validate(self) -> None:
        if self.agents < 1 or self.iterations < 1:
            raise ConfigError("ACS needs at least one agent and one iteration")
        for name in ("theta_global", "theta_local"):
            if not 0 < getattr(self, name) < 1:
                raise ConfigError(f"{name} must lie in (0, 1)")
        if not 0 <= self.q0 <= 1:
            raise ConfigError("q0 must lie in [0, 1]")
        if self.tau0 is not None and self.tau0 <= 0:
            raise ConfigError("tau0 must be positive")

    @classmethod
    def from_config(cls, config: SchedConfig) -> "AcsParams":
        return cls(
            agents=config.acs_agents,
            iterations=config.acs_iterations,
            theta_global=config.acs_theta_global,
            theta_local=config.acs_theta_local,
            a=config.acs_a,
            b=config.acs_b,
            q0=config.acs_q0,
            seed=config.seed,
        )


def tour_edges(order: Tuple[int, ...]) -> FrozenSet[Edge]:
    """Edges of the closed tour v0 -> order -> v0."""
    if not order:
        return frozenset()
    path = (START_VERTEX,) + tuple(order) + (START_VERTEX,)
    return frozenset(zip(path, path[1:]))


def pheromone_delta(edge: Edge, best_edges: FrozenSet[Edge], best_length: float) -> float:
    """1/L* on the edges of the iteration-best tour, 0 elsewhere."""
    if edge in best_edges and best_length > 0:
        return 1.0 / best_length
    return 0.0


def global_pheromone_update(tau_prev: float, delta: float, theta: float) -> float:
    return (1.0 - theta) * tau_prev + theta * delta


def local_pheromone_update(tau: float, tau0: float, theta_local: float) -> float:
    return (1.0 - theta_local) * tau + theta_local * tau0


class AcsSolver(Solver):
    variants = (Variant.P3_KCOVERAGE,)

    def __init__(self, config: Optional[SchedConfig] = None, params: Optional[AcsParams] = None):
        super().__init__(config)
        self.params = params or AcsParams.from_config(self._config)
        self.params.validate()
        self.history: List[float] = []

    @property
    def name(self) -> str:
        return "acs"

    def _initial_tau(self, instance: ProblemInstance) -> float:
        if self.params.tau0 is not None:
            return self.params.tau0
        greedy = GreedySolver(self._config).solve(instance)
        length = greedy.travel_distance or instance.area.diameter
        return 1.0 / (max(1, len(instance.requester_ids())) * length)

    def _construct(
        self, env: ChargingEnv, tau: np.ndarray, index: Dict[int, int], tau0: float, rng: np.random.Generator
    ) -> Optional[ScheduleState]:
        """One agent's tour; None when it gets stuck before coverage is restored."""
        params = self.params
        state = env.reset()
        while not coverage_done(env, state):
            options = feasible_appends(env, state)
            if not options:
                return None
            row = index[state.head]
            scores = np.array(
                [tau[row, index[v]] ** params.a * (1.0 / max(option.legs[-1], 1e-9)) ** params.b for v, option in options]
            )
            if rng.random() < params.q0:
                pick = int(np.argmax(scores))
            else:
                pick = int(rng.choice(len(options), p=scores / scores.sum()))
            vertex, state = options[pick]
            col = index[vertex]
            tau[row, col] = local_pheromone_update(tau[row, col], tau0, params.theta_local)
        return state

    def solve(self, instance: ProblemInstance) -> ScheduleState:
        self.check(instance)
        params = self.params
        env = make_env(instance, coverage_cell=self._config.coverage_cell)
        rng = np.random.default_rng(params.seed)
        tau0 = self._initial_tau(instance)
        vertices = (START_VERTEX,) + instance.requester_ids()
        index = {v: i for i, v in enumerate(vertices)}
        tau = np.full((len(vertices), len(vertices)), tau0)
        best: Optional[ScheduleState] = None
        self.history = []

        for iteration in range(params.iterations):
            iteration_best: Optional[ScheduleState] = None
            for _ in range(params.agents):
                tour = self._construct(env, tau, index, tau0, rng)
                if tour is not None and (iteration_best is None or tour.travel_distance < iteration_best.travel_distance):
                    iteration_best = tour
            if iteration_best is not None:
                length = iteration_best.travel_distance
                best_edges = tour_edges(iteration_best.order)
                delta = np.zeros_like(tau)
                for u, v in best_edges:
                    delta[index[u], index[v]] = pheromone_delta((u, v), best_edges, length)
                tau = global_pheromone_update(tau, delta, params.theta_global)
                if best is None or length < best.travel_distance:
                    best = iteration_best
                    self.log.debug(f"iteration {iteration}: incumbent {length:.2f} m, order {best.order}")
            self.history.append(best.travel_distance if best is not None else math.inf)

        if best is None:
            raise InfeasibleScheduleError(f"no ant restored k-coverage in {params.iterations} iterations")
        self.log.info(f"ACS best tour {best.travel_distance:.2f} m over {len(best.order)} nodes")
        return best
