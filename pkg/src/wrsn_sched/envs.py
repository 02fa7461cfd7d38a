"""Charging environments: schedule bookkeeping, insertion, rewards and stop functions."""
import logging
import math
from abc import ABC, abstractmethod
from typing import Callable, FrozenSet, List, Optional, Sequence, Tuple

import attr

from wrsn_sched import geometry
from wrsn_sched.errors import ScheduleError
from wrsn_sched.graph import DEFAULT_INTERCEPT_STEP, build_graph, distances, intercept, snap
from wrsn_sched.instances import START_VERTEX, Point, ProblemInstance, Variant

log = logging.getLogger(__name__)

INFEASIBLE = math.inf
_TOL = 1e-9

ChooseFn = Callable[["ScheduleState", Sequence[int]], Optional[int]]


def _close(value: float, limit: float) -> bool:
    return value <= limit + _TOL * max(1.0, abs(limit))


@attr.s(frozen=True)
class ScheduleState:
    """Ordered visits of the charger with the times and energies they imply.

    Visit i charges node order[i]: the charger arrives at arrival_times[i], stays for
    charge_durations[i] and has travelled legs[i] metres from the previous visit.
    An infeasible visit carries an infinite arrival time.
    """

    instance = attr.ib(type=ProblemInstance, eq=False, repr=False)
    order = attr.ib(factory=tuple, type=Tuple[int, ...], converter=tuple)
    arrival_times = attr.ib(factory=tuple, type=Tuple[float, ...], converter=tuple)
    charge_durations = attr.ib(factory=tuple, type=Tuple[float, ...], converter=tuple)
    charge_energies = attr.ib(factory=tuple, type=Tuple[float, ...], converter=tuple)
    positions = attr.ib(factory=tuple, type=Tuple[Point, ...], converter=tuple)
    legs = attr.ib(factory=tuple, type=Tuple[float, ...], converter=tuple)
    closing_distance = attr.ib(default=0.0, type=float)
    clock = attr.ib(default=0.0, type=float)
    feasible = attr.ib(default=True, type=bool)
    rejected = attr.ib(factory=frozenset, type=FrozenSet[int], converter=frozenset)
    coverage_table = attr.ib(default=None, type=Optional[geometry.SubregionTable])
    dt = attr.ib(default=None, type=Optional[float])

    @property
    def visited(self) -> Tuple[int, ...]:
        return (START_VERTEX,) + self.order

    @property
    def charged(self) -> FrozenSet[int]:
        return frozenset(self.order)

    @property
    def head(self) -> int:
        return self.order[-1] if self.order else START_VERTEX

    @property
    def head_position(self) -> Point:
        return self.positions[-1] if self.positions else self.instance.charger.depot

    @property
    def path_distance(self) -> float:
        return math.fsum(self.legs)

    @property
    def travel_distance(self) -> float:
        return self.path_distance + self.closing_distance

    @property
    def charge_energy(self) -> float:
        return math.fsum(self.charge_energies)

    @property
    def travel_energy(self) -> float:
        return self.travel_distance * self.instance.charger.travel_energy

    @property
    def total_energy(self) -> float:
        return self.charge_energy + self.travel_energy

    @property
    def finish_time(self) -> float:
        """Time the charger reaches its end point."""
        return self.clock + self.closing_distance / self.instance.charger.speed


@attr.s(frozen=True)
class StepOutcome:
    next_state = attr.ib(type=ScheduleState)
    reward = attr.ib(type=float)
    terminal = attr.ib(type=bool)
    rejected = attr.ib(default=False, type=bool)
    insert_pos = attr.ib(default=-1, type=int)


@attr.s(frozen=True)
class EpisodeStep:
    step = attr.ib(type=int)
    vertex = attr.ib(type=int)
    insert_pos = attr.ib(type=int)
    reward = attr.ib(type=float)
    clock = attr.ib(type=float)
    distance = attr.ib(type=float)
    energy = attr.ib(type=float)
    rejected = attr.ib(default=False, type=bool)


def initial_table(instance: ProblemInstance, cell: float = geometry.DEFAULT_CELL) -> geometry.SubregionTable:
    key = ("subregions", cell)
    if key not in instance._cache:
        instance._cache[key] = geometry.build_subregions(instance, cell)
    return instance._cache[key]


def _extend(
    instance: ProblemInstance, base: ScheduleState, keep: int, order: Sequence[int], dt: Optional[float]
) -> ScheduleState:
    """Keep the first `keep` visits of base and run the charging recurrence over the rest of order."""
    t0 = instance.t0
    charger = instance.charger
    target = instance.charge_target
    table = distances(instance)
    variant = instance.variant

    arrivals = list(base.arrival_times[:keep])
    durations = list(base.charge_durations[:keep])
    energies = list(base.charge_energies[:keep])
    positions = list(base.positions[:keep])
    legs = list(base.legs[:keep])
    if keep:
        clock = arrivals[-1] + durations[-1]
        where = positions[-1]
        prev = order[keep - 1]
    else:
        clock, where, prev = t0, charger.depot, START_VERTEX

    for v in order[keep:]:
        node = instance.node(v)
        point = node.position
        if variant is Variant.P1_MOBILE_PATH:
            hit = None
            if math.isfinite(clock):
                hit = intercept(instance, where, clock, node, dt or DEFAULT_INTERCEPT_STEP)
            if hit is None:
                arrival, leg = INFEASIBLE, INFEASIBLE
            else:
                arrival, point, leg = hit
        else:
            leg = table.between(prev, v)
            arrival = clock + leg / charger.speed
            if variant is Variant.P3_KCOVERAGE and node.deadline is not None and math.isfinite(arrival):
                if dt:
                    snapped = snap(t0, node.deadline, dt, arrival)
                    arrival = INFEASIBLE if snapped is None else snapped
                elif not _close(arrival, t0 + node.deadline):
                    arrival = INFEASIBLE

        if math.isfinite(arrival):
            residual = node.residual if variant is Variant.P2_FULLY_CHARGING else node.residual_at(arrival, t0)
            energy = max(0.0, target - residual)
        else:
            energy = 0.0
        arrivals.append(arrival)
        energies.append(energy)
        durations.append(energy / charger.transfer_rate)
        positions.append(point)
        legs.append(leg)
        clock = arrival + durations[-1]
        where, prev = point, v

    if not order:
        closing = 0.0
    elif variant is Variant.P1_MOBILE_PATH:
        end = charger.end_point
        closing = math.hypot(end[0] - where[0], end[1] - where[1]) if math.isfinite(clock) else INFEASIBLE
    else:
        closing = table.to_end(prev)
    return ScheduleState(
        instance=instance,
        order=tuple(order),
        arrival_times=arrivals,
        charge_durations=durations,
        charge_energies=energies,
        positions=positions,
        legs=legs,
        closing_distance=closing,
        clock=clock,
        feasible=all(math.isfinite(a) for a in arrivals),
        rejected=base.rejected,
        coverage_table=base.coverage_table,
        dt=dt,
    )


class ChargingEnv(ABC):
    """One scheduling problem seen as an episodic decision process."""

    def __init__(
        self,
        instance: ProblemInstance,
        dt: Optional[float] = None,
        coverage_cell: float = geometry.DEFAULT_CELL,
    ) -> None:
        self.log = logging.getLogger(self.__class__.__name__)
        if instance.variant is not self.variant:
            raise ScheduleError(f"{self.__class__.__name__} can not run a {instance.variant.value} instance")
        self.instance = instance
        self.dt = dt
        self.coverage_cell = coverage_cell
        self.graph = build_graph(instance, dt or DEFAULT_INTERCEPT_STEP)

    @property
    @abstractmethod
    def variant(self) -> Variant:
        pass

    @property
    def reward_scale(self) -> float:
        return 1.0

    def reset(self) -> ScheduleState:
        return self.replay(())

    def replay(self, order: Sequence[int]) -> ScheduleState:
        if len(set(order)) != len(order):
            raise ScheduleError(f"visit order {tuple(order)} repeats a node")
        empty = ScheduleState(instance=self.instance, clock=self.instance.t0, dt=self.dt)
        return _extend(self.instance, empty, 0, order, self.dt)

    @abstractmethod
    def objective(self, state: ScheduleState) -> float:
        pass

    def reward_objective(self, state: ScheduleState) -> float:
        """The quantity the rewards of an episode add up to."""
        return self.objective(state)

    def candidates(self, state: ScheduleState) -> Tuple[int, ...]:
        return tuple(i for i in self.instance.requester_ids() if i not in state.charged and i not in state.rejected)

    def actions(self, state: ScheduleState) -> Tuple[int, ...]:
        return self.candidates(state)

    def append(self, state: ScheduleState, v: int) -> ScheduleState:
        return _extend(self.instance, state, len(state.order), state.order + (v,), self.dt)

    @abstractmethod
    def _place(self, state: ScheduleState, v: int) -> Optional[Tuple[ScheduleState, int]]:
        """Best insertion of v, with its position, None when no position is feasible."""

    def insert(self, state: ScheduleState, v: int) -> ScheduleState:
        placed = self._place(state, v)
        if placed is None:
            return attr.evolve(self.append(state, v), feasible=False)
        return placed[0]

    @abstractmethod
    def accept(self, state: ScheduleState) -> bool:
        """Stop function: whether the state still meets the problem's budget."""

    @abstractmethod
    def _transition_reward(self, state: ScheduleState, next_state: ScheduleState, v: int) -> float:
        pass

    def reward(self, state: ScheduleState, v: int) -> float:
        placed = self._place(state, v)
        if placed is None:
            return -INFEASIBLE
        return self._transition_reward(state, placed[0], v)

    def is_terminal(self, state: ScheduleState) -> bool:
        return not self.actions(state)

    def _refuse(self, state: ScheduleState, v: int, pos: int) -> StepOutcome:
        self.log.debug(f"rejected vertex {v}")
        refused = attr.evolve(state, rejected=state.rejected | {v})
        return StepOutcome(refused, 0.0, self.is_terminal(refused), True, pos)

    def step(self, state: ScheduleState, v: int) -> StepOutcome:
        if v in state.charged or v in state.rejected:
            raise ScheduleError(f"vertex {v} is already selected")
        placed = self._place(state, v)
        if placed is None:
            return self._refuse(state, v, -1)
        next_state, pos = placed
        if not self.accept(next_state):
            return self._refuse(state, v, pos)
        reward = self._transition_reward(state, next_state, v)
        return StepOutcome(next_state, reward, self.is_terminal(next_state), False, pos)

    def constraint_violations(self, state: ScheduleState, require_coverage: bool = True) -> List[str]:
        violations = []
        if len(set(state.order)) != len(state.order):
            violations.append("duplicate visits")
        if not state.feasible:
            violations.append("unreachable visit")
        return violations

    def is_solution(self, state: ScheduleState) -> bool:
        return not self.constraint_violations(state)


class MobilePathEnv(ChargingEnv):
    """Charge as many mobile nodes as possible within the timespan C."""

    @property
    def variant(self) -> Variant:
        return Variant.P1_MOBILE_PATH

    def objective(self, state: ScheduleState) -> float:
        return float(len(state.order))

    def _place(self, state: ScheduleState, v: int) -> Optional[Tuple[ScheduleState, int]]:
        return self.append(state, v), len(state.order)

    def accept(self, state: ScheduleState) -> bool:
        return state.feasible and _close(state.finish_time, self.instance.horizon_end)

    def _transition_reward(self, state: ScheduleState, next_state: ScheduleState, v: int) -> float:
        return 1.0

    def constraint_violations(self, state: ScheduleState, require_coverage: bool = True) -> List[str]:
        violations = super().constraint_violations(state, require_coverage)
        if state.feasible and not _close(state.finish_time, self.instance.horizon_end):
            violations.append("timespan")
        return violations


class FullyChargingEnv(ChargingEnv):
    """Collect the largest prize sum without exceeding the charger capacity IE."""

    def __init__(self, *args, reward_mode: str = "energy", **kwargs) -> None:
        super().__init__(*args, **kwargs)
        if reward_mode not in ("energy", "prize"):
            raise ScheduleError(f"unknown reward mode {reward_mode!r}, expected energy or prize")
        self.reward_mode = reward_mode

    @property
    def variant(self) -> Variant:
        return Variant.P2_FULLY_CHARGING

    @property
    def reward_scale(self) -> float:
        return 1.0 if self.reward_mode == "prize" else self.instance.battery_capacity

    def objective(self, state: ScheduleState) -> float:
        return float(sum(self.instance.node(i).prize or 0 for i in state.order))

    def reward_objective(self, state: ScheduleState) -> float:
        return self.objective(state) if self.reward_mode == "prize" else state.charge_energy

    def _place(self, state: ScheduleState, v: int) -> Optional[Tuple[ScheduleState, int]]:
        table = distances(self.instance)
        order = state.order
        best, best_delta = 0, math.inf
        for pos in range(len(order) + 1):
            prev = order[pos - 1] if pos else START_VERTEX
            if pos < len(order):
                delta = table.between(prev, v) + table.between(v, order[pos]) - table.between(prev, order[pos])
            elif order:
                delta = table.between(prev, v) + table.to_end(v) - table.to_end(prev)
            else:
                delta = table.between(prev, v) + table.to_end(v)
            # ties keep the earliest position
            if delta < best_delta - _TOL:
                best, best_delta = pos, delta
        next_order = order[:best] + (v,) + order[best:]
        return _extend(self.instance, state, best, next_order, self.dt), best

    def accept(self, state: ScheduleState) -> bool:
        return _close(state.total_energy, self.instance.charger.energy_capacity or 0.0)

    def _transition_reward(self, state: ScheduleState, next_state: ScheduleState, v: int) -> float:
        if self.reward_mode == "prize":
            return float(self.instance.node(v).prize or 0)
        return next_state.charge_energies[next_state.order.index(v)]

    def constraint_violations(self, state: ScheduleState, require_coverage: bool = True) -> List[str]:
        violations = super().constraint_violations(state, require_coverage)
        if not self.accept(state):
            violations.append("energy budget")
        return violations


class KCoverageEnv(ChargingEnv):
    """Restore k-coverage with the shortest tour that meets every charging deadline."""

    @property
    def variant(self) -> Variant:
        return Variant.P3_KCOVERAGE

    @property
    def reward_scale(self) -> float:
        return self.instance.area.diameter

    @property
    def table(self) -> geometry.SubregionTable:
        return initial_table(self.instance, self.coverage_cell)

    def replay(self, order: Sequence[int]) -> ScheduleState:
        state = super().replay(order)
        return attr.evolve(state, coverage_table=geometry.table_after_charging(self.table, state.order))

    def objective(self, state: ScheduleState) -> float:
        return -state.travel_distance

    def append(self, state: ScheduleState, v: int) -> ScheduleState:
        appended = super().append(state, v)
        coverage = state.coverage_table if state.coverage_table is not None else self.table
        return attr.evolve(appended, coverage_table=geometry.table_after_charging(coverage, {v}))

    def actions(self, state: ScheduleState) -> Tuple[int, ...]:
        return tuple(
            v
            for v in self.candidates(state)
            if any(self.graph.has_edge(u, v) for u in state.visited) and self._place(state, v) is not None
        )

    def _place(self, state: ScheduleState, v: int) -> Optional[Tuple[ScheduleState, int]]:
        table = distances(self.instance)
        order = state.order
        best: Optional[Tuple[ScheduleState, int]] = None
        best_delta = math.inf
        for pos in range(len(order) + 1):
            prev = order[pos - 1] if pos else START_VERTEX
            if pos < len(order):
                delta = table.between(prev, v) + table.between(v, order[pos]) - table.between(prev, order[pos])
            elif order:
                delta = table.between(prev, v) + table.to_end(v) - table.to_end(prev)
            else:
                delta = table.between(prev, v) + table.to_end(v)
            # ties move toward the end of the tour
            if delta > best_delta + _TOL:
                continue
            candidate = _extend(self.instance, state, pos, order[:pos] + (v,) + order[pos:], self.dt)
            if candidate.feasible:
                best, best_delta = (candidate, pos), min(delta, best_delta)
        if best is None:
            return None
        placed, pos = best
        coverage = state.coverage_table if state.coverage_table is not None else self.table
        return attr.evolve(placed, coverage_table=geometry.table_after_charging(coverage, {v})), pos

    def accept(self, state: ScheduleState) -> bool:
        return state.feasible

    def _transition_reward(self, state: ScheduleState, next_state: ScheduleState, v: int) -> float:
        return -(next_state.travel_distance - state.travel_distance)

    def step(self, state: ScheduleState, v: int) -> StepOutcome:
        if v in state.charged or v in state.rejected:
            raise ScheduleError(f"vertex {v} is already selected")
        placed = self._place(state, v)
        if placed is None:
            self.log.debug(f"no feasible position for vertex {v}")
            return StepOutcome(state, -INFEASIBLE, True, False, -1)
        next_state, pos = placed
        reward = self._transition_reward(state, next_state, v)
        return StepOutcome(next_state, reward, self.is_terminal(next_state), False, pos)

    def coverage_restored(self, state: ScheduleState) -> bool:
        table = state.coverage_table or geometry.table_after_charging(self.table, state.order)
        return table.all_zero and table.feasible

    def is_terminal(self, state: ScheduleState) -> bool:
        table = state.coverage_table or self.table
        return table.all_zero or not self.actions(state)

    def constraint_violations(self, state: ScheduleState, require_coverage: bool = True) -> List[str]:
        violations = super().constraint_violations(state, require_coverage)
        if state.feasible:
            t0 = self.instance.t0
            for v, arrival in zip(state.order, state.arrival_times):
                deadline = self.instance.node(v).deadline
                if deadline is not None and not _close(arrival, t0 + deadline):
                    violations.append(f"deadline of node {v}")
        else:
            violations.append("deadline")
        if require_coverage and not self.coverage_restored(state):
            violations.append("coverage")
        return violations


_ENVS = {
    Variant.P1_MOBILE_PATH: MobilePathEnv,
    Variant.P2_FULLY_CHARGING: FullyChargingEnv,
    Variant.P3_KCOVERAGE: KCoverageEnv,
}


def make_env(instance: ProblemInstance, dt: Optional[float] = None, **kwargs) -> ChargingEnv:
    return _ENVS[instance.variant](instance, dt=dt, **kwargs)


def rollout(
    env: ChargingEnv, choose: ChooseFn, state: Optional[ScheduleState] = None
) -> Tuple[ScheduleState, List[EpisodeStep]]:
    """Run one episode, asking `choose` for the next vertex until the stop function fires."""
    state = env.reset() if state is None else state
    trace: List[EpisodeStep] = []
    while not env.is_terminal(state):
        actions = env.actions(state)
        vertex = choose(state, actions)
        if vertex is None:
            break
        outcome = env.step(state, vertex)
        state = outcome.next_state
        trace.append(
            EpisodeStep(
                step=len(trace) + 1,
                vertex=vertex,
                insert_pos=outcome.insert_pos,
                reward=outcome.reward,
                clock=state.clock,
                distance=state.travel_distance,
                energy=state.total_energy,
                rejected=outcome.rejected,
            )
        )
        if outcome.terminal:
            break
    return state, trace


def schedule_trace(state: ScheduleState, **env_kwargs) -> List[EpisodeStep]:
    """Per-visit trace of a finished schedule, rebuilt one prefix at a time."""
    env = make_env(state.instance, state.dt, **env_kwargs)
    trace: List[EpisodeStep] = []
    previous = env.reset()
    for index, vertex in enumerate(state.order):
        current = env.replay(state.order[: index + 1])
        trace.append(
            EpisodeStep(
                step=index + 1,
                vertex=vertex,
                insert_pos=index,
                reward=env.reward_objective(current) - env.reward_objective(previous),
                clock=current.clock,
                distance=current.travel_distance,
                energy=current.total_energy,
            )
        )
        previous = current
    return trace


def replay_schedule(
    instance: ProblemInstance,
    order: Sequence[int],
    dt: Optional[float] = None,
    coverage_cell: float = geometry.DEFAULT_CELL,
) -> ScheduleState:
    """Recompute a schedule from scratch.

    For k-coverage instances `dt` snaps each arrival up to the target's next time unit;
    for mobile networks it is the interception grid step.
    """
    return make_env(instance, dt, coverage_cell=coverage_cell).replay(order)


def objective(state: ScheduleState) -> float:
    return make_env(state.instance, state.dt).objective(state)


def reward_objective(state: ScheduleState) -> float:
    return make_env(state.instance, state.dt).reward_objective(state)


def actions(state: ScheduleState) -> Tuple[int, ...]:
    return make_env(state.instance, state.dt).actions(state)


def insert(state: ScheduleState, v: int) -> ScheduleState:
    return make_env(state.instance, state.dt).insert(state, v)


def reward(state: ScheduleState, v: int) -> float:
    return make_env(state.instance, state.dt).reward(state, v)


def step(state: ScheduleState, v: int) -> StepOutcome:
    return make_env(state.instance, state.dt).step(state, v)


def constraint_violations(state: ScheduleState, require_coverage: bool = True) -> List[str]:
    return make_env(state.instance, state.dt).constraint_violations(state, require_coverage)


def is_solution(state: ScheduleState) -> bool:
    return make_env(state.instance, state.dt).is_solution(state)
