"""Exact k-coverage tour by color-coding dynamic programming on the time-expanded DAG."""
from typing import Dict, List, Optional, Tuple

import attr

from wrsn_sched.config import SchedConfig
from wrsn_sched.envs import KCoverageEnv, ScheduleState, make_env
from wrsn_sched.errors import InfeasibleScheduleError, SolverMemoryError
from wrsn_sched.geometry import SubregionTable, table_after_charging
from wrsn_sched.graph import DagVertex, TimeExpandedDAG, build_time_expanded_dag, distances
from wrsn_sched.instances import ProblemInstance, Variant
from wrsn_sched.solver import Solver


@attr.s(frozen=True)
class ColorSetEntry:
    """A colorful path ending at some DAG vertex.

    The charged set, hence the table, is fixed by the color set, so one entry per
    color set and vertex is enough: the shortest one.
    """

    color_set = attr.ib(type=int)
    table = attr.ib(type=SubregionTable, repr=False)
    distance = attr.ib(type=float)
    predecessor = attr.ib(default=None, type=Optional[Tuple[DagVertex, int]])


class DynamicProgrammingSolver(Solver):
    variants = (Variant.P3_KCOVERAGE,)

    def __init__(self, config: Optional[SchedConfig] = None, dt: Optional[float] = None, max_entries: Optional[int] = None):
        super().__init__(config)
        self.dt = self._config.dt if dt is None else dt
        self.max_entries = self._config.dp_max_entries if max_entries is None else max_entries

    @property
    def name(self) -> str:
        return "dp"

    def solve(self, instance: ProblemInstance) -> ScheduleState:
        self.check(instance)
        env = make_env(instance, self.dt, coverage_cell=self._config.coverage_cell)
        assert isinstance(env, KCoverageEnv)
        table = env.table
        if table.all_zero:
            return env.reset()

        dag = build_time_expanded_dag(instance, self.dt)
        colors = {node_id: 1 << bit for bit, node_id in enumerate(dag.nodes)}
        entries = self._propagate(dag, colors, table)
        best = self._best_complete(dag, entries)
        if best is None:
            raise InfeasibleScheduleError("no colorful path restores k-coverage within the deadlines")
        order = self._trace_back(entries, best)
        self.log.debug(f"optimal colorful path {order}")
        return env.replay(order)

    def _propagate(
        self, dag: TimeExpandedDAG, colors: Dict[int, int], table: SubregionTable
    ) -> Dict[DagVertex, Dict[int, ColorSetEntry]]:
        entries: Dict[DagVertex, Dict[int, ColorSetEntry]] = {}
        stored = 0
        for target, length in dag.successors(dag.start):
            node_id = target[0]
            if table.helps(node_id):
                entries.setdefault(target, {})[colors[node_id]] = ColorSetEntry(
                    colors[node_id], table_after_charging(table, {node_id}), length, (dag.start, 0)
                )
                stored += 1

        for vertex in dag.order():
            held = entries.get(vertex)
            if not held:
                continue
            successors = None
            for color_set, entry in list(held.items()):
                if entry.table.all_zero:
                    continue
                if successors is None:
                    successors = dag.successors(vertex)
                for target, length in successors:
                    node_id = target[0]
                    color = colors[node_id]
                    if color_set & color or not entry.table.helps(node_id):
                        continue
                    extended = color_set | color
                    distance = entry.distance + length
                    slot = entries.setdefault(target, {})
                    current = slot.get(extended)
                    if current is None:
                        stored += 1
                        if stored > self.max_entries:
                            raise SolverMemoryError(
                                f"more than {self.max_entries} color-set entries on a DAG of {dag.vertex_count} "
                                f"vertices, raise dp_max_entries or the time step"
                            )
                    elif distance >= current.distance:
                        continue
                    slot[extended] = ColorSetEntry(
                        extended, table_after_charging(entry.table, {node_id}), distance, (vertex, color_set)
                    )
        self.log.debug(f"{stored} color-set entries over {len(entries)} DAG vertices")
        return entries

    def _best_complete(
        self, dag: TimeExpandedDAG, entries: Dict[DagVertex, Dict[int, ColorSetEntry]]
    ) -> Optional[Tuple[DagVertex, int]]:
        table = distances(dag.instance)
        best, best_distance = None, float("inf")
        for vertex in dag.order():
            for color_set, entry in entries.get(vertex, {}).items():
                if not entry.table.all_zero:
                    continue
                closed = entry.distance + table.to_end(vertex[0])
                if closed < best_distance:
                    best, best_distance = (vertex, color_set), closed
        return best

    @staticmethod
    def _trace_back(entries: Dict[DagVertex, Dict[int, ColorSetEntry]], last: Tuple[DagVertex, int]) -> List[int]:
        order = []
        vertex, color_set = last
        while color_set:
            order.append(vertex[0])
            vertex, color_set = entries[vertex][color_set].predecessor
        return order[::-1]
