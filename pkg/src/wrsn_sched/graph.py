"""Charging graphs over the requesting nodes and the time-expanded DAG."""
import logging
import math
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import attr
import networkx as nx
import numpy as np
from scipy.spatial.distance import cdist

from wrsn_sched.errors import GeometryError, ScheduleError
from wrsn_sched.instances import START_VERTEX, Point, ProblemInstance, SensorNode, Variant

log = logging.getLogger(__name__)

# Row id of the charger end point in the distance table.
END_VERTEX = -1
# Grid step used to intercept mobile nodes when none is given.
DEFAULT_INTERCEPT_STEP = 1.0
_SLOT_EPS = 1e-9

DagVertex = Tuple[int, int]


@attr.s(frozen=True)
class DistanceTable:
    """Static Euclidean distances between the depot, every node and the end point."""

    index = attr.ib(type=Dict[int, int])
    rows = attr.ib(type=List[List[float]], repr=False)

    def between(self, u: int, v: int) -> float:
        return self.rows[self.index[u]][self.index[v]]

    def to_end(self, u: int) -> float:
        return self.rows[self.index[u]][self.index[END_VERTEX]]

    def as_array(self) -> np.ndarray:
        return np.array(self.rows)


def distances(instance: ProblemInstance) -> DistanceTable:
    if "distances" not in instance._cache:
        ids = [START_VERTEX] + sorted(node.id for node in instance.nodes) + [END_VERTEX]
        points = [instance.charger.depot]
        points += [instance.node(i).position for i in ids[1:-1]]
        points.append(instance.charger.end_point)
        matrix = cdist(np.array(points), np.array(points))
        instance._cache["distances"] = DistanceTable({vertex: row for row, vertex in enumerate(ids)}, matrix.tolist())
    return instance._cache["distances"]


def intercept(
    instance: ProblemInstance,
    origin: Point,
    clock: float,
    node: SensorNode,
    dt: float = DEFAULT_INTERCEPT_STEP,
) -> Optional[Tuple[float, Point, float]]:
    """Earliest grid step t_k = t0 + k*dt at which the charger, leaving origin at clock,
    reaches the node's position at t_k.

    Returns (t_k, meeting point, leg length) or None when the node can not be met before
    the horizon ends.
    """
    if dt <= 0:
        raise ScheduleError(f"interception step must be positive, got {dt}")
    if node.trajectory is None:
        leg = math.hypot(node.position[0] - origin[0], node.position[1] - origin[1])
        arrival = clock + leg / instance.charger.speed
        return (arrival, node.position, leg) if arrival <= instance.horizon_end + _SLOT_EPS else None
    t0, horizon = instance.t0, instance.horizon_end
    first = max(0, math.ceil((clock - t0) / dt - _SLOT_EPS))
    last = math.floor((horizon - t0) / dt + _SLOT_EPS)
    if first > last:
        return None
    steps = t0 + dt * np.arange(first, last + 1)
    steps[-1] = min(steps[-1], horizon)
    where = node.trajectory.positions_at(steps)
    legs = np.hypot(where[:, 0] - origin[0], where[:, 1] - origin[1])
    reachable = np.nonzero(legs / instance.charger.speed <= steps - clock + _SLOT_EPS)[0]
    if not len(reachable):
        return None
    hit = int(reachable[0])
    return float(steps[hit]), (float(where[hit, 0]), float(where[hit, 1])), float(legs[hit])


@attr.s(frozen=True)
class ChargingGraph:
    """Weighted graph of the charging requests.

    P1 and P2 graphs are complete and undirected over the requesters, the start vertex
    is reached through the charger depot. The P3 graph is directed and holds the start
    vertex explicitly.
    """

    instance = attr.ib(type=ProblemInstance, eq=False, repr=False)
    graph = attr.ib(type=nx.Graph, eq=False)
    intercept_step = attr.ib(default=DEFAULT_INTERCEPT_STEP, type=float)

    start_vertex = START_VERTEX

    @property
    def directed(self) -> bool:
        return self.graph.is_directed()

    @property
    def vertices(self) -> Tuple[int, ...]:
        return tuple(sorted(self.graph.nodes))

    def has_edge(self, u: int, v: int) -> bool:
        if u == START_VERTEX and not self.directed:
            return v in self.graph
        return self.graph.has_edge(u, v)

    def successors(self, u: int) -> Tuple[int, ...]:
        if u == START_VERTEX and not self.directed:
            return self.vertices
        if self.directed:
            return tuple(sorted(self.graph.successors(u)))
        return tuple(sorted(self.graph.neighbors(u)))

    def weight(self, u: int, v: int, t: Optional[float] = None) -> float:
        if self.instance.variant is Variant.P1_MOBILE_PATH:
            return dynamic_weight(self, u, v, self.instance.t0 if t is None else t)
        return distances(self.instance).between(u, v)

    def edges(self, t: Optional[float] = None) -> Iterator[Tuple[int, int, float]]:
        for u, v in sorted(self.graph.edges):
            yield u, v, self.weight(u, v, t)


def build_graph(instance: ProblemInstance, intercept_step: float = DEFAULT_INTERCEPT_STEP) -> ChargingGraph:
    key = ("graph", intercept_step)
    if key in instance._cache:
        return instance._cache[key]
    requesters = instance.requesters()
    table = distances(instance)
    if instance.variant is Variant.P3_KCOVERAGE:
        graph = nx.DiGraph()
        graph.add_node(START_VERTEX, deadline=None, prize=None, position=instance.charger.depot)
        for node in requesters:
            graph.add_node(node.id, deadline=node.deadline, prize=node.prize, position=node.position)
        speed, rate = instance.charger.speed, instance.charger.transfer_rate
        capacity = instance.battery_capacity
        for target in requesters:
            if table.between(START_VERTEX, target.id) / speed <= target.deadline:
                graph.add_edge(START_VERTEX, target.id, weight=table.between(START_VERTEX, target.id))
            for source in requesters:
                if source.id == target.id:
                    continue
                d = table.between(source.id, target.id)
                if (capacity - source.residual) / rate + d / speed <= target.deadline:
                    graph.add_edge(source.id, target.id, weight=d)
    else:
        graph = nx.Graph()
        for node in requesters:
            graph.add_node(node.id, deadline=node.deadline, prize=node.prize, position=node.position)
        for i, u in enumerate(requesters):
            for v in requesters[i + 1 :]:
                graph.add_edge(u.id, v.id, weight=table.between(u.id, v.id))
    result = ChargingGraph(instance, graph, intercept_step)
    log.debug(f"{instance.variant.value} graph: {graph.number_of_nodes()} vertices, {graph.number_of_edges()} edges")
    instance._cache[key] = result
    return result


def dynamic_weight(graph: ChargingGraph, v_i: int, v_j: int, t: float) -> float:
    """Distance from v_i's position at t to v_j's position at the earliest step the charger can meet it."""
    instance = graph.instance
    if instance.variant is not Variant.P1_MOBILE_PATH:
        raise GeometryError("dynamic weights only exist for mobile networks")
    if v_i == START_VERTEX:
        origin = instance.charger.depot
    else:
        source = instance.node(v_i)
        origin = source.trajectory.position_at(t) if source.trajectory else source.position
    hit = intercept(instance, origin, t, instance.node(v_j), graph.intercept_step)
    return math.inf if hit is None else hit[2]


def slot_count(deadline: float, dt: float) -> int:
    """Index of the last time unit of a window [t0, t0 + deadline]."""
    return max(0, math.ceil(deadline / dt - _SLOT_EPS))


def slot_times(t0: float, deadline: float, dt: float) -> np.ndarray:
    """Time units t^k = min(t0 + k*dt, t0 + deadline), k = 0..ceil(deadline/dt)."""
    return np.minimum(t0 + dt * np.arange(slot_count(deadline, dt) + 1), t0 + deadline)


def arrival_slots(arrivals: np.ndarray, t0: float, deadline: float, dt: float) -> np.ndarray:
    """Time unit k with t^{k-1} < a <= t^k for each arrival, -1 past the deadline."""
    arrivals = np.asarray(arrivals, dtype=float)
    slots = np.ceil((arrivals - t0) / dt - _SLOT_EPS)
    slots = np.clip(slots, 0, slot_count(deadline, dt)).astype(int)
    return np.where(arrivals <= t0 + deadline + _SLOT_EPS, slots, -1)


def snap(t0: float, deadline: float, dt: float, arrival: float) -> Optional[float]:
    """Arrival snapped up to its time unit, None past the deadline."""
    slot = int(arrival_slots(np.array([arrival]), t0, deadline, dt)[0])
    if slot < 0:
        return None
    return float(min(t0 + slot * dt, t0 + deadline))


@attr.s(frozen=True)
class TimeExpandedDAG:
    """Copies v_i(t^k) of every requester over its window, plus the start vertex (0, 0).

    Edges from a copy of node i to node j are kept as one array per pair: entry k holds
    the time unit of j reached from v_i(t^k), or -1.
    """

    instance = attr.ib(type=ProblemInstance, eq=False, repr=False)
    dt = attr.ib(type=float)
    times = attr.ib(type=Dict[int, np.ndarray], eq=False, repr=False)
    targets = attr.ib(type=Dict[Tuple[int, int], np.ndarray], eq=False, repr=False)
    start_targets = attr.ib(type=Dict[int, int], eq=False)
    _order = attr.ib(init=False, default=None, eq=False, repr=False)

    start = (START_VERTEX, 0)

    @property
    def nodes(self) -> Tuple[int, ...]:
        return tuple(sorted(self.times))

    def clique_of(self, vertex: DagVertex) -> int:
        return vertex[0]

    def time_of(self, vertex: DagVertex) -> float:
        if vertex == self.start:
            return self.instance.t0
        return float(self.times[vertex[0]][vertex[1]])

    def vertices(self) -> Iterator[DagVertex]:
        yield self.start
        for node_id in self.nodes:
            for k in range(len(self.times[node_id])):
                yield node_id, k

    @property
    def vertex_count(self) -> int:
        return 1 + sum(len(times) for times in self.times.values())

    def successors(self, vertex: DagVertex) -> List[Tuple[DagVertex, float]]:
        table = distances(self.instance)
        if vertex == self.start:
            return [((j, k), table.between(START_VERTEX, j)) for j, k in sorted(self.start_targets.items())]
        i, k = vertex
        out = []
        for j in self.nodes:
            if j == i:
                continue
            slot = int(self.targets[(i, j)][k])
            if slot >= 0:
                out.append(((j, slot), table.between(i, j)))
        return out

    def edges(self) -> Iterator[Tuple[DagVertex, DagVertex, float]]:
        for vertex in self.vertices():
            for target, length in self.successors(vertex):
                yield vertex, target, length

    @property
    def edge_count(self) -> int:
        return len(self.start_targets) + int(sum((slots >= 0).sum() for slots in self.targets.values()))

    def order(self) -> Tuple[DagVertex, ...]:
        """Topological order: every edge goes to a later time, ties ordered by node id."""
        if self._order is None:
            ranked = sorted(
                ((self.time_of(v), v[0], v[1]) for v in self.vertices() if v != self.start),
            )
            object.__setattr__(self, "_order", (self.start,) + tuple((i, k) for _, i, k in ranked))
        return self._order

    def to_networkx(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        for vertex in self.vertices():
            graph.add_node(vertex, time=self.time_of(vertex), clique=self.clique_of(vertex))
        for source, target, length in self.edges():
            graph.add_edge(source, target, weight=length)
        return graph


def build_time_expanded_dag(instance: ProblemInstance, dt: float = 1.0) -> TimeExpandedDAG:
    if instance.variant is not Variant.P3_KCOVERAGE:
        raise ScheduleError("the time-expanded DAG is defined for k-coverage instances only")
    if dt <= 0:
        raise ScheduleError(f"time step must be positive, got {dt}")
    key = ("dag", dt)
    if key in instance._cache:
        return instance._cache[key]
    t0 = instance.t0
    speed, rate = instance.charger.speed, instance.charger.transfer_rate
    capacity = instance.battery_capacity
    table = distances(instance)
    requesters = instance.requesters()

    times = {node.id: slot_times(t0, node.deadline, dt) for node in requesters}
    start_targets = {}
    for node in requesters:
        arrival = t0 + table.between(START_VERTEX, node.id) / speed
        slot = int(arrival_slots(np.array([arrival]), t0, node.deadline, dt)[0])
        if slot >= 0:
            start_targets[node.id] = slot

    targets: Dict[Tuple[int, int], np.ndarray] = {}
    for source in requesters:
        source_times = times[source.id]
        residual = np.maximum(0.0, source.residual - source.consumption_rate * (source_times - t0))
        departure = source_times + (capacity - residual) / rate
        for target in requesters:
            if target.id == source.id:
                continue
            arrival = departure + table.between(source.id, target.id) / speed
            slots = arrival_slots(arrival, t0, target.deadline, dt)
            target_times = times[target.id][np.maximum(slots, 0)]
            later = (target_times > source_times) | ((target_times == source_times) & (target.id > source.id))
            targets[(source.id, target.id)] = np.where((slots >= 0) & later, slots, -1)

    dag = TimeExpandedDAG(instance, dt, times, targets, start_targets)
    log.debug(f"time-expanded DAG dt={dt}: {dag.vertex_count} vertices, {dag.edge_count} edges")
    instance._cache[key] = dag
    return dag


def edge_rows(graph: ChargingGraph, t: Optional[float] = None) -> List[Tuple[int, int, float]]:
    return list(graph.edges(t))


def dag_edge_rows(dag: TimeExpandedDAG) -> Iterator[Tuple[int, float, int, float]]:
    for source, target, _ in dag.edges():
        yield source[0], dag.time_of(source), target[0], dag.time_of(target)


def path_length(table: DistanceTable, order: Sequence[int]) -> float:
    """Closed tour length depot -> order -> end point, 0 for an empty order."""
    if not order:
        return 0.0
    total = table.between(START_VERTEX, order[0])
    for u, v in zip(order, order[1:]):
        total += table.between(u, v)
    return total + table.to_end(order[-1])
