"""Spanning-tree tours for the energy-budget problem."""
import heapq
from typing import Dict, List, Tuple

import networkx as nx

from wrsn_sched.envs import ChargingEnv, ScheduleState, make_env
from wrsn_sched.graph import distances
from wrsn_sched.instances import START_VERTEX, ProblemInstance, Variant
from wrsn_sched.solver import Solver


def _complete_graph(instance: ProblemInstance) -> nx.Graph:
    table = distances(instance)
    vertices = (START_VERTEX,) + instance.requester_ids()
    graph = nx.Graph()
    graph.add_nodes_from(vertices)
    for i, u in enumerate(vertices):
        for v in vertices[i + 1 :]:
            graph.add_edge(u, v, weight=table.between(u, v))
    return graph


def preorder_tour(tree: nx.Graph) -> List[int]:
    return [v for v in nx.dfs_preorder_nodes(tree, source=START_VERTEX) if v != START_VERTEX]


def truncate_to_budget(env: ChargingEnv, tour: List[int]) -> ScheduleState:
    """Walk the tour and keep each node whose addition still fits the budget."""
    state = env.reset()
    for v in tour:
        appended = env.append(state, v)
        if env.accept(appended):
            state = appended
    return state


class MstSolver(Solver):
    """Preorder walk of the minimum spanning tree rooted at the depot."""

    variants = (Variant.P2_FULLY_CHARGING,)

    @property
    def name(self) -> str:
        return "mst"

    def spanning_tree(self, instance: ProblemInstance) -> nx.Graph:
        graph = _complete_graph(instance)
        tree = nx.Graph()
        tree.add_node(START_VERTEX)
        tree.add_edges_from(nx.minimum_spanning_edges(graph, algorithm="prim", data=False))
        return tree

    def solve(self, instance: ProblemInstance) -> ScheduleState:
        self.check(instance)
        tour = preorder_tour(self.spanning_tree(instance))
        state = truncate_to_budget(make_env(instance), tour)
        self.log.debug(f"{self.name} tour of {len(tour)} nodes truncated to {len(state.order)}")
        return state


class CmstSolver(MstSolver):
    """Capacitated variant: every branch below the depot carries at most IE/2 of charging demand.

    The tree is grown Prim-style from the depot, only accepting an edge when the branch
    it joins stays within capacity. Nodes whose own demand exceeds the capacity are left out.
    """

    @property
    def name(self) -> str:
        return "cmst"

    def spanning_tree(self, instance: ProblemInstance) -> nx.Graph:
        table = distances(instance)
        capacity = (instance.charger.energy_capacity or 0.0) / 2
        demand = {v: instance.battery_capacity - instance.node(v).residual for v in instance.requester_ids()}
        tree = nx.Graph()
        tree.add_node(START_VERTEX)
        branch_of: Dict[int, int] = {}
        load: Dict[int, float] = {}
        frontier: List[Tuple[float, int, int]] = []

        def push_from(u: int) -> None:
            for v in demand:
                if v not in tree:
                    heapq.heappush(frontier, (table.between(u, v), u, v))

        push_from(START_VERTEX)
        while frontier:
            _, u, v = heapq.heappop(frontier)
            if v in tree or demand[v] > capacity:
                continue
            branch = v if u == START_VERTEX else branch_of[u]
            if load.get(branch, 0.0) + demand[v] > capacity:
                continue
            tree.add_edge(u, v)
            branch_of[v] = branch
            load[branch] = load.get(branch, 0.0) + demand[v]
            push_from(v)
        self.log.debug(f"capacitated tree with {len(load)} branches, capacity {capacity:.1f} J")
        return tree
