from typing import List, Optional, Tuple

from wrsn_sched.envs import ChargingEnv, KCoverageEnv, ScheduleState


def coverage_done(env: ChargingEnv, state: ScheduleState) -> bool:
    return isinstance(env, KCoverageEnv) and state.coverage_table is not None and state.coverage_table.all_zero


def feasible_appends(env: ChargingEnv, state: ScheduleState) -> List[Tuple[int, ScheduleState]]:
    """Unvisited requesters that can be charged next, with the state after appending them.

    For k-coverage the next node needs an edge from the current one and must decrease
    at least one entry of the coverage table.
    """
    out = []
    kcoverage = isinstance(env, KCoverageEnv)
    for v in env.candidates(state):
        if kcoverage:
            table = state.coverage_table or env.table
            if not env.graph.has_edge(state.head, v) or not table.helps(v):
                continue
        appended = env.append(state, v)
        if env.accept(appended):
            out.append((v, appended))
    return out


def rank(env: ChargingEnv, state: ScheduleState) -> Tuple[bool, float, float]:
    """Larger is better: solutions first, then objective, then lower energy."""
    return env.is_solution(state), env.objective(state), -state.total_energy


def better(env: ChargingEnv, candidate: ScheduleState, incumbent: Optional[ScheduleState]) -> bool:
    return incumbent is None or rank(env, candidate) > rank(env, incumbent)
