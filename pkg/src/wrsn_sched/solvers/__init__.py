from wrsn_sched.solvers.acs import AcsParams, AcsSolver
from wrsn_sched.solvers.brute_force import BruteForceSolver
from wrsn_sched.solvers.dynamic import DynamicProgrammingSolver
from wrsn_sched.solvers.greedy import GreedySolver
from wrsn_sched.solvers.learned import DqnSolver
from wrsn_sched.solvers.mst import CmstSolver, MstSolver
from wrsn_sched.solvers.random_walk import RandomSolver

__all__ = [
    "AcsParams",
    "AcsSolver",
    "BruteForceSolver",
    "CmstSolver",
    "DqnSolver",
    "DynamicProgrammingSolver",
    "GreedySolver",
    "MstSolver",
    "RandomSolver",
]
