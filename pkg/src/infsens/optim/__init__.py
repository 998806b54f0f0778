"""Self-contained LP / convex QP / binary MILP kernel used by the trainers."""

from .lp import DEFAULT_TOL, solve_lp
from .milp import MilpOptions, relative_gap, solve_milp
from .problems import LpProblem, MilpProblem, QpProblem, Solution, Status, dump_lp
from .qp import kkt_residual, solve_qp

__all__ = [
    "DEFAULT_TOL",
    "LpProblem",
    "MilpOptions",
    "MilpProblem",
    "QpProblem",
    "Solution",
    "Status",
    "dump_lp",
    "kkt_residual",
    "relative_gap",
    "solve_lp",
    "solve_milp",
    "solve_qp",
]
