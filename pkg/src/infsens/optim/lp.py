"""Linear programming on top of the HiGHS simplex shipped with scipy."""

from __future__ import annotations

import hashlib
import os
from pathlib import Path

import numpy as np
from scipy.optimize import linprog

from .problems import LpProblem, Solution, Status, dump_lp

DEFAULT_TOL = 1e-7

# set to a directory to get every solved problem written out as text
DUMP_ENV = "INFSENS_DUMP_DIR"


def maybe_dump(problem, binaries=(), kind="lp"):
    target = os.environ.get(DUMP_ENV)
    if not target:
        return None
    text = dump_lp(problem, binaries)
    digest = hashlib.sha1(text.encode()).hexdigest()[:12]
    path = Path(target) / f"{kind}_{digest}.lp"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def _bounds_list(lb, ub):
    return [
        (None if np.isneginf(lo) else lo, None if np.isposinf(hi) else hi)
        for lo, hi in zip(lb, ub)
    ]


def solve_lp(p: LpProblem, tol: float = DEFAULT_TOL, *, lb=None, ub=None, A_ub=None) -> Solution:
    """Solve ``p``; status codes carry infeasibility and unboundedness.

    ``lb``/``ub`` override the problem's variable bounds and ``A_ub`` may be a
    pre-converted (e.g. sparse) copy of the inequality matrix. Branch and bound
    uses both to avoid rebuilding the problem at every node.
    """
    maybe_dump(p)
    lb = p.lb if lb is None else lb
    ub = p.ub if ub is None else ub
    A_ub = p.A_ub if A_ub is None else A_ub
    n_ub = p.b_ub.shape[0]
    n_eq = p.b_eq.shape[0]
    res = linprog(
        p.c,
        A_ub=A_ub if n_ub else None,
        b_ub=p.b_ub if n_ub else None,
        A_eq=p.A_eq if n_eq else None,
        b_eq=p.b_eq if n_eq else None,
        bounds=_bounds_list(lb, ub),
        method="highs",
        options={
            "primal_feasibility_tolerance": tol,
            "dual_feasibility_tolerance": tol,
            "presolve": True,
        },
    )
    if res.status == 2:
        return Solution(Status.INFEASIBLE, iterations=int(res.nit))
    if res.status == 3:
        return Solution(Status.UNBOUNDED, iterations=int(res.nit))
    if res.status == 1:
        return Solution(Status.TIME_LIMIT, iterations=int(res.nit))
    if res.status != 0:
        raise RuntimeError(f"LP solver failed: {res.message}")

    x = np.asarray(res.x, dtype=float)
    dual = 0.0
    if n_ub:
        dual += float(p.b_ub @ res.ineqlin.marginals)
    if n_eq:
        dual += float(p.b_eq @ res.eqlin.marginals)
    lo_m = np.asarray(res.lower.marginals)
    up_m = np.asarray(res.upper.marginals)
    fin_lo = np.isfinite(lb)
    fin_up = np.isfinite(ub)
    dual += float(lb[fin_lo] @ lo_m[fin_lo]) + float(ub[fin_up] @ up_m[fin_up])
    viol = [0.0, np.max(lb - x, initial=0.0), np.max(x - ub, initial=0.0)]
    if n_ub:
        viol.append(np.max(A_ub @ x - p.b_ub))
    if n_eq:
        viol.append(np.max(np.abs(p.A_eq @ x - p.b_eq)))
    return Solution(
        Status.OPTIMAL,
        x=x,
        objective=float(p.c @ x),
        max_violation=float(max(viol)),
        bound=float(p.c @ x),
        gap=0.0,
        dual_objective=dual,
        iterations=int(res.nit),
    )
