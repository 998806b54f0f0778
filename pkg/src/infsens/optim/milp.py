"""Best-bound branch and bound for LPs with binary variables."""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import sparse

from .lp import DEFAULT_TOL, maybe_dump, solve_lp
from .problems import MilpProblem, Solution, Status

INT_TOL = 1e-6


@dataclass(frozen=True)
class MilpOptions:
    rel_gap: float = 1e-6
    time_limit: float = 300.0
    node_limit: Optional[int] = None
    warm_start: Optional[np.ndarray] = None
    # maps a node's LP solution to a candidate binary assignment (or None)
    heuristic: Optional[Callable[[np.ndarray], Optional[np.ndarray]]] = None
    tol: float = DEFAULT_TOL


def relative_gap(incumbent: float, bound: float) -> float:
    if not np.isfinite(incumbent):
        return np.inf
    return max(0.0, (incumbent - bound) / max(1.0, abs(incumbent)))


def _most_fractional(xb):
    if xb.size == 0:
        return None
    frac = np.abs(xb - np.round(xb))
    k = int(np.argmax(frac))  # argmax returns the lowest index among ties
    if frac[k] <= INT_TOL:
        return None
    return k


def solve_milp(p: MilpProblem, opts: MilpOptions = MilpOptions()) -> Solution:
    """Solve ``p`` by branch and bound over LP relaxations.

    Node selection is best-bound (ties broken by creation order) and branching
    picks the most fractional binary (ties to the lowest index), so identical
    inputs explore identical trees. ``node_limit`` is the deterministic budget;
    ``time_limit`` is a wall-clock safety net. Both report ``time_limit``.
    """
    maybe_dump(p, kind="milp")
    lp = p.lp
    bins = p.binaries
    lb0 = lp.lb.copy()
    ub0 = lp.ub.copy()
    lb0[bins] = np.maximum(lb0[bins], 0.0)
    ub0[bins] = np.minimum(ub0[bins], 1.0)
    A_ub = sparse.csr_matrix(lp.A_ub) if lp.A_ub.shape[0] else lp.A_ub
    start = time.monotonic()

    def relax(lb, ub):
        return solve_lp(lp, opts.tol, lb=lb, ub=ub, A_ub=A_ub)

    inc_x, inc_obj = None, np.inf
    trace = []
    nodes = 0

    def try_assignment(assign, node_id):
        nonlocal inc_x, inc_obj
        assign = np.round(np.asarray(assign, dtype=float))
        lb = lb0.copy()
        ub = ub0.copy()
        lb[bins] = assign
        ub[bins] = assign
        sol = relax(lb, ub)
        if sol.status == Status.OPTIMAL and sol.objective < inc_obj - 1e-12:
            inc_x, inc_obj = sol.x, sol.objective
            trace.append((node_id, inc_obj))
            return True
        return False

    if opts.warm_start is not None:
        ws = np.asarray(opts.warm_start, dtype=float).ravel()
        if ws.shape[0] != bins.shape[0]:
            raise ValueError("warm start must assign every binary variable")
        try_assignment(ws, 0)

    root = relax(lb0, ub0)
    nodes = 1
    if root.status == Status.UNBOUNDED:
        return Solution(Status.UNBOUNDED, nodes=nodes)
    if root.status == Status.INFEASIBLE:
        return Solution(Status.INFEASIBLE, nodes=nodes)

    counter = 0
    heap = [(root.objective, counter, lb0, ub0, root)]
    best_bound = root.objective
    status = None
    while heap:
        best_bound = heap[0][0]
        gap = relative_gap(inc_obj, best_bound)
        if gap <= opts.rel_gap:
            status = Status.OPTIMAL if gap <= 1e-9 else Status.GAP_REACHED
            break
        if opts.node_limit is not None and nodes >= opts.node_limit:
            status = Status.TIME_LIMIT
            break
        if time.monotonic() - start > opts.time_limit:
            status = Status.TIME_LIMIT
            break
        bound, _, lb, ub, sol = heapq.heappop(heap)
        if bound >= inc_obj - opts.rel_gap * max(1.0, abs(inc_obj)):
            continue
        xb = sol.x[bins]
        k = _most_fractional(xb)
        if k is None:
            if bins.size:
                # re-solve with the binaries pinned so the incumbent is exactly integral
                try_assignment(xb, nodes)
            elif sol.objective < inc_obj:
                inc_x, inc_obj = sol.x, sol.objective
                trace.append((nodes, inc_obj))
            continue
        if opts.heuristic is not None:
            cand = opts.heuristic(sol.x)
            if cand is not None:
                try_assignment(cand, nodes)
        j = bins[k]
        for val in (np.floor(sol.x[j]), np.ceil(sol.x[j])):
            clb, cub = lb.copy(), ub.copy()
            clb[j] = cub[j] = val
            child = relax(clb, cub)
            nodes += 1
            if child.status != Status.OPTIMAL:
                continue
            if child.objective >= inc_obj - opts.rel_gap * max(1.0, abs(inc_obj)):
                continue
            counter += 1
            heapq.heappush(heap, (child.objective, counter, clb, cub, child))

    if status is None:
        # tree exhausted: incumbent is optimal
        best_bound = inc_obj
        status = Status.OPTIMAL if inc_x is not None else Status.INFEASIBLE
    else:
        best_bound = heap[0][0]
    if inc_x is None:
        return Solution(status, bound=best_bound, nodes=nodes)
    inc_x = inc_x.copy()
    inc_x[bins] = np.round(inc_x[bins])
    return Solution(
        status,
        x=inc_x,
        objective=float(inc_obj),
        max_violation=lp.violation(inc_x),
        bound=float(min(best_bound, inc_obj)),
        gap=relative_gap(inc_obj, min(best_bound, inc_obj)),
        nodes=nodes,
        incumbent_trace=tuple(trace),
    )
