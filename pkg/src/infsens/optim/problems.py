"""Problem and solution value objects shared by the LP, QP and MILP solvers."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np


class Status(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    TIME_LIMIT = "time_limit"
    GAP_REACHED = "gap_reached"


def _as_matrix(A, ncols):
    if A is None:
        return np.zeros((0, ncols))
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[1] != ncols:
        raise ValueError(f"constraint matrix has {A.shape[1]} columns, expected {ncols}")
    return A


def _as_vector(b, n, name):
    if b is None:
        return np.zeros(0)
    b = np.asarray(b, dtype=float).ravel()
    if b.shape[0] != n:
        raise ValueError(f"{name} has length {b.shape[0]}, expected {n}")
    return b


def _bounds(lb, ub, n):
    lb = np.full(n, -np.inf) if lb is None else np.asarray(lb, dtype=float).ravel().copy()
    ub = np.full(n, np.inf) if ub is None else np.asarray(ub, dtype=float).ravel().copy()
    if lb.shape != (n,) or ub.shape != (n,):
        raise ValueError("variable bounds must match the number of variables")
    if np.any(lb > ub):
        raise ValueError("lower bound exceeds upper bound")
    return lb, ub


@dataclass(frozen=True)
class LpProblem:
    """min c'x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  lb <= x <= ub.

    Rows of sense ``>=`` are expressed by negation; :func:`LpProblem.from_rows`
    does that bookkeeping.
    """

    c: np.ndarray
    A_ub: Optional[np.ndarray] = None
    b_ub: Optional[np.ndarray] = None
    A_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None
    lb: Optional[np.ndarray] = None
    ub: Optional[np.ndarray] = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).ravel()
        n = c.shape[0]
        A_ub = _as_matrix(self.A_ub, n)
        A_eq = _as_matrix(self.A_eq, n)
        b_ub = _as_vector(self.b_ub, A_ub.shape[0], "b_ub")
        b_eq = _as_vector(self.b_eq, A_eq.shape[0], "b_eq")
        lb, ub = _bounds(self.lb, self.ub, n)
        for arr in (c, A_ub, A_eq, b_ub, b_eq):
            if not np.all(np.isfinite(arr)):
                raise ValueError("LP coefficients must be finite")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A_ub", A_ub)
        object.__setattr__(self, "b_ub", b_ub)
        object.__setattr__(self, "A_eq", A_eq)
        object.__setattr__(self, "b_eq", b_eq)
        object.__setattr__(self, "lb", lb)
        object.__setattr__(self, "ub", ub)

    @property
    def n(self) -> int:
        return self.c.shape[0]

    @classmethod
    def from_rows(cls, c, A, senses, b, lb=None, ub=None) -> "LpProblem":
        """Build from rows with senses in {"<=", "=", ">="}."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.asarray(b, dtype=float).ravel()
        senses = list(senses)
        if len(senses) != A.shape[0] or b.shape[0] != A.shape[0]:
            raise ValueError("rows, senses and right-hand sides must agree")
        le = [i for i, s in enumerate(senses) if s == "<="]
        ge = [i for i, s in enumerate(senses) if s == ">="]
        eq = [i for i, s in enumerate(senses) if s == "="]
        bad = set(senses) - {"<=", ">=", "="}
        if bad:
            raise ValueError(f"unknown row sense(s) {sorted(bad)}")
        A_ub = np.vstack([A[le], -A[ge]]) if (le or ge) else None
        b_ub = np.concatenate([b[le], -b[ge]]) if (le or ge) else None
        A_eq = A[eq] if eq else None
        b_eq = b[eq] if eq else None
        return cls(c, A_ub, b_ub, A_eq, b_eq, lb, ub)

    def violation(self, x: np.ndarray) -> float:
        """Largest constraint or bound violation of ``x``."""
        v = [0.0]
        if self.A_ub.shape[0]:
            v.append(np.max(self.A_ub @ x - self.b_ub))
        if self.A_eq.shape[0]:
            v.append(np.max(np.abs(self.A_eq @ x - self.b_eq)))
        v.append(np.max(self.lb - x, initial=0.0))
        v.append(np.max(x - self.ub, initial=0.0))
        return float(max(v))


@dataclass(frozen=True)
class QpProblem:
    """min 1/2 x'Qx + c'x subject to the same constraint families as LpProblem."""

    Q: np.ndarray
    c: np.ndarray
    A_ub: Optional[np.ndarray] = None
    b_ub: Optional[np.ndarray] = None
    A_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None
    lb: Optional[np.ndarray] = None
    ub: Optional[np.ndarray] = None

    def __post_init__(self):
        lp = LpProblem(self.c, self.A_ub, self.b_ub, self.A_eq, self.b_eq, self.lb, self.ub)
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        if Q.shape != (lp.n, lp.n):
            raise ValueError(f"Q must be {lp.n}x{lp.n}")
        if not np.all(np.isfinite(Q)):
            raise ValueError("Q must be finite")
        if not np.allclose(Q, Q.T, atol=1e-12, rtol=0):
            raise ValueError("Q must be symmetric")
        Q = 0.5 * (Q + Q.T)
        if lp.n and np.linalg.eigvalsh(Q).min() < -1e-9 * max(1.0, np.abs(Q).max()):
            raise ValueError("Q is not positive semidefinite")
        object.__setattr__(self, "Q", Q)
        for name in ("c", "A_ub", "b_ub", "A_eq", "b_eq", "lb", "ub"):
            object.__setattr__(self, name, getattr(lp, name))

    @property
    def n(self) -> int:
        return self.c.shape[0]

    def objective(self, x: np.ndarray) -> float:
        return float(0.5 * x @ self.Q @ x + self.c @ x)

    def linear_part(self) -> LpProblem:
        return LpProblem(self.c, self.A_ub, self.b_ub, self.A_eq, self.b_eq, self.lb, self.ub)

    def violation(self, x: np.ndarray) -> float:
        return self.linear_part().violation(x)


@dataclass(frozen=True)
class MilpProblem:
    lp: LpProblem
    binaries: np.ndarray

    def __post_init__(self):
        idx = np.unique(np.asarray(self.binaries, dtype=int).ravel())
        if idx.size and (idx.min() < 0 or idx.max() >= self.lp.n):
            raise ValueError("binary index outside the variable range")
        object.__setattr__(self, "binaries", idx)


@dataclass(frozen=True)
class Solution:
    status: Status
    x: Optional[np.ndarray] = None
    objective: float = np.nan
    max_violation: float = np.nan
    bound: float = np.nan
    gap: float = np.nan
    dual_objective: float = np.nan
    kkt_residual: float = np.nan
    nodes: int = 0
    iterations: int = 0
    incumbent_trace: tuple = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return self.status in (Status.OPTIMAL, Status.GAP_REACHED)


def dump_lp(problem, binaries=()) -> str:
    """Render a problem in a plain LP-file-like text for cross-checking."""
    if isinstance(problem, MilpProblem):
        binaries = problem.binaries
        problem = problem.lp
    lines = []

    def term(coefs):
        parts = [f"{v:+.17g} x{j}" for j, v in enumerate(coefs) if v != 0.0]
        return " ".join(parts) if parts else "0"

    lines.append("Minimize")
    quad = getattr(problem, "Q", None)
    obj = " obj: " + term(problem.c)
    if quad is not None:
        qt = [
            f"{quad[i, j] * (1 if i == j else 2):+.17g} x{i} * x{j}"
            for i in range(quad.shape[0])
            for j in range(i, quad.shape[0])
            if quad[i, j] != 0.0
        ]
        if qt:
            obj += " + [ " + " ".join(qt) + " ] / 2"
    lines.append(obj)
    lines.append("Subject To")
    for i, (row, rhs) in enumerate(zip(problem.A_ub, problem.b_ub)):
        lines.append(f" ub{i}: {term(row)} <= {rhs:.17g}")
    for i, (row, rhs) in enumerate(zip(problem.A_eq, problem.b_eq)):
        lines.append(f" eq{i}: {term(row)} = {rhs:.17g}")
    lines.append("Bounds")
    for j, (lo, hi) in enumerate(zip(problem.lb, problem.ub)):
        lo_s = "-inf" if np.isneginf(lo) else f"{lo:.17g}"
        hi_s = "+inf" if np.isposinf(hi) else f"{hi:.17g}"
        lines.append(f" {lo_s} <= x{j} <= {hi_s}")
    if len(binaries):
        lines.append("Binary")
        lines.append(" " + " ".join(f"x{j}" for j in binaries))
    lines.append("End")
    return "\n".join(lines) + "\n"
