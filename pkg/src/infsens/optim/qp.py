"""Dense convex QP: primal-dual interior point followed by an active-set polish.

The interior-point phase (Mehrotra predictor-corrector) gets close to the
optimum robustly even when Q is singular; the polish step then identifies the
active constraints and solves the equality-constrained KKT system exactly, so
the returned point satisfies the KKT conditions to round-off rather than to
the barrier parameter.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla
from scipy.optimize import lsq_linear

from .lp import DEFAULT_TOL, maybe_dump, solve_lp
from .problems import LpProblem, QpProblem, Solution, Status


def _inequalities(p: QpProblem):
    n = p.n
    eye = np.eye(n)
    lo = np.isfinite(p.lb)
    hi = np.isfinite(p.ub)
    G = np.vstack([p.A_ub, -eye[lo], eye[hi]])
    h = np.concatenate([p.b_ub, -p.lb[lo], p.ub[hi]])
    return G, h


def kkt_residual(p: QpProblem, x, y, z, G=None, h=None) -> float:
    """Max-norm KKT residual: stationarity, primal/dual feasibility, complementarity.

    ``y`` are multipliers for the equalities and ``z >= 0`` for the rows of
    ``G x <= h`` (the inequalities followed by finite lower and upper bounds).
    """
    if G is None:
        G, h = _inequalities(p)
    stat = p.Q @ x + p.c + p.A_eq.T @ y + G.T @ z
    slack = h - G @ x
    parts = [np.max(np.abs(stat), initial=0.0)]
    parts.append(np.max(np.abs(p.A_eq @ x - p.b_eq), initial=0.0))
    parts.append(np.max(-slack, initial=0.0))
    parts.append(np.max(-z, initial=0.0))
    parts.append(np.max(np.abs(z * slack), initial=0.0))
    return float(max(parts))


def _step_to_boundary(v, dv):
    neg = dv < 0
    if not np.any(neg):
        return 1.0
    return float(min(1.0, np.min(-v[neg] / dv[neg])))


def _multipliers(p, Ga, x, meq):
    """Least-squares multipliers for fixed ``x``: free on equalities, >= 0 on ``Ga``."""
    M = np.hstack([p.A_eq.T, Ga.T])
    lo = np.concatenate([np.full(meq, -np.inf), np.zeros(Ga.shape[0])])
    r = lsq_linear(M, -(p.Q @ x + p.c), bounds=(lo, np.inf), method="bvls", tol=1e-14)
    return r.x[:meq], r.x[meq:]


def _polish(p, G, h, x, y, z, s, tol, rounds=8):
    """Guess the active set from the IPM iterate and solve the KKT system exactly."""
    n = p.n
    meq = p.A_eq.shape[0]
    active = z > s
    best = None
    if active.any():
        # first candidate: keep the interior-point primal, refit the multipliers
        yq, zq = _multipliers(p, G[active], x, meq)
        zfull = np.zeros(G.shape[0])
        zfull[active] = zq
        best = (kkt_residual(p, x, yq, zfull, G, h), x, yq, zfull)
        if best[0] <= tol * 1e-2:
            return best
    for _ in range(rounds):
        Ga = G[active]
        k = Ga.shape[0]
        K = np.zeros((n + meq + k, n + meq + k))
        K[:n, :n] = p.Q
        K[:n, n : n + meq] = p.A_eq.T
        K[:n, n + meq :] = Ga.T
        K[n : n + meq, :n] = p.A_eq
        K[n + meq :, :n] = Ga
        rhs = np.concatenate([-p.c, p.b_eq, h[active]])
        sol, *_ = np.linalg.lstsq(K, rhs, rcond=1e-13)
        xp = sol[:n]
        yp = sol[n : n + meq]
        zp = np.zeros(G.shape[0])
        zp[active] = sol[n + meq :]
        res = kkt_residual(p, xp, yp, zp, G, h)
        if res > tol and k:
            # degenerate active sets admit many multiplier vectors; lstsq may
            # return one with negative entries, so look for a sign-feasible one
            yq, zq = _multipliers(p, Ga, xp, meq)
            zfull = np.zeros(G.shape[0])
            zfull[active] = zq
            res_q = kkt_residual(p, xp, yq, zfull, G, h)
            if res_q < res:
                res, yp, zp = res_q, yq, zfull
        if best is None or res < best[0]:
            best = (res, xp, yp, zp)
        if res <= tol * 1e-2:
            break
        viol = (G @ xp - h) > tol * 1e-3
        negz = zp < -tol * 1e-3
        if not viol.any() and not negz.any():
            break
        active = (active | viol) & ~negz
    return best


def solve_qp(p: QpProblem, tol: float = DEFAULT_TOL, *, x0=None, max_iter: int = 200) -> Solution:
    """Minimize ``1/2 x'Qx + c'x`` over the problem's polyhedron.

    Parameters
    ----------
    p : QpProblem
    tol : float
        Target for the max-norm KKT residual of the returned point.
    x0 : array, optional
        Starting primal point, e.g. the solution of a cheaper surrogate.
    """
    maybe_dump(p, kind="qp")
    n = p.n
    G, h = _inequalities(p)
    A, b = p.A_eq, p.b_eq
    m, meq = G.shape[0], A.shape[0]

    feas = solve_lp(LpProblem(np.zeros(n), p.A_ub, p.b_ub, p.A_eq, p.b_eq, p.lb, p.ub), tol)
    if feas.status == Status.INFEASIBLE:
        return Solution(Status.INFEASIBLE)

    if m == 0:
        K = np.block([[p.Q, A.T], [A, np.zeros((meq, meq))]])
        sol, *_ = np.linalg.lstsq(K, np.concatenate([-p.c, b]), rcond=1e-13)
        x, y = sol[:n], sol[n:]
        res = kkt_residual(p, x, y, np.zeros(0), G, h)
        if res > tol * max(1.0, np.abs(p.c).max(initial=0.0)):
            return Solution(Status.UNBOUNDED)
        return Solution(
            Status.OPTIMAL, x=x, objective=p.objective(x), max_violation=p.violation(x),
            kkt_residual=res,
        )

    x = np.asarray(x0, dtype=float).copy() if x0 is not None else feas.x.copy()
    s = np.maximum(h - G @ x, 1.0)
    z = np.ones(m)
    y = np.zeros(meq)
    scale = max(1.0, np.abs(p.c).max(initial=0.0), np.abs(h).max(initial=0.0))
    eps = min(tol, 1e-9) * scale
    it = 0
    best = None  # (kkt residual, x, y, z, s) of the best iterate so far
    for it in range(1, max_iter + 1):
        rd = p.Q @ x + p.c + A.T @ y + G.T @ z
        rp = A @ x - b
        rs = G @ x + s - h
        mu = float(s @ z) / m
        res = kkt_residual(p, x, y, z, G, h)
        if best is None or res < best[0]:
            best = (res, x, y, z, s)
        if res <= 0.1 * tol:
            break
        if mu < 1e-3 * eps:
            break  # the barrier is spent; more steps only amplify round-off
        if np.abs(x).max() > 1e12:
            return Solution(Status.UNBOUNDED, iterations=it)
        # augmented Newton system; keeping s/z on the diagonal (instead of
        # forming Q + G'(z/s)G) avoids squaring the conditioning near the optimum
        N = n + meq + m
        K = np.zeros((N, N))
        K[:n, :n] = p.Q + 1e-13 * np.eye(n)
        K[:n, n : n + meq] = A.T
        K[:n, n + meq :] = G.T
        K[n : n + meq, :n] = A
        K[n : n + meq, n : n + meq] = -1e-13 * np.eye(meq)
        K[n + meq :, :n] = G
        K[n + meq :, n + meq :] = -np.diag(np.maximum(s / z, 1e-300))
        fac = sla.lu_factor(K, check_finite=False)

        def direction(rc):
            rhs = np.concatenate([-rd, -rp, -rs + rc / z])
            sol = sla.lu_solve(fac, rhs)
            dx, dy, dz = sol[:n], sol[n : n + meq], sol[n + meq :]
            ds = (-rc - s * dz) / z
            return dx, dy, ds, dz

        try:
            with np.errstate(all="ignore"):
                dx, dy, ds, dz = direction(s * z)
                a_aff = min(_step_to_boundary(s, ds), _step_to_boundary(z, dz))
                mu_aff = float((s + a_aff * ds) @ (z + a_aff * dz)) / m
                sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0
                dx, dy, ds, dz = direction(s * z + ds * dz - sigma * mu)
        except (ValueError, np.linalg.LinAlgError):
            break  # non-finite Newton system; fall back to the best iterate
        a = 0.99 * min(_step_to_boundary(s, ds), _step_to_boundary(z, dz))
        a = min(a, 1.0)
        if not (np.isfinite(a) and np.all(np.isfinite(dx)) and np.all(np.isfinite(dz))):
            break  # numerical breakdown near the optimum; fall back to the best iterate
        x = x + a * dx
        y = y + a * dy
        s = np.maximum(s + a * ds, 1e-300)
        z = np.maximum(z + a * dz, 1e-300)

    raw = kkt_residual(p, x, y, z, G, h)
    if best is not None and not (best[0] >= raw):
        raw, x, y, z, s = best
    polished = _polish(p, G, h, x, y, z, s, tol)
    if polished is not None and polished[0] < raw:
        raw, x, y, z = polished
    # optimal is only reported with a KKT certificate at the requested accuracy
    status = Status.OPTIMAL if raw <= tol else Status.TIME_LIMIT
    return Solution(
        status,
        x=x,
        objective=p.objective(x),
        max_violation=p.violation(x),
        kkt_residual=raw,
        iterations=it,
    )
