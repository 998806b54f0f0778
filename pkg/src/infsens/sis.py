"""Single-model linear sensors ``y = m'a + a0`` and their trainers."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .dataset import rmse
from .optim import LpProblem, MilpOptions, MilpProblem, solve_milp


class TrainingError(ValueError):
    pass


@dataclass(frozen=True)
class LinearModel:
    a: np.ndarray
    a0: float
    method: str = "olsr"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        a = np.array(self.a, dtype=float).ravel()
        if not (np.all(np.isfinite(a)) and math.isfinite(self.a0)):
            raise TrainingError("model parameters must be finite")
        a.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "a0", float(self.a0))

    @property
    def n_p(self) -> int:
        return self.a.shape[0]

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.a != 0.0)

    def to_dict(self) -> dict:
        return {"a": self.a.tolist(), "a0": self.a0, "method": self.method, "params": self.params}


@dataclass(frozen=True)
class LassoConfig:
    lam: float = 0.0
    refit: bool = True
    tol: float = 1e-8
    max_sweeps: int = 100_000

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")


@dataclass(frozen=True)
class SubsetConfig:
    n_p_tilde: int
    a_bar: Optional[float] = None
    mode: str = "enumerate"
    max_candidates: int = 10**6

    def __post_init__(self):
        if self.n_p_tilde < 1:
            raise ValueError("n_p_tilde must be >= 1")
        if self.a_bar is not None and self.a_bar <= 0:
            raise ValueError("a_bar must be positive")
        if self.mode not in ("enumerate", "miqp"):
            raise ValueError(f"unknown subset-selection mode {self.mode!r}")


@dataclass(frozen=True)
class ComponentConfig:
    n_pc: int

    def __post_init__(self):
        if self.n_pc < 1:
            raise ValueError("n_pc must be >= 1")


def _check_xy(X, y):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.shape[0]:
        raise TrainingError(f"{X.shape[0]} rows in X but {y.shape[0]} outputs")
    return X, y


def predict_linear(model: LinearModel, M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[None, :]
    if M.shape[1] != model.n_p:
        raise ValueError(f"model expects {model.n_p} inputs, got {M.shape[1]}")
    return M @ model.a + model.a0


def train_olsr(X, y, method: str = "olsr") -> LinearModel:
    """Least squares with offset. Requires more rows than inputs and full column rank."""
    X, y = _check_xy(X, y)
    n, n_p = X.shape
    if n <= n_p:
        raise TrainingError(f"OLSR needs more than {n_p} training rows, got {n}")
    A = np.column_stack([X, np.ones(n)])
    if np.linalg.matrix_rank(A) < n_p + 1:
        raise TrainingError(
            "regressor matrix is rank deficient; remove collinear or constant columns "
            "or add a small ridge term"
        )
    # centered solve is better conditioned than the augmented one
    xm, ym = X.mean(axis=0), y.mean()
    a, *_ = np.linalg.lstsq(X - xm, y - ym, rcond=None)
    return LinearModel(a, ym - xm @ a, method)


def _embed(n_p, cols, sub: LinearModel, method, params) -> LinearModel:
    a = np.zeros(n_p)
    a[list(cols)] = sub.a
    return LinearModel(a, sub.a0, method, params)


def lasso_objective(X, y, a, a0, lam) -> float:
    r = y - X @ a - a0
    return 0.5 * float(r @ r) + lam * float(np.abs(a).sum())


def lasso_threshold(X, y) -> float:
    """Smallest lambda for which the LASSO solution is all zeros."""
    X, y = _check_xy(X, y)
    Xc, yc = X - X.mean(axis=0), y - y.mean()
    # same per-column dot products as the first coordinate-descent sweep, so
    # lambda equal to the threshold gives exact zeros
    return float(max(abs(Xc[:, j] @ yc) for j in range(X.shape[1])))


def _lasso_cd(X, y, lam, tol, max_sweeps):
    """Cyclic coordinate descent with the offset profiled out by centering."""
    xm, ym = X.mean(axis=0), y.mean()
    Xc, yc = X - xm, y - ym
    sq = (Xc**2).sum(axis=0)
    a = np.zeros(X.shape[1])
    r = yc.copy()
    history = [lasso_objective(Xc, yc, a, 0.0, lam)]
    for _ in range(max_sweeps):
        delta = 0.0
        for j in range(X.shape[1]):
            if sq[j] == 0.0:
                continue
            rho = Xc[:, j] @ r + sq[j] * a[j]
            new = np.sign(rho) * max(abs(rho) - lam, 0.0) / sq[j]
            if new != a[j]:
                r -= Xc[:, j] * (new - a[j])
                delta = max(delta, abs(new - a[j]))
                a[j] = new
        history.append(lasso_objective(Xc, yc, a, 0.0, lam))
        if delta < tol:
            break
    return a, ym - xm @ a, history


def train_lasso(X, y, cfg: LassoConfig = LassoConfig()) -> LinearModel:
    X, y = _check_xy(X, y)
    a, a0, history = _lasso_cd(X, y, cfg.lam, cfg.tol, cfg.max_sweeps)
    params = {"lambda": cfg.lam, "refit": cfg.refit, "sweeps": len(history) - 1}
    if not cfg.refit:
        return LinearModel(a, a0, "lasso", params)
    support = np.flatnonzero(a)
    if support.size == 0:
        return LinearModel(np.zeros(X.shape[1]), float(y.mean()), "lasso", params)
    return _embed(X.shape[1], support, train_olsr(X[:, support], y), "lasso", params)


def lasso_path_history(X, y, lam, tol=1e-8, max_sweeps=100_000):
    """Objective value after every coordinate-descent sweep (for monotonicity checks)."""
    X, y = _check_xy(X, y)
    return _lasso_cd(X, y, lam, tol, max_sweeps)[2]


def _centered_rank(X):
    return int(np.linalg.matrix_rank(X - X.mean(axis=0)))


def train_pcr(X, y, cfg: ComponentConfig) -> LinearModel:
    """Regress on the leading principal-component scores, fold back to inputs."""
    X, y = _check_xy(X, y)
    rank = _centered_rank(X)
    if cfg.n_pc > rank:
        raise TrainingError(f"n_pc={cfg.n_pc} exceeds the rank {rank} of the centered inputs")
    xm, ym = X.mean(axis=0), y.mean()
    Xc = X - xm
    _, _, Vt = np.linalg.svd(Xc, full_matrices=False)
    V = Vt[: cfg.n_pc].T
    T = Xc @ V
    b, *_ = np.linalg.lstsq(T, y - ym, rcond=None)
    a = V @ b
    return LinearModel(a, ym - xm @ a, "pcr", {"n_pc": cfg.n_pc})


def pls_weights(X, y, n_pc):
    """PLS1 by deflation; returns weights W, loadings P and y-loadings q."""
    Xk = X - X.mean(axis=0)
    yk = y - y.mean()
    n_p = X.shape[1]
    W = np.zeros((n_p, n_pc))
    P = np.zeros((n_p, n_pc))
    q = np.zeros(n_pc)
    for k in range(n_pc):
        # with a single output the dominant singular vector of X'y is X'y itself,
        # so no inner power iteration is needed
        w = Xk.T @ yk
        nw = np.linalg.norm(w)
        if nw < 1e-10:
            raise TrainingError(f"no covariance left with y after {k} components")
        w /= nw
        t = Xk @ w
        tt = t @ t
        P[:, k] = Xk.T @ t / tt
        q[k] = yk @ t / tt
        W[:, k] = w
        Xk = Xk - np.outer(t, P[:, k])
        yk = yk - q[k] * t
    return W, P, q


def train_plsr(X, y, cfg: ComponentConfig) -> LinearModel:
    X, y = _check_xy(X, y)
    rank = _centered_rank(X)
    if cfg.n_pc > rank:
        raise TrainingError(f"n_pc={cfg.n_pc} exceeds the rank {rank} of the centered inputs")
    W, P, q = pls_weights(X, y, cfg.n_pc)
    a = W @ np.linalg.solve(P.T @ W, q)
    return LinearModel(a, y.mean() - X.mean(axis=0) @ a, "plsr", {"n_pc": cfg.n_pc})


def default_a_bar(X, y) -> float:
    """Coefficient bound: ten times the largest OLSR coefficient (at least 1)."""
    try:
        m = train_olsr(X, y)
        return float(max(10.0 * np.abs(m.a).max(initial=0.0), 1.0))
    except TrainingError:
        return 10.0


def _sse(X, y, model):
    r = y - predict_linear(model, X)
    return float(r @ r)


def train_subset_selection(X, y, cfg: SubsetConfig) -> LinearModel:
    """Best ``n_p_tilde``-input sensor, exhaustively or through the MILP surrogate."""
    X, y = _check_xy(X, y)
    n, n_p = X.shape
    if cfg.n_p_tilde > n_p:
        raise TrainingError(f"n_p_tilde={cfg.n_p_tilde} exceeds n_p={n_p}")
    if cfg.mode == "enumerate":
        total = math.comb(n_p, cfg.n_p_tilde)
        if total > cfg.max_candidates:
            raise TrainingError(f"{total} candidate supports exceed the enumeration limit")
        best = None
        for cols in itertools.combinations(range(n_p), cfg.n_p_tilde):
            try:
                m = train_olsr(X[:, cols], y)
            except TrainingError:
                continue
            s = _sse(X[:, cols], y, m)
            if best is None or s < best[0]:
                best = (s, cols, m)
        if best is None:
            raise TrainingError("no candidate support admits an OLSR fit")
        _, cols, m = best
        return _embed(n_p, cols, m, "ss", {"n_p_tilde": cfg.n_p_tilde, "mode": "enumerate",
                                           "support": list(cols), "candidates": total})
    cols = _subset_milp(X, y, cfg)
    m = train_olsr(X[:, cols], y)
    return _embed(n_p, cols, m, "ss", {"n_p_tilde": cfg.n_p_tilde, "mode": "miqp", "support": list(cols)})


def _subset_milp(X, y, cfg: SubsetConfig):
    """Pick the support with an absolute-error surrogate solved as a MILP.

    Variables: a (n_p), a0, t (n residual epigraphs), z (n_p binaries).
    """
    n, n_p = X.shape
    a_bar = cfg.a_bar if cfg.a_bar is not None else default_a_bar(X, y)
    nv = n_p + 1 + n + n_p
    ia, i0, it, iz = 0, n_p, n_p + 1, n_p + 1 + n
    c = np.zeros(nv)
    c[it:iz] = 1.0
    rows, rhs = [], []
    for i in range(n):
        # y - Xa - a0 <= t   and   -(y - Xa - a0) <= t
        r = np.zeros(nv)
        r[ia:i0] = -X[i]
        r[i0] = -1.0
        r[it + i] = -1.0
        rows.append(r)
        rhs.append(-y[i])
        r = np.zeros(nv)
        r[ia:i0] = X[i]
        r[i0] = 1.0
        r[it + i] = -1.0
        rows.append(r)
        rhs.append(y[i])
    for k in range(n_p):
        r = np.zeros(nv)
        r[ia + k] = 1.0
        r[iz + k] = -a_bar
        rows.append(r)
        rhs.append(0.0)
        r = np.zeros(nv)
        r[ia + k] = -1.0
        r[iz + k] = -a_bar
        rows.append(r)
        rhs.append(0.0)
    card = np.zeros(nv)
    card[iz:] = 1.0
    lb = np.concatenate([np.full(n_p, -a_bar), [-np.inf], np.zeros(n), np.zeros(n_p)])
    ub = np.concatenate([np.full(n_p, a_bar), [np.inf], np.full(n, np.inf), np.ones(n_p)])
    lp = LpProblem(c, np.array(rows), np.array(rhs), card[None, :], [cfg.n_p_tilde], lb, ub)
    sol = solve_milp(MilpProblem(lp, np.arange(iz, nv)), MilpOptions(time_limit=120.0))
    if sol.x is None:
        raise TrainingError(f"subset-selection MILP returned {sol.status.value}")
    z = sol.x[iz:]
    return tuple(int(k) for k in np.argsort(-z, kind="stable")[: cfg.n_p_tilde])


@dataclass
class CVResult:
    best: object
    table: list


def kfold_indices(n, folds, seed):
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(part) for part in np.array_split(perm, folds)]


def cross_validate(
    trainer: Callable[[np.ndarray, np.ndarray, object], LinearModel],
    X,
    y,
    grid: Sequence,
    folds: int = 5,
    seed: int = 0,
    simpler: str = "smaller",
) -> CVResult:
    """k-fold CV over ``grid``; returns the value with the lowest mean validation RMSE.

    ``simpler`` says which end of the grid is the simpler model for breaking
    ties: ``"smaller"`` for component or input counts, ``"larger"`` for
    penalty weights such as lambda.
    """
    X, y = _check_xy(X, y)
    grid = list(grid)
    if not grid:
        raise ValueError("empty hyperparameter grid")
    if folds < 2:
        raise ValueError("need at least two folds")
    parts = kfold_indices(y.shape[0], folds, seed)
    for k, val in enumerate(parts):
        if y.shape[0] - val.size < 2:
            raise TrainingError(f"fold {k} leaves fewer than 2 training rows")
    table = []
    for value in grid:
        errs = []
        try:
            for val in parts:
                tr = np.setdiff1d(np.arange(y.shape[0]), val)
                m = trainer(X[tr], y[tr], value)
                errs.append(rmse(y[val], predict_linear(m, X[val])))
        except TrainingError as exc:
            # e.g. more components than a fold's rank: the value is not selectable
            table.append({"value": value, "cv_rmse": float("inf"), "fold_rmse": [], "error": str(exc)})
            continue
        table.append({"value": value, "cv_rmse": float(np.mean(errs)), "fold_rmse": errs})
    if all(not np.isfinite(row["cv_rmse"]) for row in table):
        raise TrainingError(f"every grid value was rejected by the trainer: {table[0]['error']}")
    order = sorted(range(len(grid)), key=lambda i: grid[i], reverse=(simpler == "larger"))
    best_i = order[0]
    for i in order[1:]:
        if table[i]["cv_rmse"] < table[best_i]["cv_rmse"] - 1e-12 * max(1.0, table[best_i]["cv_rmse"]):
            best_i = i
    return CVResult(grid[best_i], table)
