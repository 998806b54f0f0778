"""Two-model (switching) sensors.

Three trainers:

* ``train_mis_sota``: k-means labels, SVM boundary, per-class OLSR.
* ``train_mis_con``: boundary and both models from one convex QP with the
  labels fixed; the equalities ``a1 - a2 = w``, ``a01 - a02 = w0`` make the
  two model surfaces meet exactly on the switching hyperplane.
* ``train_mis_con_lab``: the labels become binaries of a MILP (absolute
  errors, 1-norm on ``w``, big-M gating), then the chosen labels are refit
  with ``train_mis_con``.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .classify import Hyperplane, train_linear_svm
from .dataset import NormalizationState, rmse
from .labeling import Labels, kmeans_label
from .optim import (
    LpProblem,
    MilpOptions,
    MilpProblem,
    QpProblem,
    Status,
    solve_lp,
    solve_milp,
    solve_qp,
)
from .sis import LinearModel, TrainingError, default_a_bar, predict_linear, train_olsr


@dataclass(frozen=True)
class MisConfig:
    # defaults calibrated on the normalized PCT benchmark; see README
    alpha: float = 1e-3
    beta: float = 0.07
    big_m: Optional[float] = None
    a_bar: Optional[float] = None
    rel_gap: float = 1e-6
    time_limit: float = 300.0
    node_limit: Optional[int] = 50
    min_class_size: int = 2
    local_search: bool = True
    multistart: int = 32
    multistart_keep: int = 3
    svm_beta: float = 1.0
    kmeans_restarts: int = 10
    kmeans_max_iter: int = 300
    seed: int = 0

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be positive")
        if self.big_m is not None and self.big_m <= 0:
            raise ValueError("big_m must be positive")


@dataclass(frozen=True)
class MultiModel:
    model1: LinearModel
    model2: LinearModel
    boundary: Hyperplane
    labels: Labels
    method: str
    objective: float = float("nan")
    meta: dict = field(default_factory=dict)
    normalization: Optional[NormalizationState] = None

    def __post_init__(self):
        n_p = self.model1.n_p
        if self.model2.n_p != n_p or self.boundary.w.shape[0] != n_p:
            raise ValueError("models and boundary disagree on the input dimension")

    @property
    def n_p(self) -> int:
        return self.model1.n_p

    def continuity_residual(self) -> tuple[float, float]:
        """(max |(a1 - a2) - w|, |(a01 - a02) - w0|)."""
        dv = float(np.max(np.abs(self.model1.a - self.model2.a - self.boundary.w)))
        d0 = abs(self.model1.a0 - self.model2.a0 - self.boundary.w0)
        return dv, d0

    def swapped(self) -> "MultiModel":
        """Same sensor with class tags exchanged."""
        lab = Labels(3 - self.labels.assignment, 2, self.labels.inertia)
        return replace(
            self,
            model1=self.model2,
            model2=self.model1,
            boundary=Hyperplane(-self.boundary.w, -self.boundary.w0),
            labels=lab,
        )

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "a1": self.model1.a.tolist(),
            "a01": self.model1.a0,
            "a2": self.model2.a.tolist(),
            "a02": self.model2.a0,
            "w": self.boundary.w.tolist(),
            "w0": self.boundary.w0,
            "labels": self.labels.assignment.tolist(),
            "normalization": self.normalization.to_dict() if self.normalization else None,
            "meta": {"objective": self.objective, **self.meta},
        }

    def to_json(self) -> str:
        from .dataset import _jsonable

        return json.dumps(_jsonable(self.to_dict()), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "MultiModel":
        meta = dict(d.get("meta") or {})
        objective = meta.pop("objective", None)
        norm = d.get("normalization")
        return cls(
            LinearModel(d["a1"], d["a01"], d["method"]),
            LinearModel(d["a2"], d["a02"], d["method"]),
            Hyperplane(d["w"], d["w0"]),
            Labels(d["labels"], 2),
            d["method"],
            float("nan") if objective is None else float(objective),
            meta,
            NormalizationState.from_dict(norm) if norm else None,
        )

    @classmethod
    def from_json(cls, text: str) -> "MultiModel":
        return cls.from_dict(json.loads(text))


def predict_mis(mm: MultiModel, M) -> np.ndarray:
    """Switch per row: model 1 where ``m'w + w0 >= 0``, model 2 elsewhere."""
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[None, :]
    cls = mm.boundary.classify(M)
    return np.where(cls == 1, predict_linear(mm.model1, M), predict_linear(mm.model2, M))


def continuity_gap(mm: MultiModel, probes: int = 1000, seed: int = 0, box=None) -> float:
    """Largest disagreement of the two models on the switching hyperplane.

    Points are drawn uniformly in ``box`` (default: the training bounding box
    stored on the model) and projected onto the hyperplane.
    """
    if probes < 1:
        raise ValueError("probes must be >= 1")
    w, w0 = mm.boundary.w, mm.boundary.w0
    nw = float(w @ w)
    if nw == 0.0:
        return 0.0  # no switching surface
    if box is None:
        box = mm.meta.get("box") or (np.zeros(mm.n_p).tolist(), np.ones(mm.n_p).tolist())
    lo, hi = (np.asarray(b, dtype=float) for b in box)
    P = np.random.default_rng(seed).uniform(lo, hi, size=(probes, mm.n_p))
    P = P - np.outer((P @ w + w0) / nw, w)
    return float(np.max(np.abs(predict_linear(mm.model1, P) - predict_linear(mm.model2, P))))


def _box(X):
    return (X.min(axis=0).tolist(), X.max(axis=0).tolist())


def _rmse_meta(mm, X, y, z):
    yhat = predict_mis(mm, X)
    out = {"rmse_train": rmse(y, yhat)}
    for j, mdl in ((1, mm.model1), (2, mm.model2)):
        rows = z == (1 if j == 1 else 0)
        out[f"rmse_model{j}"] = rmse(y[rows], predict_linear(mdl, X[rows])) if rows.any() else None
    return out


def _xy(X, y):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return X, np.asarray(y, dtype=float).ravel()


# ---------------------------------------------------------------- state of the art


def train_mis_sota(X, y, k: int = 2, cfg: MisConfig = MisConfig(), labels: Optional[Labels] = None) -> MultiModel:
    """k-means labeling, SVM boundary, OLSR per class; no continuity guarantee."""
    X, y = _xy(X, y)
    if k != 2:
        raise NotImplementedError("only two-model sensors are supported")
    if labels is None:
        labels = kmeans_label(X, k, cfg.seed, cfg.kmeans_restarts, cfg.kmeans_max_iter)
    sizes = labels.sizes()
    need = X.shape[1] + 2
    if np.any(sizes < need):
        raise TrainingError(f"class sizes {sizes.tolist()}: each class needs at least {need} rows for OLSR")
    svm = train_linear_svm(X, labels, cfg.svm_beta)
    z = labels.z
    m1 = train_olsr(X[z == 1], y[z == 1])
    m2 = train_olsr(X[z == 0], y[z == 0])
    mm = MultiModel(m1, m2, svm.hyperplane, labels, "sota", svm.objective, {"box": _box(X)})
    return replace(mm, meta={**mm.meta, **_rmse_meta(mm, X, y, z)})


# ---------------------------------------------------------------- continuous (fixed labels)

# Variable layout shared by the fixed-label problems:
#   a1 (p) | a01 | a2 (p) | a02 | w (p) | w0 | ...


def _slices(p):
    a1 = slice(0, p)
    a01 = p
    a2 = slice(p + 1, 2 * p + 1)
    a02 = 2 * p + 1
    w = slice(2 * p + 2, 3 * p + 2)
    w0 = 3 * p + 2
    return a1, a01, a2, a02, w, w0


def _continuity_rows(p, nv):
    a1, a01, a2, a02, w, w0 = _slices(p)
    E = np.zeros((p + 1, nv))
    for k in range(p):
        E[k, a1.start + k] = 1.0
        E[k, a2.start + k] = -1.0
        E[k, w.start + k] = -1.0
    E[p, a01] = 1.0
    E[p, a02] = -1.0
    E[p, w0] = -1.0
    return E


def build_con_qp(X, y, z, alpha: float, beta: float) -> QpProblem:
    """Fixed-label QP: SSE1 + SSE2 + alpha ||w||^2 + beta sum(e).

    Variables ``a1, a01, a2, a02, w, w0, e``; margin rows
    ``(2z_i - 1)(m_i'w + w0) >= 1 - e_i`` and the continuity equalities.
    """
    X, y = _xy(X, y)
    n, p = X.shape
    z = np.asarray(z, dtype=float)
    a1, a01, a2, a02, w, w0 = _slices(p)
    ne = 3 * p + 3
    nv = ne + n
    A1 = np.column_stack([X, np.ones(n)])
    Q = np.zeros((nv, nv))
    c = np.zeros(nv)
    for rows, start in ((z == 1, 0), (z == 0, p + 1)):
        Ak = A1[rows]
        Q[start : start + p + 1, start : start + p + 1] = 2.0 * Ak.T @ Ak
        c[start : start + p + 1] = -2.0 * Ak.T @ y[rows]
    Q[w, w] = 2.0 * alpha * np.eye(p)
    c[ne:] = beta
    sgn = 2.0 * z - 1.0
    A_ub = np.zeros((n, nv))
    A_ub[:, w] = -sgn[:, None] * X
    A_ub[:, w0] = -sgn
    A_ub[:, ne:] = -np.eye(n)
    lb = np.concatenate([np.full(ne, -np.inf), np.zeros(n)])
    return QpProblem(Q, c, A_ub, -np.ones(n), _continuity_rows(p, nv), np.zeros(p + 1), lb)


def build_fixed_label_lp(X, y, z, alpha: float, beta: float, a_bar: Optional[float] = None, offset_bound=None) -> LpProblem:
    """Fixed-label LP: SAE1 + SAE2 + alpha ||w||_1 + beta sum(e).

    Built directly (no big-M). Layout ``a1, a01, a2, a02, w, w0, u (|w|), e, t``
    with one absolute-error epigraph variable ``t_i`` per row for its own model.
    Optional coefficient box ``|a| <= a_bar`` and ``|a0| <= offset_bound``.
    """
    X, y = _xy(X, y)
    n, p = X.shape
    z = np.asarray(z, dtype=float)
    a1, a01, a2, a02, w, w0 = _slices(p)
    iu = 3 * p + 3
    ie = iu + p
    it = ie + n
    nv = it + n
    c = np.zeros(nv)
    c[iu:ie] = alpha
    c[ie:it] = beta
    c[it:] = 1.0
    rows = np.zeros((4 * n + 2 * p, nv))
    rhs = np.zeros(4 * n + 2 * p)
    r = 0
    for i in range(n):
        sl, off = (a1, a01) if z[i] == 1 else (a2, a02)
        # +-(y_i - m_i'a - a0) <= t_i
        rows[r, sl] = -X[i]
        rows[r, off] = -1.0
        rows[r, it + i] = -1.0
        rhs[r] = -y[i]
        rows[r + 1, sl] = X[i]
        rows[r + 1, off] = 1.0
        rows[r + 1, it + i] = -1.0
        rhs[r + 1] = y[i]
        s = 2.0 * z[i] - 1.0
        rows[r + 2, w] = -s * X[i]
        rows[r + 2, w0] = -s
        rows[r + 2, ie + i] = -1.0
        rhs[r + 2] = -1.0
        r += 3
    for k in range(p):
        rows[r, w.start + k] = 1.0
        rows[r, iu + k] = -1.0
        rows[r + 1, w.start + k] = -1.0
        rows[r + 1, iu + k] = -1.0
        r += 2
    rows, rhs = rows[:r], rhs[:r]
    lb = np.full(nv, -np.inf)
    ub = np.full(nv, np.inf)
    lb[iu:] = 0.0
    if a_bar is not None:
        for sl, off in ((a1, a01), (a2, a02)):
            lb[sl], ub[sl] = -a_bar, a_bar
            lb[off], ub[off] = -offset_bound, offset_bound
    return LpProblem(c, rows, rhs, _continuity_rows(p, nv), np.zeros(p + 1), lb, ub)


def _unpack(x, p):
    a1, a01, a2, a02, w, w0 = _slices(p)
    return x[a1].copy(), float(x[a01]), x[a2].copy(), float(x[a02]), x[w].copy(), float(x[w0])


def train_mis_con(X, y, labels: Labels, cfg: MisConfig = MisConfig(), method: str = "con") -> MultiModel:
    """Continuous two-model sensor for fixed labels (LP warm start, then the SSE QP)."""
    X, y = _xy(X, y)
    n, p = X.shape
    if labels.k != 2 or labels.assignment.shape[0] != n:
        raise TrainingError("need a two-class label per training row")
    sizes = labels.sizes()
    if np.any(sizes < 1):
        raise TrainingError(f"class sizes {sizes.tolist()}: both classes must be nonempty")
    z = labels.z
    stage1 = solve_lp(build_fixed_label_lp(X, y, z, cfg.alpha, cfg.beta))
    x0 = None
    if stage1.status == Status.OPTIMAL:
        a1v, a01v, a2v, a02v, wv, w0v = _unpack(stage1.x, p)
        sgn = 2.0 * z - 1.0
        e0 = np.maximum(0.0, 1.0 - sgn * (X @ wv + w0v)) + 1.0
        x0 = np.concatenate([a1v, [a01v], a2v, [a02v], wv, [w0v], e0])
    qp = build_con_qp(X, y, z, cfg.alpha, cfg.beta)
    sol = solve_qp(qp, x0=x0)
    if sol.status != Status.OPTIMAL:
        raise RuntimeError(f"continuous MIS QP ended with status {sol.status.value} (internal error)")
    a1v, a01v, a2v, a02v, wv, w0v = _unpack(sol.x, p)
    mm = MultiModel(
        LinearModel(a1v, a01v, method),
        LinearModel(a2v, a02v, method),
        Hyperplane(wv, w0v),
        labels,
        method,
        sol.objective,
        {
            "box": _box(X),
            "kkt_residual": sol.kkt_residual,
            "qp_status": sol.status.value,
            "stage1_objective": stage1.objective if stage1.status == Status.OPTIMAL else None,
        },
    )
    return replace(mm, meta={**mm.meta, **_rmse_meta(mm, X, y, z)})


# ---------------------------------------------------------------- optimized labeling


@dataclass(frozen=True)
class LabelMilp:
    problem: MilpProblem
    n: int
    p: int
    big_m: float
    a_bar: float
    offset_bound: float

    @property
    def iz(self) -> int:
        return self.problem.lp.n - self.n

    def labels_from(self, x) -> np.ndarray:
        return np.round(x[self.iz :])


def big_m_bounds(X, y, a_bar: float):
    """Offset bound and a big-M valid for every residual and margin row."""
    mx = float(np.abs(X).sum(axis=1).max())
    my = float(np.abs(y).max())
    b0 = my + a_bar * mx + 1.0
    m_res = my + a_bar * mx + b0
    m_margin = 1.0 + 2.0 * a_bar * mx + 2.0 * b0
    return b0, max(m_res, m_margin)


def build_con_lab_milp(X, y, alpha: float, beta: float, a_bar: Optional[float] = None, big_m: Optional[float] = None) -> LabelMilp:
    """Labels-as-binaries MILP.

    Layout ``a1, a01, a2, a02, w, w0, u (|w|), e, t1, t2, z``. For row i:

    * ``t1_i >= +-(y_i - m_i'a1 - a01) - M (1 - z_i)``
    * ``t2_i >= +-(y_i - m_i'a2 - a02) - M z_i``
    * ``m_i'w + w0 >= 1 - e_i - M (1 - z_i)``  and  ``-(m_i'w + w0) >= 1 - e_i - M z_i``

    plus ``u >= |w|`` and the continuity equalities. Coefficients are boxed by
    ``a_bar`` so that the big-M constant is provably valid.
    """
    X, y = _xy(X, y)
    n, p = X.shape
    a_bar = a_bar if a_bar is not None else default_a_bar(X, y)
    b0, m_auto = big_m_bounds(X, y, a_bar)
    M = float(big_m) if big_m is not None else m_auto
    a1, a01, a2, a02, w, w0 = _slices(p)
    iu = 3 * p + 3
    ie = iu + p
    it1 = ie + n
    it2 = it1 + n
    iz = it2 + n
    nv = iz + n
    c = np.zeros(nv)
    c[iu:ie] = alpha
    c[ie:it1] = beta
    c[it1:iz] = 1.0
    A = np.zeros((6 * n + 2 * p, nv))
    b = np.zeros(6 * n + 2 * p)
    r = 0
    for i in range(n):
        m = X[i]
        # model 1 epigraph, active when z_i = 1
        A[r, a1], A[r, a01], A[r, it1 + i], A[r, iz + i], b[r] = -m, -1.0, -1.0, M, M - y[i]
        A[r + 1, a1], A[r + 1, a01], A[r + 1, it1 + i], A[r + 1, iz + i], b[r + 1] = m, 1.0, -1.0, M, M + y[i]
        # model 2 epigraph, active when z_i = 0
        A[r + 2, a2], A[r + 2, a02], A[r + 2, it2 + i], A[r + 2, iz + i], b[r + 2] = -m, -1.0, -1.0, -M, -y[i]
        A[r + 3, a2], A[r + 3, a02], A[r + 3, it2 + i], A[r + 3, iz + i], b[r + 3] = m, 1.0, -1.0, -M, y[i]
        # margin rows
        A[r + 4, w], A[r + 4, w0], A[r + 4, ie + i], A[r + 4, iz + i], b[r + 4] = -m, -1.0, -1.0, M, M - 1.0
        A[r + 5, w], A[r + 5, w0], A[r + 5, ie + i], A[r + 5, iz + i], b[r + 5] = m, 1.0, -1.0, -M, -1.0
        r += 6
    for k in range(p):
        A[r, w.start + k], A[r, iu + k] = 1.0, -1.0
        A[r + 1, w.start + k], A[r + 1, iu + k] = -1.0, -1.0
        r += 2
    lb = np.full(nv, -np.inf)
    ub = np.full(nv, np.inf)
    for sl, off in ((a1, a01), (a2, a02)):
        lb[sl], ub[sl] = -a_bar, a_bar
        lb[off], ub[off] = -b0, b0
    lb[iu:] = 0.0
    ub[iz:] = 1.0
    lp = LpProblem(c, A, b, _continuity_rows(p, nv), np.zeros(p + 1), lb, ub)
    return LabelMilp(MilpProblem(lp, np.arange(iz, nv)), n, p, M, a_bar, b0)


def labeling_objective(X, y, z, alpha, beta, a_bar=None, offset_bound=None) -> float:
    """Optimal labeling-MILP objective for a fixed labeling (one LP)."""
    sol = solve_lp(build_fixed_label_lp(X, y, z, alpha, beta, a_bar, offset_bound))
    if sol.status != Status.OPTIMAL:
        raise RuntimeError(f"fixed-label LP ended with status {sol.status.value}")
    return sol.objective


def best_labels_for(X, y, x, p, beta):
    """Per-row label minimizing the row's cost for fixed continuous parameters."""
    a1v, a01v, a2v, a02v, wv, w0v = _unpack(x, p)
    s = X @ wv + w0v
    cost1 = np.abs(y - X @ a1v - a01v) + beta * np.maximum(0.0, 1.0 - s)
    cost2 = np.abs(y - X @ a2v - a02v) + beta * np.maximum(0.0, 1.0 + s)
    return (cost1 <= cost2).astype(float)


def label_local_search(X, y, z, cfg: MisConfig, a_bar, offset_bound, max_rounds: int = 50):
    """Alternate between the fixed-label LP and the per-row label update.

    Each half-step minimizes the labeling objective over one block, so the
    objective never increases.
    """
    X, y = _xy(X, y)
    p = X.shape[1]
    z = np.asarray(z, dtype=float).copy()
    best = solve_lp(build_fixed_label_lp(X, y, z, cfg.alpha, cfg.beta, a_bar, offset_bound))
    history = [best.objective]
    for _ in range(max_rounds):
        z_new = best_labels_for(X, y, best.x, p, cfg.beta)
        if np.array_equal(z_new, z):
            break
        sol = solve_lp(build_fixed_label_lp(X, y, z_new, cfg.alpha, cfg.beta, a_bar, offset_bound))
        if sol.status != Status.OPTIMAL or sol.objective >= best.objective - 1e-12:
            break
        z, best = z_new, sol
        history.append(best.objective)
    return z, best.objective, history


def max_affine_starts(X, y, starts: int, seed: int = 0, max_iter: int = 30):
    """Candidate labelings from alternating least squares on ``max(f1, f2)``.

    Each start splits the rows by a random hyperplane, then alternates between
    per-class OLSR and reassigning every row to the larger of the two models,
    which is how a continuous two-model sensor switches. Returns distinct
    labelings ordered by training SSE of the max-affine fit.
    """
    X, y = _xy(X, y)
    n, p = X.shape
    rng = np.random.default_rng(seed)
    A1 = np.column_stack([X, np.ones(n)])
    found = {}
    for _ in range(starts):
        d = rng.normal(size=p)
        s = X @ d
        z = s >= np.quantile(s, rng.uniform(0.1, 0.9))
        for _ in range(max_iter):
            if z.sum() < p + 1 or (~z).sum() < p + 1:
                break
            c1, *_ = np.linalg.lstsq(A1[z], y[z], rcond=None)
            c2, *_ = np.linalg.lstsq(A1[~z], y[~z], rcond=None)
            f1, f2 = A1 @ c1, A1 @ c2
            z_new = f1 >= f2
            if np.array_equal(z_new, z):
                break
            z = z_new
        if z.sum() < p + 1 or (~z).sum() < p + 1:
            continue
        sse = float(((np.maximum(f1, f2) - y) ** 2).sum())
        key = z.tobytes()
        if key not in found or sse < found[key][0]:
            found[key] = (sse, z.astype(float))
    return [z for _, z in sorted(found.values(), key=lambda t: t[0])]


def train_mis_con_lab(X, y, cfg: MisConfig = MisConfig(), warm: Optional[MultiModel] = None) -> MultiModel:
    """Optimize the labeling by MILP, then refit the fixed labels with the SSE QP.

    Without ``warm``, the chain k-means -> ``train_mis_con`` provides the warm
    start. If the optimized labeling leaves a class smaller than
    ``cfg.min_class_size``, a single OLSR model is returned (with a warning)
    wrapped as a degenerate two-model sensor.
    """
    X, y = _xy(X, y)
    n, p = X.shape
    if warm is None:
        labels0 = kmeans_label(X, 2, cfg.seed, cfg.kmeans_restarts, cfg.kmeans_max_iter)
        warm = train_mis_con(X, y, labels0, cfg)
    lm = build_con_lab_milp(X, y, cfg.alpha, cfg.beta, cfg.a_bar, cfg.big_m)
    z_warm = warm.labels.z
    warm_obj = labeling_objective(X, y, z_warm, cfg.alpha, cfg.beta, lm.a_bar, lm.offset_bound)
    z_start, start_obj = z_warm, warm_obj
    ls_hist = [warm_obj]
    if cfg.local_search:
        z_start, start_obj, ls_hist = label_local_search(X, y, z_warm, cfg, lm.a_bar, lm.offset_bound)
    starts = max_affine_starts(X, y, cfg.multistart, cfg.seed)[: cfg.multistart_keep] if cfg.multistart else []
    for z0 in starts:
        if cfg.local_search:
            zc, oc, _ = label_local_search(X, y, z0, cfg, lm.a_bar, lm.offset_bound)
        else:
            zc, oc = z0, labeling_objective(X, y, z0, cfg.alpha, cfg.beta, lm.a_bar, lm.offset_bound)
        if oc < start_obj - 1e-12:
            z_start, start_obj = zc, oc

    def heuristic(x):
        return best_labels_for(X, y, x, p, cfg.beta)

    sol = solve_milp(
        lm.problem,
        MilpOptions(
            rel_gap=cfg.rel_gap,
            time_limit=cfg.time_limit,
            node_limit=cfg.node_limit,
            warm_start=z_start,
            heuristic=heuristic,
        ),
    )
    if sol.x is None:
        raise TrainingError(f"labeling MILP found no incumbent ({sol.status.value}); best bound {sol.bound}")
    z_star = lm.labels_from(sol.x)
    milp_meta = {
        "milp_status": sol.status.value,
        "milp_objective": sol.objective,
        "milp_bound": sol.bound,
        "milp_gap": sol.gap,
        "milp_nodes": sol.nodes,
        "warm_objective": warm_obj,
        "local_search_objective": start_obj,
        "start_objective": start_obj,
        "local_search_rounds": len(ls_hist) - 1,
        "big_m": lm.big_m,
        "a_bar": lm.a_bar,
    }
    labels = Labels.from_z(z_star)
    sizes = labels.sizes()
    if sizes.min() < cfg.min_class_size:
        warnings.warn(
            f"optimized labeling left class sizes {sizes.tolist()}; falling back to one OLSR model",
            RuntimeWarning,
        )
        m = train_olsr(X, y)
        mm = MultiModel(
            LinearModel(m.a, m.a0, "con_lab"),
            LinearModel(m.a, m.a0 - 1.0, "con_lab"),
            Hyperplane(np.zeros(p), 1.0),
            Labels(np.ones(n, dtype=int), 2),
            "con_lab",
            sol.objective,
            {"box": _box(X), "fallback": "single_model", **milp_meta},
        )
        return replace(mm, meta={**mm.meta, **_rmse_meta(mm, X, y, np.ones(n))})
    final = train_mis_con(X, y, labels, cfg, method="con_lab")
    return replace(final, meta={**final.meta, **milp_meta})
