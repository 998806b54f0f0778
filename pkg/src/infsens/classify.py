"""Linear soft-margin SVM separating the two model classes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .labeling import Labels
from .optim import QpProblem, Status, solve_qp


class ClassifierError(ValueError):
    pass


@dataclass(frozen=True)
class Hyperplane:
    """Region 1 is ``m'w + w0 >= 0``, region 2 the rest."""

    w: np.ndarray
    w0: float

    def __post_init__(self):
        w = np.array(self.w, dtype=float).ravel()
        if not (np.all(np.isfinite(w)) and np.isfinite(self.w0)):
            raise ClassifierError("hyperplane must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "w0", float(self.w0))

    def score(self, M) -> np.ndarray:
        M = np.asarray(M, dtype=float)
        if M.ndim == 1:
            M = M[None, :]
        if M.shape[1] != self.w.shape[0]:
            raise ValueError(f"hyperplane expects {self.w.shape[0]} inputs, got {M.shape[1]}")
        return M @ self.w + self.w0

    def classify(self, M) -> np.ndarray:
        """Class index (1 or 2) per row; points on the plane go to class 1."""
        return np.where(self.score(M) >= 0.0, 1, 2)


def classify_point(h: Hyperplane, m) -> int:
    m = np.asarray(m, dtype=float).ravel()
    return int(h.classify(m[None, :])[0])


@dataclass(frozen=True)
class SvmResult:
    hyperplane: Hyperplane
    slacks: np.ndarray
    objective: float
    kkt_residual: float


def train_linear_svm(X, labels: Labels, beta: float = 1.0) -> SvmResult:
    """min ||w||^2 + beta * sum(e)  s.t.  (2z_i - 1)(m_i'w + w0) >= 1 - e_i,  e >= 0."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if labels.k != 2:
        raise ClassifierError("the separator handles exactly two classes")
    sizes = labels.sizes()
    if np.any(sizes == 0):
        raise ClassifierError(f"class sizes {sizes.tolist()}: one class is empty")
    if X.shape[0] != labels.assignment.shape[0]:
        raise ClassifierError("one label per row is required")
    n, n_p = X.shape
    sgn = 2.0 * labels.z - 1.0
    nv = n_p + 1 + n
    Q = np.zeros((nv, nv))
    Q[:n_p, :n_p] = 2.0 * np.eye(n_p)
    c = np.concatenate([np.zeros(n_p + 1), np.full(n, beta)])
    # -(s_i)(m_i'w + w0) - e_i <= -1
    A = np.hstack([-sgn[:, None] * X, -sgn[:, None], -np.eye(n)])
    lb = np.concatenate([np.full(n_p + 1, -np.inf), np.zeros(n)])
    sol = solve_qp(QpProblem(Q, c, A_ub=A, b_ub=-np.ones(n), lb=lb))
    if sol.status != Status.OPTIMAL:
        raise ClassifierError(f"SVM QP ended with status {sol.status.value}")
    x = sol.x
    return SvmResult(Hyperplane(x[:n_p], x[n_p]), np.maximum(x[n_p + 1 :], 0.0), sol.objective, sol.kkt_residual)
