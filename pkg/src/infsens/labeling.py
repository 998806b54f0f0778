"""A priori labeling of training rows by k-means (Lloyd iterations, Forgy starts)."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Labels:
    assignment: np.ndarray  # class index per row, values in 1..k
    k: int
    inertia: float = float("nan")
    centroids: np.ndarray | None = None

    def __post_init__(self):
        a = np.array(self.assignment, dtype=int).ravel()
        if a.size and (a.min() < 1 or a.max() > self.k):
            raise ValueError(f"class indices must lie in 1..{self.k}")
        a.setflags(write=False)
        object.__setattr__(self, "assignment", a)

    @property
    def z(self) -> np.ndarray:
        """Binary indicator of class 1 (the first model)."""
        return (self.assignment == 1).astype(float)

    @classmethod
    def from_z(cls, z) -> "Labels":
        z = np.asarray(z).ravel()
        return cls(np.where(np.round(z) >= 1, 1, 2), 2)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.k + 1)[1:]


def _inertia(X, C, assign):
    return float(((X - C[assign]) ** 2).sum())


def _lloyd(X, C, max_iter):
    k = C.shape[0]
    history = []
    repaired = False
    assign = None
    for _ in range(max_iter):
        d = ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)
        new = np.argmin(d, axis=1)
        counts = np.bincount(new, minlength=k)
        for j in np.flatnonzero(counts == 0):
            # move the worst-fitted point into the empty cluster
            far = int(np.argmax(d[np.arange(len(new)), new]))
            new[far] = j
            d[far] = 0.0
            repaired = True
            counts = np.bincount(new, minlength=k)
        for j in range(k):
            C[j] = X[new == j].mean(axis=0)
        history.append(_inertia(X, C, new))
        if assign is not None and np.array_equal(new, assign):
            break
        assign = new
    return new, C, history, repaired


def kmeans_label(X, k: int = 2, seed: int = 0, restarts: int = 10, max_iter: int = 300, return_history=False):
    """Cluster the rows of ``X`` (inputs only) into ``k`` nonempty classes.

    The best of ``restarts`` Forgy initializations (distinct random rows as
    centroids) is kept, ties to the earliest restart. Classes are numbered
    1..k by ascending first centroid coordinate.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if k < 1:
        raise ValueError("k must be positive")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of rows {n}")
    rng = np.random.default_rng(seed)
    best = None
    any_repair = False
    for _ in range(max(1, restarts)):
        C0 = X[rng.choice(n, size=k, replace=False)].copy()
        assign, C, hist, repaired = _lloyd(X, C0, max_iter)
        inertia = hist[-1]
        if best is None or inertia < best[0]:
            best = (inertia, assign, C, hist, repaired)
    inertia, assign, C, hist, any_repair = best
    if any_repair and np.allclose(X, X[0]):
        warnings.warn("k-means on identical points: classes were forced nonempty", RuntimeWarning)
    order = np.lexsort(C.T[::-1])  # by first coordinate, then the rest
    rank = np.empty(k, dtype=int)
    rank[order] = np.arange(k)
    labels = Labels(rank[assign] + 1, k, inertia, C[order])
    if return_history:
        return labels, hist
    return labels
