"""Greedy regression tree grown on Poisson deviance."""

from __future__ import annotations

import numpy as np

from .base import FitAlgorithm

_MIN_GAIN = 1e-12


def _slogm(s, m):
    # s * log(s / m) with 0 log 0 = 0
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(s > 0, s * np.log(np.where(s > 0, s, 1.0) / m), 0.0)


def _best_split(X, y, idx, orders, min_leaf):
    m = idx.size
    S = y[idx].sum()
    parent = float(_slogm(S, m))
    best = (0.0, -1, 0.0)
    member = np.zeros(X.shape[0], dtype=bool)
    member[idx] = True
    for j in range(X.shape[1]):
        order = orders[j][member[orders[j]]]
        xs = X[order, j]
        cs = np.cumsum(y[order])[:-1]
        k = np.arange(1, m)
        ok = (xs[1:] > xs[:-1]) & (k >= min_leaf) & (m - k >= min_leaf)
        if not ok.any():
            continue
        gain = 2.0 * (_slogm(cs, k) + _slogm(S - cs, m - k) - parent)
        gain = np.where(ok, gain, -np.inf)
        pos = int(np.argmax(gain))
        if gain[pos] > best[0] + _MIN_GAIN * max(1.0, abs(parent)):
            best = (float(gain[pos]), j, 0.5 * (xs[pos] + xs[pos + 1]))
    return best


def cart_poisson(X, y, max_depth: int = 3, min_leaf: int = 5, orders=None) -> np.ndarray:
    """Fit a binary tree with axis-aligned splits chosen to reduce Poisson deviance.

    Each leaf predicts the mean of its responses.  Ties go to the lowest feature
    index and then the lowest threshold; splits that do not strictly reduce the
    deviance are not made.
    """
    if max_depth < 1:
        raise ValueError("max_depth must be at least 1")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if orders is None:
        orders = [np.argsort(X[:, j], kind="stable") for j in range(X.shape[1])]
    fitted = np.empty(y.size)
    stack = [(np.arange(y.size), 0)]
    while stack:
        idx, depth = stack.pop()
        if depth < max_depth and idx.size >= 2 * min_leaf:
            gain, j, thr = _best_split(X, y, idx, orders, min_leaf)
            if j >= 0:
                left = X[idx, j] <= thr
                stack.append((idx[left], depth + 1))
                stack.append((idx[~left], depth + 1))
                continue
        fitted[idx] = y[idx].mean()
    return fitted


class PoissonTree(FitAlgorithm):
    name = "regression_tree"

    def __init__(self, X, max_depth: int = 3, min_leaf: int = 5):
        self.X = np.asarray(X, dtype=np.float64)
        self.max_depth, self.min_leaf = int(max_depth), int(min_leaf)
        self._orders = [np.argsort(self.X[:, j], kind="stable") for j in range(self.X.shape[1])]

    def fit(self, y):
        return cart_poisson(self.X, y, self.max_depth, self.min_leaf, self._orders)

    @property
    def params(self):
        return {"max_depth": self.max_depth, "min_leaf": self.min_leaf}
