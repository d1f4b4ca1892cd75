from __future__ import annotations

from typing import Any, Callable

import numpy as np


class FitAlgorithm:
    """A mean estimator ``g`` mapping a count vector to fitted means.

    Subclasses implement :meth:`fit`.  :meth:`fit_batch` applies the rule to
    each row of a 2d array; override it when the rule vectorizes.
    """

    name: str = "algorithm"

    def fit(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def fit_batch(self, Y: np.ndarray) -> np.ndarray:
        Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
        out = np.empty_like(Y)
        for k in range(Y.shape[0]):
            out[k] = self.fit(Y[k])
        return out

    def __call__(self, y) -> np.ndarray:
        return self.fit(np.asarray(y, dtype=np.float64))

    @property
    def params(self) -> dict[str, Any]:
        return {}

    def with_params(self, **params) -> FitAlgorithm:
        raise NotImplementedError(f"{type(self).__name__} has no tunable parameters")

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{type(self).__name__}({args})"


class FunctionAlgorithm(FitAlgorithm):
    """Wrap a plain callable ``y -> fit``."""

    def __init__(self, func: Callable, name: str | None = None, batch: Callable | None = None):
        self.func = func
        self.batch = batch
        self.name = name or getattr(func, "__name__", "function")

    def fit(self, y):
        return np.asarray(self.func(y), dtype=np.float64)

    def fit_batch(self, Y):
        if self.batch is not None:
            return np.asarray(self.batch(np.atleast_2d(Y)), dtype=np.float64)
        return super().fit_batch(Y)


class CountingAlgorithm(FitAlgorithm):
    """Delegate that counts how many times the wrapped rule is run."""

    def __init__(self, inner: FitAlgorithm):
        self.inner = as_algorithm(inner)
        self.name = self.inner.name
        self.calls = 0

    def fit(self, y):
        self.calls += 1
        return self.inner.fit(y)

    def fit_batch(self, Y):
        Y = np.atleast_2d(Y)
        self.calls += Y.shape[0]
        return self.inner.fit_batch(Y)


class Identity(FitAlgorithm):
    name = "identity"

    def fit(self, y):
        return np.asarray(y, dtype=np.float64).copy()

    def fit_batch(self, Y):
        return np.array(Y, dtype=np.float64)


class Constant(FitAlgorithm):
    name = "constant"

    def __init__(self, value):
        self.value = np.asarray(value, dtype=np.float64)

    def fit(self, y):
        return np.broadcast_to(self.value, np.shape(y)).astype(np.float64)

    def fit_batch(self, Y):
        return np.broadcast_to(self.value, np.shape(Y)).astype(np.float64)

    @property
    def params(self):
        return {"value": self.value.tolist()}


def as_algorithm(g) -> FitAlgorithm:
    if isinstance(g, FitAlgorithm):
        return g
    if callable(g):
        return FunctionAlgorithm(g)
    raise TypeError(f"not an algorithm: {g!r}")
