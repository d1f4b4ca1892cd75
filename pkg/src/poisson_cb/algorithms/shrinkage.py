"""Coordinatewise and exchangeable rules: linear shrinkage, thresholding, EB."""

from __future__ import annotations

import numpy as np

from .base import FitAlgorithm


def linear_shrinkage(y, weight: float = 0.8, floor: float = 0.01) -> np.ndarray:
    """``weight * y + (1 - weight) * mean(y) + floor * 1{mean(y) = 0}``."""
    y = np.asarray(y, dtype=np.float64)
    ybar = y.mean(axis=-1, keepdims=True)
    return weight * y + (1.0 - weight) * ybar + floor * (ybar == 0)


def threshold(y, lam: float, kind: str = "soft") -> np.ndarray:
    """Soft ``max(y - lam, 0)`` or hard ``y 1{y > lam}`` thresholding."""
    if lam < 0:
        raise ValueError("threshold must be nonnegative")
    y = np.asarray(y, dtype=np.float64)
    if kind == "soft":
        return np.maximum(y - lam, 0.0)
    if kind == "hard":
        return np.where(y > lam, y, 0.0)
    raise ValueError(f"unknown threshold kind: {kind!r}")


def _smoothed_frequency(y, k, h):
    # Gaussian kernel density of the empirical count distribution, read at k.
    vals, counts = np.unique(y, return_counts=True)
    z = (np.asarray(k, dtype=np.float64)[:, None] - vals[None, :]) / h
    w = np.exp(-0.5 * z * z) / (np.sqrt(2.0 * np.pi) * h)
    return (w @ counts) / y.size


def eb_one_step(y, h: float = 0.85, floor: float = 1e-12) -> np.ndarray:
    """Robbins-type empirical Bayes rule with kernel-smoothed frequencies.

    ``g_i = (y_i + 1) N(y_i + 1) / N(y_i)`` where ``N`` is the Gaussian-kernel
    smoothed empirical pmf of the counts with bandwidth ``h``.  Stands in for
    the one-step EB improvement used in the denoising simulation: it is
    nonlinear, exchangeable and not smooth in the data.
    """
    if not h > 0:
        raise ValueError("bandwidth must be positive")
    y = np.asarray(y, dtype=np.float64)
    vals, inv = np.unique(y, return_inverse=True)
    num = np.maximum(_smoothed_frequency(y, vals + 1.0, h), floor)
    den = np.maximum(_smoothed_frequency(y, vals, h), floor)
    return ((vals + 1.0) * num / den)[inv]


class LinearShrinkage(FitAlgorithm):
    name = "linear_shrinkage"

    def __init__(self, weight: float = 0.8, floor: float = 0.01):
        self.weight = float(weight)
        self.floor = float(floor)

    def fit(self, y):
        return linear_shrinkage(y, self.weight, self.floor)

    def fit_batch(self, Y):
        return linear_shrinkage(np.atleast_2d(Y), self.weight, self.floor)

    @property
    def params(self):
        return {"weight": self.weight}

    def with_params(self, weight=None, **_):
        return LinearShrinkage(self.weight if weight is None else weight, self.floor)


class Threshold(FitAlgorithm):
    def __init__(self, lam: float, kind: str = "soft"):
        self.lam = float(lam)
        self.kind = kind
        self.name = f"{kind}_threshold"
        threshold(np.zeros(1), self.lam, kind)

    def fit(self, y):
        return threshold(y, self.lam, self.kind)

    def fit_batch(self, Y):
        return threshold(np.atleast_2d(Y), self.lam, self.kind)

    @property
    def params(self):
        return {"lam": self.lam, "kind": self.kind}

    def with_params(self, lam=None, **_):
        return Threshold(self.lam if lam is None else lam, self.kind)


class EBOneStep(FitAlgorithm):
    name = "eb_one_step"

    def __init__(self, h: float = 0.85):
        self.h = float(h)

    def fit(self, y):
        return eb_one_step(y, self.h)

    @property
    def params(self):
        return {"h": self.h}

    def with_params(self, h=None, **_):
        return EBOneStep(self.h if h is None else h)
