"""Bregman-divergence losses for the Poisson means problem.

Two generators are shipped:

* squared:  phi(x) = ||x||^2,              grad = 2x
* deviance: phi(x) = 2 sum x (log x - 1),  grad = 2 log x

with the convention ``0 * (log 0 - 1) = 0`` so that ``phi`` is finite on count
vectors containing zeros.  The deviance always uses the factor 2.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

DEFAULT_PAD_C = 1e-8

LossKind = Literal["squared", "deviance"]


@dataclass(frozen=True)
class LossSpec:
    """Which Bregman divergence to use, plus the deviance padding constant."""

    kind: LossKind = "squared"
    pad_c: float = DEFAULT_PAD_C

    def __post_init__(self):
        if self.kind not in ("squared", "deviance"):
            raise ValueError(f"unknown loss kind: {self.kind!r}")
        if self.kind == "deviance" and not self.pad_c > 0:
            raise ValueError("pad_c must be positive for deviance loss")

    @classmethod
    def parse(cls, kind: str | LossSpec, pad_c: float = DEFAULT_PAD_C) -> LossSpec:
        if isinstance(kind, LossSpec):
            return kind
        return cls(kind, pad_c)


SQUARED = LossSpec("squared")
DEVIANCE = LossSpec("deviance")


def as_counts(y) -> np.ndarray:
    """Validate a count vector and return it as a float64 array."""
    arr = np.asarray(y, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 1:
        raise ValueError("count vector must be one-dimensional and non-empty")
    if np.any(arr < 0) or np.any(arr != np.floor(arr)):
        raise ValueError("count vector must hold nonnegative integers")
    return arr


def as_means(mu) -> np.ndarray:
    arr = np.asarray(mu, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 1:
        raise ValueError("mean vector must be one-dimensional and non-empty")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ValueError("mean vector must hold finite nonnegative reals")
    return arr


def _check_pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(f"length mismatch: {a.shape[-1]} vs {b.shape[-1]}")
    return a, b


def xlogx(x):
    """Elementwise ``x log x`` with ``0 log 0 = 0``."""
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = x[pos] * np.log(x[pos])
    return out


def pad_fit(fit, c: float = DEFAULT_PAD_C) -> np.ndarray:
    """Replace exact zeros in a fit by ``c`` so that ``log`` is finite."""
    if not c > 0:
        raise ValueError("padding constant must be positive")
    fit = np.asarray(fit, dtype=np.float64)
    return np.where(fit != 0, fit, c)


def squared_loss(a, b) -> float:
    """Sum of squared differences."""
    a, b = _check_pair(a, b)
    return float(np.sum((a - b) ** 2))


def deviance_terms(a, b) -> np.ndarray:
    """Coordinatewise Poisson deviance ``2 (a log(a/b) + b - a)``.

    ``b`` must already be padded; a zero entry raises.
    """
    a, b = _check_pair(a, b)
    if np.any(b <= 0):
        raise ValueError("deviance requires strictly positive fitted means (pad first)")
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(a > 0, a * np.log(np.where(a > 0, a, 1.0) / b), 0.0)
    return 2.0 * (t + b - a)


def deviance_loss(a, b, spec: LossSpec | None = None) -> float:
    """Poisson deviance ``2 sum(a log(a/b) + b - a)``."""
    return float(np.sum(deviance_terms(a, b)))


def loss(spec: LossSpec, a, b) -> float:
    if spec.kind == "squared":
        return squared_loss(a, b)
    return deviance_loss(a, b, spec)


def phi(spec: LossSpec, x, axis: int = -1):
    """Generator ``phi`` summed along ``axis`` (0 * log 0 convention)."""
    x = np.asarray(x, dtype=np.float64)
    if spec.kind == "squared":
        return np.sum(x * x, axis=axis)
    if np.any(x < 0):
        raise ValueError("deviance generator undefined for negative arguments")
    return 2.0 * np.sum(xlogx(x) - x, axis=axis)


def grad_phi(spec: LossSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if spec.kind == "squared":
        return 2.0 * x
    if np.any(x <= 0):
        raise ValueError("deviance gradient undefined at zero (pad first)")
    return 2.0 * np.log(x)


def phi_and_grad(spec: LossSpec, x) -> tuple[float, np.ndarray]:
    """Return ``(phi(x), grad phi(x))`` for a single vector."""
    return float(phi(spec, x)), grad_phi(spec, x)


def bregman(spec: LossSpec, a, b) -> float:
    """``phi(a) - phi(b) - <grad phi(b), a - b>`` evaluated literally.

    Used as an independent cross-check of :func:`loss`.
    """
    a, b = _check_pair(a, b)
    return float(phi(spec, a) - phi(spec, b) - np.dot(grad_phi(spec, b), a - b))


def prepare_fit(spec: LossSpec, fit) -> np.ndarray:
    """Apply padding for deviance; reject negative fits for either loss."""
    fit = np.asarray(fit, dtype=np.float64)
    if np.any(fit < 0) or not np.all(np.isfinite(fit)):
        raise ValueError("algorithm returned negative or non-finite fitted means")
    if spec.kind == "deviance":
        return pad_fit(fit, spec.pad_c)
    return fit


def expected_pointwise_loss(spec: LossSpec, b, mean, second):
    """``E[d(A, b)]`` per coordinate given ``E[A]``, ``E[A^2]`` (squared) or
    ``E[A log A]`` (deviance, passed as ``second``)."""
    b = np.asarray(b, dtype=np.float64)
    if spec.kind == "squared":
        return second - 2.0 * b * mean + b * b
    return 2.0 * (second - mean * np.log(b) + b - mean)
