"""Data models for the simulation experiments.

Regression features are drawn once from a dedicated design seed and then held
fixed; only the responses are redrawn across repetitions.
"""

from __future__ import annotations

import numpy as np

from ..thinning import stream

DESIGN_STREAM = 11


def snr(mu) -> float:
    """``Var(mu) / mean(mu)`` over coordinates."""
    mu = np.asarray(mu, dtype=np.float64)
    return float(np.var(mu) / np.mean(mu))


def lowdim_design(n: int = 100, d: int = 10, theta: float = 3.0, beta: float = 0.05,
                  design_seed: int = 0):
    """Features ``X_i ~ N(theta 1, I)``; means ``mu_i = X_i' beta`` (clipped at 0)."""
    X = stream(design_seed, DESIGN_STREAM, 0).normal(theta, 1.0, size=(n, d))
    mu = np.maximum(X @ np.full(d, beta), 0.0)
    return X, mu


def highdim_design(n: int = 100, d: int = 200, sigma2: float = 1.5, beta: float = 0.13,
                   design_seed: int = 0):
    """Features ``X_i ~ N(0, sigma2 I)``; means ``mu_i = max(X_i' beta, 0)``.

    ``X_i' beta`` is centred at zero, so about half of the means are clipped
    to zero; with the default constants ``snr(mu)`` is close to 2.
    """
    X = stream(design_seed, DESIGN_STREAM, 1).normal(0.0, np.sqrt(sigma2), size=(n, d))
    mu = np.maximum(X @ np.full(d, beta), 0.0)
    return X, mu


def denoising_means(n: int = 100, n_high: int = 10, high: float = 10.0, low: float = 0.5):
    """``mu_i = high`` for the first ``n_high`` coordinates, ``low`` afterwards."""
    if not 0 <= n_high <= n:
        raise ValueError("n_high must lie in [0, n]")
    mu = np.full(n, float(low))
    mu[:n_high] = high
    return mu


def constant_means(n: int, mu: float):
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    return np.full(n, float(mu))


def two_cluster_sample(n: int = 116, seed: int = 0, frac: float = 0.6):
    """Two elongated Gaussian clusters in the plane (``frac`` of points in the first)."""
    rng = stream(seed, DESIGN_STREAM, 2)
    n1 = int(round(frac * n))
    a = rng.normal([0.0, 0.0], [0.5, 0.3], size=(n1, 2))
    b = rng.normal([2.5, 1.5], [0.4, 0.6], size=(n - n1, 2))
    return np.vstack([a, b])


def make_design(spec: dict):
    """``(X or None, mu)`` from a design block of an experiment config."""
    kind = spec["kind"]
    seed = int(spec.get("design_seed", 0))
    n = int(spec.get("n", 100))
    if kind == "lowdim":
        return lowdim_design(n, int(spec.get("d", 10)), float(spec.get("theta", 3.0)),
                             float(spec.get("beta", 0.05)), seed)
    if kind == "highdim":
        return highdim_design(n, int(spec.get("d", 200)), float(spec.get("sigma2", 1.5)),
                              float(spec.get("beta", 0.13)), seed)
    if kind == "denoising":
        return None, denoising_means(n, int(spec.get("n_high", 10)), float(spec.get("high", 10.0)),
                                     float(spec.get("low", 0.5)))
    if kind == "constant":
        return None, constant_means(n, float(spec["mu"]))
    if kind == "phantom":
        from ..algorithms.tv import phantom
        size = int(spec.get("size", 32))
        img = phantom(size, spec.get("phantom", "shepp_logan"), float(spec.get("scale", 20.0)),
                      float(spec.get("offset", 1.0)))
        return None, img.ravel()
    raise ValueError(f"unknown design kind: {kind!r}")
