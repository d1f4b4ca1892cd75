"""Lindsey's method: density estimation as a penalized Poisson regression on bin counts.

Samples (1d or 2d) are binned on an equally spaced grid; the bin counts are
fitted with a log-link Poisson GLM whose linear predictor is a cubic B-spline
(tensor product in 2d) with a second-order difference penalty on adjacent
coefficients along each axis.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline

from .base import FitAlgorithm

ETA_MAX = 30.0
BOUNDS_PAD = 0.1


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SplineBasisSpec:
    """Binning, basis and penalty configuration.

    Parameters
    ----------
    bins : int or tuple of int
        Bins per axis; an int applies to every axis.
    knots : int or tuple of int
        Equally spaced knots per axis, endpoints included; an axis has
        ``knots + degree - 1`` basis functions.
    lam : float or tuple of float
        A scalar is the isotropic penalty; a pair ``(lam1, lam2)`` is the
        anisotropic one (2d only).
    """

    bins: int | tuple = 200
    knots: int | tuple = 30
    lam: float | tuple = 1.0
    degree: int = 3
    order: int = 2

    def __post_init__(self):
        for b, k in zip(np.atleast_1d(self.bins), np.atleast_1d(self.knots)):
            if not b >= k >= 4:
                raise ValueError("need bins >= knots >= 4 on every axis")
        if np.any(np.asarray(self.lam, dtype=float) < 0):
            raise ValueError("penalties must be nonnegative")

    @property
    def isotropic(self) -> bool:
        return np.ndim(self.lam) == 0

    def per_axis(self, name: str, dim: int) -> tuple:
        v = getattr(self, name)
        vals = tuple(np.atleast_1d(v).tolist())
        if len(vals) == 1:
            vals = vals * dim
        if len(vals) != dim:
            raise ValueError(f"{name} needs {dim} values, got {len(vals)}")
        return vals


def as_samples(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[1] not in (1, 2):
        raise ValueError("samples must be points in one or two dimensions")
    if x.shape[0] == 0:
        raise ValueError("empty sample set")
    if not np.all(np.isfinite(x)):
        raise ValueError("samples must be finite")
    return x


def sample_bounds(x, pad: float = BOUNDS_PAD):
    """Per-axis ``(lo, hi)``, widened by ``pad`` of the range (or by 0.5 if the range is 0)."""
    lo, hi = x.min(axis=0), x.max(axis=0)
    span = hi - lo
    margin = np.where(span > 0, pad * span, 0.5)
    return [(float(a - m), float(b + m)) for a, b, m in zip(lo, hi, margin)]


def bin_samples(samples, bins, bounds=None):
    """Histogram counts (flattened row-major) and per-axis bin edges."""
    x = as_samples(samples)
    dim = x.shape[1]
    bins = tuple(np.broadcast_to(np.atleast_1d(bins), (dim,)).tolist())
    bounds = sample_bounds(x) if bounds is None else [tuple(b) for b in bounds]
    for (lo, hi), col in zip(bounds, x.T):
        if not (lo <= col.min() and col.max() <= hi and lo < hi):
            raise ValueError("bins must cover the sample range")
    counts, edges = np.histogramdd(x, bins=bins, range=bounds)
    return counts.ravel(), edges


def bspline_basis(centers, lo, hi, n_knots, degree=3):
    """Cubic B-spline design matrix on ``n_knots`` equally spaced knots over ``[lo, hi]``."""
    inner = np.linspace(lo, hi, n_knots)
    h = inner[1] - inner[0]
    t = np.r_[lo - h * np.arange(degree, 0, -1), inner, hi + h * np.arange(1, degree + 1)]
    return BSpline.design_matrix(np.asarray(centers, dtype=np.float64), t, degree).toarray()


def difference_penalty(k: int, order: int = 2) -> np.ndarray:
    D = np.diff(np.eye(k), n=order, axis=0)
    return D.T @ D


class _Model:
    """Basis and penalty pieces for a fixed binning grid.

    In 2d the tensor-product design is never formed: linear predictors,
    gradients and the weighted Gram matrix are computed from the marginal
    bases (row-wise tensor products), which is exact and much cheaper.
    """

    def __init__(self, edges, knots, degree=3, order=2):
        self.shape = tuple(len(e) - 1 for e in edges)
        self.bases = []
        for e, k in zip(edges, knots):
            centers = 0.5 * (e[:-1] + e[1:])
            self.bases.append(bspline_basis(centers, e[0], e[-1], k, degree))
        self.sizes = [b.shape[1] for b in self.bases]
        self.n_coef = int(np.prod(self.sizes))
        pens = [difference_penalty(s, order) for s in self.sizes]
        if len(pens) == 1:
            self.pens = pens
        else:
            k1, k2 = self.sizes
            self.pens = [np.kron(pens[0], np.eye(k2)), np.kron(np.eye(k1), pens[1])]
            B1, B2 = self.bases
            self._R1 = (B1[:, :, None] * B1[:, None, :]).reshape(B1.shape[0], -1)
            self._R2 = (B2[:, :, None] * B2[:, None, :]).reshape(B2.shape[0], -1)

    def penalty(self, lams) -> np.ndarray:
        return sum(l * P for l, P in zip(lams, self.pens))

    def eta(self, beta):
        if len(self.bases) == 1:
            return self.bases[0] @ beta
        B1, B2 = self.bases
        return (B1 @ beta.reshape(self.sizes) @ B2.T).ravel()

    def rmatvec(self, v):
        if len(self.bases) == 1:
            return self.bases[0].T @ v
        B1, B2 = self.bases
        return (B1.T @ v.reshape(self.shape) @ B2).ravel()

    def gram(self, w):
        if len(self.bases) == 1:
            B = self.bases[0]
            return B.T @ (B * w[:, None])
        k1, k2 = self.sizes
        G = self._R1.T @ w.reshape(self.shape) @ self._R2
        return G.reshape(k1, k1, k2, k2).transpose(0, 2, 1, 3).reshape(k1 * k2, k1 * k2)

    def design(self) -> np.ndarray:
        return self.bases[0] if len(self.bases) == 1 else np.kron(*self.bases)


def _objective(model, P, y, beta):
    eta = np.clip(model.eta(beta), -ETA_MAX, ETA_MAX)
    return float(np.sum(np.exp(eta) - y * eta) + 0.5 * beta @ P @ beta)


def penalized_poisson(model, P, y, tol: float = 1e-6, max_iter: int = 200, beta0=None,
                      return_info: bool = False):
    """Minimize ``sum(mu - y log mu) + beta' P beta / 2`` with ``log mu = B beta``.

    Newton (IRLS) steps with step halving; stops when the largest coefficient
    change is below ``tol``.
    """
    y = np.asarray(y, dtype=np.float64)
    if beta0 is None:
        beta = np.full(model.n_coef, np.log(max(y.mean(), 1e-12)))
    else:
        beta = np.array(beta0, dtype=np.float64)
    obj = _objective(model, P, y, beta)
    history = [obj]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        mu = np.exp(np.clip(model.eta(beta), -ETA_MAX, ETA_MAX))
        H = model.gram(mu) + P
        grad = model.rmatvec(mu - y) + P @ beta
        step = np.linalg.solve(H, grad)
        t = 1.0
        while True:
            cand = beta - t * step
            new = _objective(model, P, y, cand)
            if new <= obj + 1e-12 * abs(obj) or t < 1e-8:
                break
            t *= 0.5
        change = np.max(np.abs(cand - beta))
        beta, obj = cand, new
        history.append(obj)
        if change < tol:
            converged = True
            break
    if not converged:
        warnings.warn(f"penalized IRLS did not converge in {max_iter} iterations",
                      ConvergenceWarning)
    fitted = np.exp(np.clip(model.eta(beta), -ETA_MAX, ETA_MAX))
    if return_info:
        return fitted, {"beta": beta, "iterations": it, "converged": converged,
                        "objective": history}
    return fitted


def lindsey_pspline(samples, spec: SplineBasisSpec, bounds=None, return_info: bool = False):
    """Bin ``samples`` and fit a P-spline Poisson model to the counts.

    Returns ``(bin_means, density)`` as flat arrays over bins (row-major in 2d),
    where ``density`` is ``bin_means`` normalized to sum to one.
    """
    x = as_samples(samples)
    dim = x.shape[1]
    bins = spec.per_axis("bins", dim)
    counts, edges = bin_samples(x, bins, bounds)
    model = _Model(edges, spec.per_axis("knots", dim), spec.degree, spec.order)
    lams = spec.per_axis("lam", dim)
    fitted, info = penalized_poisson(model, model.penalty(lams), counts, return_info=True)
    density = fitted / fitted.sum()
    if return_info:
        info.update(counts=counts, edges=edges, shape=model.shape)
        return fitted, density, info
    return fitted, density


class PSplineCounts(FitAlgorithm):
    """P-spline Poisson fit as a map from bin counts to bin means (for error estimation)."""

    name = "pspline"

    def __init__(self, edges, knots=30, lam=1.0, degree: int = 3, order: int = 2):
        self.edges = [np.asarray(e, dtype=np.float64) for e in edges]
        dim = len(self.edges)
        self.knots = tuple(np.broadcast_to(np.atleast_1d(knots), (dim,)).tolist())
        self.lam = lam
        self.degree, self.order = degree, order
        self._model = _Model(self.edges, self.knots, degree, order)
        lams = tuple(np.broadcast_to(np.atleast_1d(np.asarray(lam, dtype=float)), (dim,)).tolist())
        self._P = self._model.penalty(lams)

    def fit(self, y):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            return penalized_poisson(self._model, self._P, np.asarray(y, dtype=np.float64))

    @property
    def params(self):
        return {"lam": self.lam}

    def with_params(self, lam=None, **_):
        return PSplineCounts(self.edges, self.knots, self.lam if lam is None else lam,
                             self.degree, self.order)
