"""Poisson log-link regression: IRLS and L1-penalized path with K-fold CV."""

from __future__ import annotations

import warnings

import numpy as np
from numba import njit

from ..losses import DEFAULT_PAD_C, deviance_terms, pad_fit
from ..thinning import stream
from .base import FitAlgorithm

ETA_MAX = 30.0
TOL = 1e-5
CV_TOL = 1e-3
PATIENCE = 3


class ConvergenceWarning(UserWarning):
    pass


def _poisson_nll(y, eta):
    return float(np.sum(np.exp(eta) - y * eta))


def poisson_irls(X, y, tol: float = 1e-8, max_iter: int = 100, return_info: bool = False):
    """Maximum-likelihood Poisson regression (log link) by IRLS.

    Iterates weighted least squares with step halving whenever the negative
    log-likelihood fails to decrease.  Stops once the largest coefficient
    change falls below ``tol`` or after ``max_iter`` iterations, warning in the
    latter case.  Returns the fitted means ``exp(X beta)``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, d = X.shape
    if n < d:
        raise ValueError("need at least as many observations as columns")
    mu = y + 0.1 * (y.mean() + 0.1)
    eta = np.log(mu)
    beta = np.linalg.lstsq(X, eta, rcond=None)[0]
    eta = np.clip(X @ beta, -ETA_MAX, ETA_MAX)
    nll = _poisson_nll(y, eta)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        mu = np.exp(eta)
        z = eta + (y - mu) / mu
        sw = np.sqrt(mu)
        target = np.linalg.lstsq(X * sw[:, None], z * sw, rcond=None)[0]
        step = target - beta
        for _ in range(30):
            cand = beta + step
            eta_c = np.clip(X @ cand, -ETA_MAX, ETA_MAX)
            nll_c = _poisson_nll(y, eta_c)
            if nll_c <= nll + 1e-12 * abs(nll):
                break
            step *= 0.5
        change = np.max(np.abs(cand - beta))
        beta, eta, nll = cand, eta_c, nll_c
        if change < tol:
            converged = True
            break
    if not converged:
        warnings.warn(f"IRLS did not converge in {max_iter} iterations", ConvergenceWarning)
    fitted = np.exp(eta)
    if return_info:
        return fitted, {"beta": beta, "iterations": it, "converged": converged}
    return fitted


@njit(cache=True)
def _soft(c, lam):
    if c > lam:
        return c - lam
    if c < -lam:
        return c + lam
    return 0.0


@njit(cache=True)
def _penalized_objective(X, y, b0, beta, lam):
    n = X.shape[0]
    eta = b0 + X @ beta
    s = 0.0
    for i in range(n):
        e = min(max(eta[i], -ETA_MAX), ETA_MAX)
        s += np.exp(e) - y[i] * e
    return s / n + lam * np.sum(np.abs(beta))


@njit(cache=True)
def _cd_wls(X, w, r, b0, beta, lam, xw2, tol, max_sweeps):
    """Coordinate descent on (1/2n) sum w (r)^2 + lam |beta|_1 with residual r updated in place."""
    n, d = X.shape
    sw = np.sum(w)
    active = np.zeros(d, dtype=np.bool_)
    for j in range(d):
        active[j] = beta[j] != 0.0
    full = True
    for _ in range(max_sweeps):
        delta0 = 0.0
        for i in range(n):
            delta0 += w[i] * r[i]
        delta0 /= sw
        b0 += delta0
        for i in range(n):
            r[i] -= delta0
        maxch = sw * delta0 * delta0 / n
        for j in range(d):
            if not full and not active[j]:
                continue
            a = xw2[j]
            if a <= 0.0:
                continue
            c = 0.0
            for i in range(n):
                c += w[i] * X[i, j] * r[i]
            c = c / n + a * beta[j]
            new = _soft(c, lam) / a
            diff = new - beta[j]
            if diff != 0.0:
                for i in range(n):
                    r[i] -= X[i, j] * diff
                beta[j] = new
                if new != 0.0:
                    active[j] = True
                ch = a * diff * diff
                if ch > maxch:
                    maxch = ch
        if maxch < tol:
            if full:
                break
            full = True
        else:
            full = False
    return b0


@njit(cache=True)
def _lasso_fit_lambda(X, y, lam, b0, beta, tol, max_outer, max_sweeps):
    """Penalized IRLS at one penalty, warm-started from ``(b0, beta)`` (updated in place)."""
    n, d = X.shape
    w = np.empty(n)
    r = np.empty(n)
    xw2 = np.empty(d)
    obj = _penalized_objective(X, y, b0, beta, lam)
    for _ in range(max_outer):
        eta = b0 + X @ beta
        for i in range(n):
            e = min(max(eta[i], -ETA_MAX), ETA_MAX)
            mu = np.exp(e)
            w[i] = mu
            r[i] = (y[i] - mu) / mu
        for j in range(d):
            s = 0.0
            for i in range(n):
                s += w[i] * X[i, j] * X[i, j]
            xw2[j] = s / n
        old_b0 = b0
        old_beta = beta.copy()
        b0 = _cd_wls(X, w, r, b0, beta, lam, xw2, tol * tol, max_sweeps)
        new_obj = _penalized_objective(X, y, b0, beta, lam)
        step = 1.0
        while new_obj > obj + 1e-12 * abs(obj) and step > 1e-6:
            step *= 0.5
            b0 = old_b0 + step * (b0 - old_b0)
            for j in range(d):
                beta[j] = old_beta[j] + step * (beta[j] - old_beta[j])
            new_obj = _penalized_objective(X, y, b0, beta, lam)
        change = abs(b0 - old_b0)
        for j in range(d):
            change = max(change, abs(beta[j] - old_beta[j]))
        obj = new_obj
        if change < tol:
            break
    return b0


def _standardize(X):
    center = X.mean(axis=0)
    scale = X.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    Xs = (X - center) / scale
    Xs[:, X.std(axis=0) == 0] = 0.0
    return Xs


def lambda_max(Xs, y) -> float:
    """Smallest penalty at which every slope is zero (standardized design)."""
    return float(np.max(np.abs(Xs.T @ (y - y.mean()))) / y.size) if y.size else 0.0


def lambda_grid(Xs, y, grid_size: int = 20, decades: float = 4.0) -> np.ndarray:
    top = lambda_max(Xs, y)
    if top <= 0:
        top = 1.0
    return top * np.logspace(0.0, -decades, grid_size)


def _start(y):
    ybar = float(np.mean(y))
    return np.log(ybar) if ybar > 0 else -ETA_MAX


def lasso_path(Xs, y, lambdas, tol: float = TOL, max_outer: int = 50, max_sweeps: int = 1000):
    """Warm-started coefficient path ``(b0[L], beta[L, d])`` for a standardized design."""
    Xs = np.ascontiguousarray(Xs, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    b0 = _start(y)
    beta = np.zeros(Xs.shape[1])
    out_b0 = np.empty(len(lambdas))
    out_beta = np.empty((len(lambdas), Xs.shape[1]))
    for l, lam in enumerate(lambdas):
        b0 = _lasso_fit_lambda(Xs, y, float(lam), b0, beta, tol, max_outer, max_sweeps)
        out_b0[l] = b0
        out_beta[l] = beta
    return out_b0, out_beta


def fold_ids(n: int, K: int, seed: int) -> np.ndarray:
    perm = stream(seed, 101).permutation(n)
    ids = np.empty(n, dtype=np.int64)
    ids[perm] = np.arange(n) % K
    return ids


def lasso_poisson_cv(X, y, K: int = 5, grid_size: int = 20, seed: int = 0,
                     return_info: bool = False, pad_c: float = DEFAULT_PAD_C):
    """L1-penalized Poisson regression with the penalty chosen by K-fold CV.

    The penalty grid is log-spaced over four decades below the smallest
    penalty that zeroes every slope.  Folds are fixed by ``seed`` so that the
    rule is a deterministic function of ``y``.  The path is walked from the
    largest penalty down and abandoned once the CV deviance has risen above
    its running minimum for ``PATIENCE`` consecutive grid points.  Fold fits
    only rank penalties and use the looser ``CV_TOL``; the returned fit is
    solved to ``TOL``.
    """
    if K < 2:
        raise ValueError("K must be at least 2")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    Xs = _standardize(X)
    return _lasso_cv_std(Xs, y, K, grid_size, fold_ids(y.size, K, seed), return_info, pad_c)


def _lasso_cv_std(Xs, y, K, grid_size, folds, return_info=False, pad_c=DEFAULT_PAD_C):
    n, d = Xs.shape
    if not np.any(y > 0):
        fitted = np.zeros(n)
        return (fitted, {"lambda": np.inf, "index": 0}) if return_info else fitted
    lambdas = lambda_grid(Xs, y, grid_size)
    parts = []
    for k in range(K):
        test = folds == k
        Xtr = np.ascontiguousarray(Xs[~test])
        parts.append([Xtr, y[~test], Xs[test], y[test], _start(y[~test]), np.zeros(d)])
    cv = np.full(lambdas.size, np.inf)
    best = 0
    for l, lam in enumerate(lambdas):
        total = 0.0
        for part in parts:
            Xtr, ytr, Xte, yte, b0, beta = part
            b0 = _lasso_fit_lambda(Xtr, ytr, float(lam), b0, beta, CV_TOL, 50, 1000)
            part[4] = b0
            pred = pad_fit(np.exp(np.clip(b0 + Xte @ beta, -ETA_MAX, ETA_MAX)), pad_c)
            total += float(np.sum(deviance_terms(yte, pred)))
        cv[l] = total
        if total < cv[best]:
            best = l
        elif l - best >= PATIENCE:
            break
    b0s, betas = lasso_path(Xs, y, lambdas[: best + 1])
    fitted = np.exp(np.clip(b0s[best] + Xs @ betas[best], -ETA_MAX, ETA_MAX))
    if return_info:
        return fitted, {"lambda": float(lambdas[best]), "index": best, "cv": cv,
                        "lambdas": lambdas, "beta": betas[best], "b0": float(b0s[best])}
    return fitted


class PoissonGLM(FitAlgorithm):
    name = "poisson_glm"

    def __init__(self, X, intercept: bool = True):
        X = np.asarray(X, dtype=np.float64)
        self.X = np.column_stack([np.ones(X.shape[0]), X]) if intercept else X

    def fit(self, y):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            return poisson_irls(self.X, y)


class LassoPoissonCV(FitAlgorithm):
    name = "lasso_poisson_cv"

    def __init__(self, X, K: int = 5, grid_size: int = 20, seed: int = 0):
        self.X = np.asarray(X, dtype=np.float64)
        self.Xs = _standardize(self.X)
        self.K, self.grid_size, self.seed = int(K), int(grid_size), int(seed)
        self.folds = fold_ids(self.X.shape[0], self.K, self.seed)

    def fit(self, y):
        return _lasso_cv_std(self.Xs, np.asarray(y, dtype=np.float64), self.K,
                             self.grid_size, self.folds)

    @property
    def params(self):
        return {"K": self.K, "grid_size": self.grid_size, "seed": self.seed}
