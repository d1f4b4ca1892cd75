"""Ground-truth oracles, the CB bias-variance decomposition and bound evaluators.

Truth is available two ways:

* ``enum``: exact sums over a truncated product Poisson support (tiny ``n``);
  the neglected probability mass is reported.
* ``mc``: Monte Carlo over independent training/test draws.

All quantities are sums over coordinates, like the estimators.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .algorithms.base import as_algorithm
from .estimators import (
    ENUM_BUDGET,
    FitCache,
    cb_infinite_exact,
    draw_coupled_bootstrap,
    product_grid,
    cb_from_draws,
)
from .losses import LossSpec, as_means, grad_phi, phi, prepare_fit, xlogx
from .thinning import StreamFamily, derive_seed

TRUNC_DEFICIT = 1e-12
MC_BOUND_R = 100_000
CHUNK_CELLS = 2_000_000
PHI_MAX_N = 4
PHI_MAX_COUNT = 15


@dataclass
class TruthEstimate:
    value: float
    std_error: float
    method: str
    truncation_mass_deficit: float = 0.0
    variance: float = float("nan")
    R: int = 0


@dataclass
class DecompositionReport:
    bias_sq: float
    reducible_var: float
    irreducible_var: float
    total_mse: float
    config: dict = field(default_factory=dict)


@dataclass
class HudsonReport:
    residual: float
    passed: bool
    lhs: np.ndarray
    rhs: np.ndarray


@dataclass
class BoundValue:
    """Evaluated right-hand side of a bound; ``terms`` holds its additive pieces."""

    value: float
    std_error: float
    terms: dict = field(default_factory=dict)

    def __float__(self):
        return self.value


# ---------------------------------------------------------------- supports


def poisson_support(lam: float, deficit: float = TRUNC_DEFICIT, cap: int | None = None):
    """``(ks, pmf, tail)`` with ``P(X > max(ks)) = tail <= deficit`` for ``X ~ Pois(lam)``.

    ``cap`` bounds the largest count kept; ``tail`` then reports the larger
    neglected mass.
    """
    if lam < 0:
        raise ValueError("Poisson mean must be nonnegative")
    if lam == 0:
        return np.zeros(1), np.ones(1), 0.0
    K = int(stats.poisson.isf(deficit, lam))
    while stats.poisson.sf(K, lam) > deficit:
        K += 1
    if cap is not None:
        K = min(K, int(cap))
    ks = np.arange(K + 1, dtype=np.float64)
    return ks, stats.poisson.pmf(ks, lam), float(stats.poisson.sf(K, lam))


def _enum_grid(lams, budget: int = ENUM_BUDGET, deficit: float = TRUNC_DEFICIT, cap=None):
    """Rows of the truncated product support, their weights and the missing mass."""
    supports = [poisson_support(l, deficit, cap) for l in lams]
    shape = tuple(s[0].size for s in supports)
    size = int(np.prod(shape, dtype=np.float64))
    if size > budget:
        raise ValueError(f"enumeration needs {size} points, budget is {budget}")
    rows = product_grid([s[0].size - 1 for s in supports])
    w = np.ones(rows.shape[0])
    for i, (_, pmf, _) in enumerate(supports):
        w *= pmf[rows[:, i].astype(np.int64)]
    kept = np.prod([1.0 - s[2] for s in supports])
    return rows, w, float(1.0 - kept), shape


def expected_xlogx(mean) -> np.ndarray:
    """``E[X log X]`` for ``X ~ Pois(mean)``, elementwise, by truncated summation."""
    mean = np.asarray(mean, dtype=np.float64)
    uniq, inv = np.unique(mean, return_inverse=True)
    vals = np.empty(uniq.size)
    for k, m in enumerate(uniq):
        ks, pmf, _ = poisson_support(m, 1e-16)
        vals[k] = np.dot(pmf, xlogx(ks))
    return vals[inv].reshape(mean.shape)


def expected_test_loss(spec: LossSpec, fits, mean, exlogx=None) -> np.ndarray:
    """Row sums of ``E[D(Ytilde, b)]`` with ``Ytilde ~ Pois(mean)`` and ``b`` a (prepared) fit row."""
    fits = np.atleast_2d(fits)
    if spec.kind == "squared":
        return np.sum(mean + mean * mean - 2.0 * fits * mean + fits * fits, axis=1)
    if exlogx is None:
        exlogx = expected_xlogx(mean)
    return 2.0 * np.sum(exlogx - mean * np.log(fits) + fits - mean, axis=1)


def row_losses(spec: LossSpec, targets, fits) -> np.ndarray:
    """Row sums of ``D(target, fit)`` for prepared fits."""
    targets = np.atleast_2d(targets)
    fits = np.atleast_2d(fits)
    if spec.kind == "squared":
        return np.sum((targets - fits) ** 2, axis=1)
    return 2.0 * np.sum(xlogx(targets) - targets * np.log(fits) + fits - targets, axis=1)


def _chunks(R: int, n: int):
    size = max(1, CHUNK_CELLS // max(n, 1))
    for k, start in enumerate(range(0, R, size)):
        yield k, min(size, R - start)


# ---------------------------------------------------------------- truth


def mc_truth(mu, g, loss, p: float = 0.0, R: int = 10_000, seed: int = 0,
             conditional: bool = False) -> TruthEstimate:
    """Monte Carlo ``Err_p(g)`` (``Err(g)`` at ``p = 0``).

    Draws ``Y_p`` and an independent test copy from ``Pois((1-p) mu)``.  With
    ``conditional=True`` the test copy is integrated out exactly, which keeps
    the estimand and lowers the standard error.
    """
    spec = LossSpec.parse(loss)
    g = as_algorithm(g)
    mu = as_means(mu)
    if R < 2:
        raise ValueError("R must be at least 2")
    if not 0.0 <= p < 1.0:
        raise ValueError("p must lie in [0, 1)")
    mean = (1.0 - p) * mu
    train, test = StreamFamily(seed, 1), StreamFamily(seed, 2)
    exlogx = expected_xlogx(mean) if (conditional and spec.kind == "deviance") else None
    vals = np.empty(R)
    pos = 0
    for k, size in _chunks(R, mu.size):
        Y = train(k).poisson(mean, size=(size, mu.size)).astype(np.float64)
        fits = prepare_fit(spec, g.fit_batch(Y))
        if conditional:
            vals[pos:pos + size] = expected_test_loss(spec, fits, mean, exlogx)
        else:
            Yt = test(k).poisson(mean, size=(size, mu.size)).astype(np.float64)
            vals[pos:pos + size] = row_losses(spec, Yt, fits)
        pos += size
    var = float(np.var(vals, ddof=1))
    return TruthEstimate(float(vals.mean()), float(np.sqrt(var / R)), "mc", 0.0, var, R)


def enum_truth(mu, g, loss, p: float = 0.0, budget: int = ENUM_BUDGET,
               cache: FitCache | None = None) -> TruthEstimate:
    """Exact ``Err_p(g)`` over the truncated support of ``Pois((1-p) mu)``.

    The training law is enumerated on the product support; the test
    expectation is taken per coordinate over its own truncated support.
    """
    spec = LossSpec.parse(loss)
    mu = as_means(mu)
    if not 0.0 <= p < 1.0:
        raise ValueError("p must lie in [0, 1)")
    mean = (1.0 - p) * mu
    rows, w, miss, _ = _enum_grid(mean, budget)
    cache = cache or FitCache(g)
    fits = prepare_fit(spec, cache.fit_rows(rows))
    per_row = expected_test_loss(spec, fits, mean)
    # test-side truncation is applied per coordinate at the same deficit
    deficit = 1.0 - (1.0 - miss) ** 2
    return TruthEstimate(float(np.dot(w, per_row)), 0.0, "enum", deficit, float("nan"), 0)


def hudson_check(mu, g, tol: float = 1e-8, budget: int = ENUM_BUDGET) -> HudsonReport:
    """Compare ``mu_i E[g_i(Y)]`` with ``E[Y_i g_i(Y - e_i)]`` by enumeration."""
    mu = as_means(mu)
    rows, w, _, _ = _enum_grid(mu, budget)
    cache = FitCache(g)
    fits = cache.fit_rows(rows)
    n = mu.size
    lhs = mu * (w @ fits)
    rhs = np.zeros(n)
    for i in range(n):
        pos = rows[:, i] > 0
        shifted = rows[pos].copy()
        shifted[:, i] -= 1.0
        rhs[i] = np.dot(w[pos] * rows[pos, i], cache.fit_rows(shifted)[:, i])
    scale = np.maximum(np.maximum(np.abs(lhs), np.abs(rhs)), 1e-300)
    resid = np.where((lhs == 0) & (rhs == 0), 0.0, np.abs(lhs - rhs) / scale)
    r = float(np.max(resid))
    return HudsonReport(r, r < tol, lhs, rhs)


def jensen_gap(mu, loss, method: str = "enum", R: int = 100_000, seed: int = 0) -> float:
    """``E[phi(Y)] - phi(mu)`` for ``Y ~ Pois(mu)``."""
    spec = LossSpec.parse(loss)
    mu = as_means(mu)
    if method == "enum":
        # phi is additive, so per-coordinate sums suffice
        total = 0.0
        for m in mu:
            ks, pmf, _ = poisson_support(m, 1e-16)
            total += float(np.dot(pmf, phi(spec, ks[:, None], axis=1)))
        return total - float(phi(spec, mu))
    if method == "mc":
        Y = StreamFamily(seed, 3)(0).poisson(mu, size=(R, mu.size)).astype(np.float64)
        return float(np.mean(phi(spec, Y, axis=1)) - phi(spec, mu))
    raise ValueError(f"unknown method: {method!r}")


# ---------------------------------------------------------------- decomposition


def bias_variance_decomp(mu, g, loss, p: float, B: int, R_outer: int, R_inner: int,
                         seed: int = 0, truth: float | None = None,
                         truth_R: int = MC_BOUND_R) -> DecompositionReport:
    """Monte Carlo decomposition of the mean squared error of ``CB_p`` about ``Err(g)``.

    For each of ``R_outer`` data draws, ``R_inner`` independent CB estimates
    are formed.  The within-draw variance estimates the reducible part; the
    between-draw variance of the inner means, less its expected within-draw
    contribution ``RVar / R_inner``, estimates the irreducible part (clipped
    at zero).
    """
    if R_outer < 2 or R_inner < 2:
        raise ValueError("R_outer and R_inner must be at least 2")
    spec = LossSpec.parse(loss)
    g = as_algorithm(g)
    mu = as_means(mu)
    if truth is None:
        truth = mc_truth(mu, g, spec, 0.0, truth_R, derive_seed(seed, 1), conditional=True).value
    data = StreamFamily(seed, 4)
    vals = np.empty((R_outer, R_inner))
    for r in range(R_outer):
        y = data(r).poisson(mu).astype(np.float64)
        draws = draw_coupled_bootstrap(y, p, B * R_inner, derive_seed(seed, 2, r))
        reps = cb_from_draws(draws, g, spec).per_replicate.reshape(R_inner, B)
        vals[r] = reps.mean(axis=1)
    cond_mean = vals.mean(axis=1)
    rvar = float(np.mean(np.var(vals, axis=1, ddof=1)))
    ivar = max(float(np.var(cond_mean, ddof=1)) - rvar / R_inner, 0.0)
    bias_sq = float((vals.mean() - truth) ** 2)
    total = float(np.mean((vals - truth) ** 2))
    return DecompositionReport(bias_sq, rvar, ivar, total,
                               {"p": p, "B": B, "R_outer": R_outer, "R_inner": R_inner,
                                "seed": seed, "loss": spec.kind, "truth": truth})


def ivar_exact(mu, g, loss, p: float, budget: int = ENUM_BUDGET) -> float:
    """``Var(CB_p^inf(g)(Y))`` over the truncated support of ``Y ~ Pois(mu)``."""
    spec = LossSpec.parse(loss)
    mu = as_means(mu)
    rows, w, _, _ = _enum_grid(mu, budget)
    cache = FitCache(g)
    vals = np.array([cb_infinite_exact(r, g, spec, p, budget, cache) for r in rows])
    m = np.dot(w, vals) / w.sum()
    return float(np.dot(w, (vals - m) ** 2) / w.sum())


# ---------------------------------------------------------------- bounds


def _mean_se(x):
    x = np.asarray(x, dtype=np.float64)
    return float(x.mean()), float(x.std(ddof=1) / np.sqrt(x.size))


def _var_se(x):
    # delta-method SE of the sample variance
    x = np.asarray(x, dtype=np.float64)
    v = float(np.var(x, ddof=1))
    c = x - x.mean()
    m4 = float(np.mean(c ** 4))
    return v, float(np.sqrt(max(m4 - v * v, 0.0) / x.size))


def _self_terms(spec, Y, fits):
    """``D(Y, g(Y)) + <Y, grad phi(g(Y))>`` per row."""
    return row_losses(spec, Y, fits) + np.sum(Y * grad_phi(spec, fits), axis=1)


def bound_rhs(kind: str, mu, g, loss, p: float, B: int = 1, R: int = MC_BOUND_R,
              seed: int = 0, budget: int = ENUM_BUDGET) -> BoundValue:
    """Right-hand side of the bias, reducible-variance or irreducible-variance bound.

    ``bias``:  ``(5p/3) sqrt(Var[D(Ytilde, g(Y))] sum(mu))``  (Monte Carlo)
    ``rvar``:  ``2/B Var[D(Y,g(Y)) + <Y, grad phi(g(Y))>]
               + 2/(Bp) sum_i mu_i E[grad_i phi(g(Y_p))^2]
               + 2/B sum_i mu_i^2 Var[grad_i phi(g(Y_p))]``
               (Monte Carlo; the O(p/B) remainder is not included)
    ``ivar``:  ``2 Var[D(Y,g(Y)) + <grad phi(g(Y)), Y>] + 2 E[<Phi_g(Y), Y>^2]`` with
               ``Phi_{g,i}(y) = max_{0 <= z <= y} |grad_i phi(g(z))|`` (enumeration; tiny
               instances only, counts truncated at ``PHI_MAX_COUNT``)
    """
    spec = LossSpec.parse(loss)
    g = as_algorithm(g)
    mu = as_means(mu)
    n = mu.size
    if kind == "bias":
        if p == 0:
            return BoundValue(0.0, 0.0, {"var_loss": float("nan")})
        t = mc_truth(mu, g, spec, 0.0, R, derive_seed(seed, 5))
        var_se = np.sqrt(2.0 / (R - 1)) * t.variance
        c = 5.0 * p / 3.0 * np.sqrt(mu.sum())
        val = c * np.sqrt(t.variance)
        se = c * var_se / (2.0 * np.sqrt(t.variance)) if t.variance > 0 else 0.0
        return BoundValue(float(val), float(se), {"var_loss": t.variance})
    if kind == "rvar":
        if not 0.0 < p < 1.0:
            raise ValueError("p must lie in (0, 1)")
        if B < 1:
            raise ValueError("B must be at least 1")
        fam0, famp = StreamFamily(seed, 6), StreamFamily(seed, 7)
        s_vals, g2, gsum, gsq = [], np.zeros(n), np.zeros(n), np.zeros(n)
        grad_w2 = []
        for k, size in _chunks(R, n):
            Y = fam0(k).poisson(mu, size=(size, n)).astype(np.float64)
            s_vals.append(_self_terms(spec, Y, prepare_fit(spec, g.fit_batch(Y))))
            Yp = famp(k).poisson((1.0 - p) * mu, size=(size, n)).astype(np.float64)
            gr = grad_phi(spec, prepare_fit(spec, g.fit_batch(Yp)))
            grad_w2.append((gr ** 2) @ mu)
            gsum += gr.sum(axis=0)
            gsq += (gr ** 2).sum(axis=0)
        s_vals = np.concatenate(s_vals)
        grad_w2 = np.concatenate(grad_w2)
        v1, v1_se = _var_se(s_vals)
        e2, e2_se = _mean_se(grad_w2)
        mean_g = gsum / R
        var_g = (gsq - R * mean_g ** 2) / (R - 1)
        t1 = 2.0 / B * v1
        t2 = 2.0 / (B * p) * e2
        t3 = 2.0 / B * float(np.dot(mu ** 2, var_g))
        se = float(np.hypot(2.0 / B * v1_se, 2.0 / (B * p) * e2_se))
        return BoundValue(t1 + t2 + t3, se, {"t1": t1, "t2": t2, "t3": t3})
    if kind == "ivar":
        if n > PHI_MAX_N:
            raise ValueError(f"ivar bound enumerates dominated vectors; needs n <= {PHI_MAX_N}")
        rows, w, miss, shape = _enum_grid(mu, budget, cap=PHI_MAX_COUNT)
        fits = prepare_fit(spec, FitCache(g).fit_rows(rows))
        s = _self_terms(spec, rows, fits)
        m = np.dot(w, s) / w.sum()
        v = float(np.dot(w, (s - m) ** 2) / w.sum())
        # running max along each axis of the grid = max over dominated arguments
        big = np.abs(grad_phi(spec, fits)).reshape(shape + (n,))
        for ax in range(n):
            big = np.maximum.accumulate(big, axis=ax)
        Phi = big.reshape(-1, n)
        e = float(np.dot(w, np.sum(Phi * rows, axis=1) ** 2) / w.sum())
        return BoundValue(2.0 * v + 2.0 * e, 0.0,
                          {"var_term": 2.0 * v, "phi_term": 2.0 * e, "mass_deficit": miss})
    raise ValueError(f"unknown bound kind: {kind!r}")
