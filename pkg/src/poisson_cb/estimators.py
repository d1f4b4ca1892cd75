"""Test-error estimators: coupled bootstrap (CB) and Hudson-lemma unbiased (UE).

All estimators return sums over coordinates (not averages); divide by ``n``
for per-sample units.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .algorithms.base import FitAlgorithm, as_algorithm
from .losses import LossSpec, as_counts, as_means, prepare_fit, xlogx
from .thinning import BootstrapDraws, draw_coupled_bootstrap, stream

ENUM_BUDGET = 1_000_000
LOO_CHUNK = 256


@dataclass
class ErrorEstimate:
    value: float
    std_error: float
    per_replicate: np.ndarray
    n_padded_summands: int = 0
    config: dict = field(default_factory=dict)

    def per_sample(self, n: int) -> tuple[float, float]:
        return self.value / n, self.std_error / n


def _summary(values: np.ndarray) -> tuple[float, float]:
    B = values.size
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1) / np.sqrt(B)) if B > 1 else 0.0
    return mean, se


def cb_replicate_values(spec: LossSpec, y_star, y_dagger, fits) -> np.ndarray:
    """Row-wise ``D(Y_dagger, g) + phi(Y*) - phi(Y_dagger)`` for padded fits.

    Evaluated in the equivalent form ``phi(Y*) - phi(g) - <grad phi(g), Y_dagger - g>``
    in which ``phi(Y_dagger)`` cancels exactly; this keeps the result accurate
    when ``Y_dagger`` is large (small ``p``).
    """
    y_star = np.atleast_2d(y_star)
    y_dagger = np.atleast_2d(y_dagger)
    fits = np.atleast_2d(fits)
    if spec.kind == "squared":
        return np.sum(y_star * y_star + fits * fits - 2.0 * fits * y_dagger, axis=1)
    return 2.0 * np.sum(xlogx(y_star) - y_star - y_dagger * np.log(fits) + fits, axis=1)


def _padded_count(spec: LossSpec, raw_fits, targets) -> int:
    if spec.kind != "deviance":
        return 0
    return int(np.count_nonzero((raw_fits == 0) & (targets != 0)))


def cb_from_draws(
    draws: BootstrapDraws, g, loss: LossSpec | str, fits=None
) -> ErrorEstimate:
    """CB estimate from pre-drawn thinning noise (lets a tuning grid share draws)."""
    spec = LossSpec.parse(loss)
    g = as_algorithm(g)
    y_star, y_dagger = draws.y_star, draws.y_dagger
    raw = g.fit_batch(y_star) if fits is None else np.asarray(fits, dtype=np.float64)
    if raw.shape != y_star.shape:
        raise ValueError("algorithm output has the wrong shape")
    fitted = prepare_fit(spec, raw)
    values = cb_replicate_values(spec, y_star, y_dagger, fitted)
    mean, se = _summary(values)
    return ErrorEstimate(
        value=mean,
        std_error=se,
        per_replicate=values,
        n_padded_summands=_padded_count(spec, raw, y_dagger),
        config={"method": "cb", "p": draws.p, "B": draws.B, "loss": spec.kind, "seed": draws.seed},
    )


def cb_estimate(y, g, loss: LossSpec | str, p: float, B: int, seed: int) -> ErrorEstimate:
    """Coupled-bootstrap estimate of the mean-shrunken test error ``Err_p(g)``."""
    draws = draw_coupled_bootstrap(y, p, B, seed)
    return cb_from_draws(draws, g, loss)


def _loo_fits(g: FitAlgorithm, y: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """``g_i(y - e_i)`` for ``i`` in ``idx`` (all with ``y_i > 0``)."""
    out = np.empty(idx.size)
    for start in range(0, idx.size, LOO_CHUNK):
        sel = idx[start:start + LOO_CHUNK]
        rows = np.repeat(y[None, :], sel.size, axis=0)
        rows[np.arange(sel.size), sel] -= 1.0
        fits = np.atleast_2d(g.fit_batch(rows))
        out[start:start + sel.size] = fits[np.arange(sel.size), sel]
    return out


def _ue_pieces(spec: LossSpec, y, fit_raw, loo_raw, positive):
    """Per-coordinate UE summands; ``loo_raw`` holds g_i(y - e_i) where ``positive``."""
    fit = prepare_fit(spec, fit_raw)
    loo = np.zeros_like(y)
    loo[positive] = loo_raw
    if spec.kind == "squared":
        return y * y + fit * fit - 2.0 * loo * y
    loo_p = prepare_fit(spec, np.where(positive, loo, 1.0))
    return 2.0 * (xlogx(y) - np.where(positive, y * np.log(loo_p), 0.0) + fit - y)


def ue_estimates(y, g, losses) -> dict[str, ErrorEstimate]:
    """UE for several losses from one set of refits (keys are loss kinds)."""
    specs = [LossSpec.parse(l) for l in losses]
    g = as_algorithm(g)
    y = as_counts(y)
    fit_raw = np.asarray(g.fit(y), dtype=np.float64)
    positive = y > 0
    idx = np.flatnonzero(positive)
    loo_raw = _loo_fits(g, y, idx)
    out = {}
    for spec in specs:
        value = float(np.sum(_ue_pieces(spec, y, fit_raw, loo_raw, positive)))
        out[spec.kind] = ErrorEstimate(
            value=value,
            std_error=0.0,
            per_replicate=np.array([value]),
            n_padded_summands=_padded_count(spec, loo_raw, y[idx]),
            config={"method": "ue", "loss": spec.kind, "n_fits": 1 + idx.size},
        )
    return out


def ue_estimate(y, g, loss: LossSpec | str) -> ErrorEstimate:
    """Unbiased estimate of ``Err(g)`` built from Hudson's identity.

    Runs ``g`` once on ``y`` and once on each ``y - e_i`` with ``y_i > 0``;
    coordinates with ``y_i = 0`` contribute nothing to the leave-one-out term.
    """
    spec = LossSpec.parse(loss)
    return ue_estimates(y, g, [spec])[spec.kind]


def ue_sampled(
    y, g, loss: LossSpec | str, m: int, seed: int, subsample: str = "summand"
) -> ErrorEstimate:
    """UE with the leave-one-out work restricted to ``m`` random coordinates.

    A uniform subset ``S`` of size ``m`` is drawn without replacement and the
    sum over ``S`` is scaled by ``n/m``.  With ``subsample="summand"`` whole
    UE summands are sampled; with ``subsample="correction"`` only the
    leave-one-out inner product is sampled and the remaining terms are exact.
    Either way at most ``m + 1`` runs of ``g`` are made.
    """
    spec = LossSpec.parse(loss)
    return ue_sampled_estimates(y, g, [spec], m, seed, subsample)[spec.kind]


def sample_subset(n: int, m: int, seed: int) -> np.ndarray:
    if not 1 <= int(m) <= n:
        raise ValueError(f"m must lie in [1, {n}]")
    return np.sort(stream(seed, 0).choice(n, size=int(m), replace=False))


def ue_sampled_estimates(y, g, losses, m: int, seed: int, subsample: str = "summand",
                         subset=None) -> dict[str, ErrorEstimate]:
    """``ue_sampled`` for several losses sharing one subset and one set of refits."""
    if subsample not in ("summand", "correction"):
        raise ValueError(f"unknown subsample mode: {subsample!r}")
    specs = [LossSpec.parse(l) for l in losses]
    g = as_algorithm(g)
    y = as_counts(y)
    n = y.size
    S = sample_subset(n, m, seed) if subset is None else np.asarray(subset)
    m = S.size
    fit_raw = np.asarray(g.fit(y), dtype=np.float64)
    ys = y[S]
    pos_s = ys > 0
    loo_raw = _loo_fits(g, y, S[pos_s])
    out = {}
    for spec in specs:
        sub_terms = _ue_pieces(spec, ys, fit_raw[S], loo_raw, pos_s)
        if subsample == "summand":
            sampled, exact = sub_terms, 0.0
        else:
            # sub_terms minus its whole-vector part leaves the correction term only
            zero_loo = _ue_pieces(spec, ys, fit_raw[S], np.zeros(0), np.zeros(m, bool))
            sampled = sub_terms - zero_loo
            exact = float(np.sum(_ue_pieces(spec, y, fit_raw, np.zeros(0), np.zeros(n, bool))))
        value = exact + float(np.sum(n / m * sampled))
        # finite-population standard error of the scaled sample total
        se = 0.0
        if m > 1:
            se = float(n * np.sqrt((1.0 - m / n) * np.var(sampled, ddof=1) / m))
        out[spec.kind] = ErrorEstimate(
            value=value,
            std_error=se,
            per_replicate=np.array([value]),
            n_padded_summands=_padded_count(spec, loo_raw, ys[pos_s]),
            config={"method": "ue_ss", "loss": spec.kind, "m": m, "seed": seed,
                    "subsample": subsample, "n_fits": 1 + int(pos_s.sum())},
        )
    return out


class FitCache:
    """Memoize ``g`` on integer count vectors (used by the enumeration oracles)."""

    def __init__(self, g):
        self.g = as_algorithm(g)
        self._memo: dict[bytes, np.ndarray] = {}

    def fit_rows(self, rows: np.ndarray) -> np.ndarray:
        rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
        keys = [r.tobytes() for r in rows]
        missing = [k for k in dict.fromkeys(keys) if k not in self._memo]
        if missing:
            todo = np.array([np.frombuffer(k, dtype=np.float64) for k in missing])
            fits = np.atleast_2d(self.g.fit_batch(todo))
            for k, f in zip(missing, fits):
                self._memo[k] = np.asarray(f, dtype=np.float64)
        return np.array([self._memo[k] for k in keys])

    def fit(self, y) -> np.ndarray:
        return self.fit_rows(np.asarray(y, dtype=np.float64)[None, :])[0]


def product_grid(upper) -> np.ndarray:
    """All integer vectors ``0 <= z <= upper`` as rows, last index fastest."""
    ranges = [np.arange(int(u) + 1, dtype=np.float64) for u in upper]
    return np.array(list(itertools.product(*ranges)), dtype=np.float64).reshape(-1, len(ranges))


def cb_infinite_exact(y, g, loss: LossSpec | str, p: float, budget: int = ENUM_BUDGET,
                      cache: FitCache | None = None) -> float:
    """Exact ``E[CB_p(g) | Y = y]`` by summing over every thinning outcome."""
    spec = LossSpec.parse(loss)
    y = as_counts(y)
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    size = int(np.prod(y + 1.0))
    if size > budget:
        raise ValueError(f"enumeration needs {size} points, budget is {budget}")
    cache = cache or FitCache(g)
    omega = product_grid(y)
    weights = np.ones(omega.shape[0])
    for i in range(y.size):
        weights *= stats.binom.pmf(omega[:, i], y[i], p)
    y_star = y[None, :] - omega
    y_dagger = (1.0 - p) / p * omega
    fits = prepare_fit(spec, cache.fit_rows(y_star))
    values = cb_replicate_values(spec, y_star, y_dagger, fits)
    return float(np.dot(weights, values))


def choose_p(mu_proxy) -> float:
    """``min(0.1, sum(mu) / sum(mu^2))``."""
    mu = as_means(mu_proxy)
    if not np.any(mu > 0):
        raise ValueError("mean proxy must not be identically zero")
    return float(min(0.1, mu.sum() / np.sum(mu * mu)))


def illdef_probability(mu: float, p: float) -> tuple[float, float]:
    """Chance that a deviance summand needs padding when ``n = 1, g(0) = 0``.

    Returns ``(ue_prob, cb_prob) = (exp(-mu) mu, exp(-mu)(exp(p mu) - 1))``.
    """
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    return float(np.exp(-mu) * mu), float(np.exp(-mu) * np.expm1(p * mu))
