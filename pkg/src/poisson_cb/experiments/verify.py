"""Self-check suites run by ``poisson-cb verify``.

Each suite returns a report dict ``{"suite", "passed", "checks": [...]}``;
every check records the measured value, its target and the tolerance used.
All randomness is drawn from fixed seeds.
"""

from __future__ import annotations

import numpy as np
from scipy import stats

from ..algorithms import Constant, Identity, LinearShrinkage, Threshold
from ..estimators import cb_infinite_exact, illdef_probability, ue_estimate
from ..losses import LossSpec
from ..oracles import bias_variance_decomp, bound_rhs, enum_truth, hudson_check, poisson_support
from ..thinning import draw_coupled_bootstrap, stream

SEED = 20240


def _check(name, value, target, passed, **extra):
    return {"name": name, "value": value, "target": target, "passed": bool(passed), **extra}


def _report(suite, checks):
    return {"suite": suite, "passed": all(c["passed"] for c in checks), "checks": checks}


def thinning_pmf_error(mu: float, p: float) -> float:
    """Max relative error between the joint law of ``(Y*, omega)`` and ``Pois x Pois``.

    The joint law is ``Pois(a + b; mu) Binom(b; a + b, p)``; the claimed product
    is ``Pois(a; (1-p) mu) Pois(b; p mu)``.  Both are evaluated on the
    truncated support of each marginal.
    """
    a = poisson_support((1.0 - p) * mu)[0][:, None]
    b = poisson_support(p * mu)[0][None, :]
    joint = stats.poisson.pmf(a + b, mu) * stats.binom.pmf(b, a + b, p)
    prod = stats.poisson.pmf(a, (1.0 - p) * mu) * stats.poisson.pmf(b, p * mu)
    return float(np.max(np.abs(joint - prod) / prod))


def suite_thinning(mus=(0.5, 2.0, 5.0), ps=(0.1, 0.3), tol=1e-10):
    checks = []
    for mu in mus:
        for p in ps:
            err = thinning_pmf_error(mu, p)
            checks.append(_check(f"factorization mu={mu} p={p}", err, 0.0, err < tol, tol=tol))
    return _report("thinning", checks)


HUDSON_FIXTURES = [
    ("identity", Identity()),
    ("constant", Constant(1.5)),
    ("hard_threshold", Threshold(1.0, "hard")),
    ("linear_shrinkage", LinearShrinkage(0.7)),
]


def suite_hudson(mus=((1.0,), (0.5, 3.0), (2.0, 1.0)), tol=1e-8):
    checks = []
    for name, g in HUDSON_FIXTURES:
        for mu in mus:
            r = hudson_check(np.array(mu), g, tol)
            checks.append(_check(f"{name} mu={list(mu)}", r.residual, 0.0, r.passed, tol=tol))
    return _report("hudson", checks)


LIMIT_FIXTURES = [
    ("identity/squared", np.array([2.0, 1.0, 3.0]), Identity(), "squared"),
    ("hard_threshold/squared", np.array([2.0, 1.0, 3.0]), Threshold(1.0, "hard"), "squared"),
    ("linear_shrinkage/deviance", np.array([2.0, 1.0, 4.0]), LinearShrinkage(0.7), "deviance"),
    ("soft_threshold/deviance", np.array([3.0, 2.0, 4.0]), Threshold(0.5, "soft"), "deviance"),
]


def limit_gaps(y, g, loss, ps=(1e-2, 1e-3, 1e-4)):
    """``|E[CB_p | y] - UE(y)|`` for each ``p``."""
    ue = ue_estimate(y, g, loss).value
    return [abs(cb_infinite_exact(y, g, loss, p) - ue) for p in ps]


def suite_limit(lo=8.0, hi=12.0):
    checks = []
    for name, y, g, loss in LIMIT_FIXTURES:
        gaps = limit_gaps(y, g, loss)
        ratios = [gaps[k] / gaps[k + 1] for k in range(len(gaps) - 1)]
        ok = all(lo <= r <= hi for r in ratios)
        checks.append(_check(f"gap ratios {name}", ratios, [lo, hi], ok, gaps=gaps))
    return _report("limit", checks)


def illdef_frequencies(mu: float, p: float, draws: int, seed: int):
    """MC frequency of padded CB deviance summands and of ``Y = 1``.

    Uses ``draws`` independent coordinates with the identity fit and ``B = 1``:
    a CB summand is padded exactly when ``Y* = 0`` while ``omega > 0``.
    """
    y = stream(seed, 0).poisson(mu, size=draws).astype(np.float64)
    d = draw_coupled_bootstrap(y, p, 1, seed)
    cb_freq = float(np.mean((d.y_star[0] == 0) & (d.omega[0] > 0)))
    ue_freq = float(np.mean(y == 1))
    return ue_freq, cb_freq


def suite_illdef(mus=(0.5, 1.0, 3.0), ps=(0.01, 0.1, 0.3, 0.5), draws=1_000_000, z=4.0):
    checks = []
    for i, mu in enumerate(mus):
        for j, p in enumerate(ps):
            ue_freq, cb_freq = illdef_frequencies(mu, p, draws, SEED + 10 * i + j)
            ue_p, cb_p = illdef_probability(mu, p)
            for name, f, q in (("cb", cb_freq, cb_p), ("ue", ue_freq, ue_p)):
                se = np.sqrt(q * (1.0 - q) / draws)
                checks.append(_check(f"{name} mu={mu} p={p}", f, q, abs(f - q) <= z * se + 1e-15,
                                     se=float(se)))
    return _report("illdef", checks)


def suite_bounds(n=3, mu=2.0, ps=(0.05, 0.1, 0.3, 0.5), R=100_000, slack=0.1):
    """Bias bound by exact enumeration and one reducible-variance point."""
    g = LinearShrinkage(0.7)
    means = np.full(n, mu)
    checks = []
    for loss in ("squared", "deviance"):
        err = enum_truth(means, g, loss).value
        for k, p in enumerate(ps):
            gap = abs(enum_truth(means, g, loss, p).value - err)
            rhs = bound_rhs("bias", means, g, loss, p, R=R, seed=SEED + k).value
            checks.append(_check(f"bias {loss} p={p}", gap, rhs, gap <= rhs))
    rep = bias_variance_decomp(np.full(20, 5.0), g, LossSpec("squared"), 0.1, 32, 20, 20, SEED)
    rhs = bound_rhs("rvar", np.full(20, 5.0), g, "squared", 0.1, 32, R=20_000, seed=SEED).value
    checks.append(_check("rvar squared mu=5 B=32", rep.reducible_var, rhs,
                         rep.reducible_var <= (1 + slack) * rhs))
    return _report("bounds", checks)


SUITES = {
    "hudson": suite_hudson,
    "limit": suite_limit,
    "thinning": suite_thinning,
    "illdef": suite_illdef,
    "bounds": suite_bounds,
}


def run_suite(name: str) -> dict:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(sorted(SUITES))}")
    return SUITES[name]()
