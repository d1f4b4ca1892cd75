"""Name -> constructor registry used by configs and the command line.

Some algorithms need context besides their parameters: the design matrix
``X`` (regression), the image ``shape`` (TV) or the bin ``edges`` (P-spline).
"""

from __future__ import annotations

from ..algorithms import (
    Constant,
    EBOneStep,
    Identity,
    LassoPoissonCV,
    LinearShrinkage,
    PoissonGLM,
    PoissonTree,
    PSplineCounts,
    Threshold,
    TVDenoiser,
)


def _need(ctx, key, name):
    if ctx.get(key) is None:
        raise ValueError(f"algorithm {name!r} needs {key!r} (e.g. a design matrix or image shape)")
    return ctx[key]


ALGORITHMS = {
    "identity": lambda prm, ctx: Identity(),
    "constant": lambda prm, ctx: Constant(prm.get("value", 1.0)),
    "linear_shrinkage": lambda prm, ctx: LinearShrinkage(prm.get("weight", 0.8),
                                                         prm.get("floor", 0.01)),
    "soft_threshold": lambda prm, ctx: Threshold(prm.get("lam", 1.0), "soft"),
    "hard_threshold": lambda prm, ctx: Threshold(prm.get("lam", 1.0), "hard"),
    "eb_one_step": lambda prm, ctx: EBOneStep(prm.get("h", 0.85)),
    "poisson_glm": lambda prm, ctx: PoissonGLM(_need(ctx, "X", "poisson_glm"),
                                               prm.get("intercept", True)),
    "lasso_cv": lambda prm, ctx: LassoPoissonCV(_need(ctx, "X", "lasso_cv"), prm.get("K", 5),
                                                prm.get("grid_size", 20), prm.get("seed", 0)),
    "tree": lambda prm, ctx: PoissonTree(_need(ctx, "X", "tree"), prm.get("max_depth", 3),
                                         prm.get("min_leaf", 5)),
    "tv": lambda prm, ctx: TVDenoiser(_need(ctx, "shape", "tv"), prm.get("tau", 1.0),
                                      prm.get("rho", 1e-5)),
    "pspline": lambda prm, ctx: PSplineCounts(_need(ctx, "edges", "pspline"), prm.get("knots", 30),
                                              prm.get("lam", 1.0)),
}

# the tunable parameter of each family, for sweeps
TUNING_PARAM = {
    "linear_shrinkage": "weight",
    "soft_threshold": "lam",
    "hard_threshold": "lam",
    "eb_one_step": "h",
    "tv": "tau",
    "pspline": "lam",
}


def make_algorithm(name: str, params: dict | None = None, context: dict | None = None):
    if name not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {name!r}; choose from {', '.join(sorted(ALGORITHMS))}")
    return ALGORITHMS[name](dict(params or {}), dict(context or {}))
