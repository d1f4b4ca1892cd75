"""Simulation and tuning-sweep drivers behind the command line.

Every CSV produced here is in per-sample units (sums divided by ``n``).
"""

from __future__ import annotations

import numpy as np

from ..estimators import cb_from_draws, choose_p, ue_estimates, ue_sampled_estimates
from ..losses import LossSpec
from ..oracles import mc_truth
from ..thinning import derive_seed, draw_coupled_bootstrap, stream
from .algorithms import make_algorithm
from .designs import make_design

SIM_HEADER = ["repetition", "method", "p", "loss", "estimate", "std_error",
              "n_padded_summands", "truth_err", "truth_err_se", "truth_err_p", "truth_err_p_se"]

SUMMARY_HEADER = ["method", "p", "loss", "reps", "mean", "sd", "se_mean",
                  "truth", "truth_se", "z"]

DATA_STREAM, CB_STREAM, SS_STREAM, TRUTH_STREAM = 20, 21, 22, 30


def algorithm_context(cfg: dict, X=None) -> dict:
    d = cfg["design"]
    ctx = {"X": X}
    if d["kind"] == "phantom":
        size = int(d.get("size", 32))
        ctx["shape"] = (size, size)
    return ctx


def _truths(mu, g, specs, ps, need_err, need_errp, R, seed):
    err, errp = {}, {}
    for li, spec in enumerate(specs):
        if need_err:
            err[spec.kind] = mc_truth(mu, g, spec, 0.0, R, derive_seed(seed, TRUTH_STREAM, li, 0),
                                      conditional=True)
        if need_errp:
            for pi, p in enumerate(ps):
                errp[spec.kind, p] = mc_truth(mu, g, spec, p, R,
                                              derive_seed(seed, TRUTH_STREAM, li, pi + 1),
                                              conditional=True)
    return err, errp


def run_simulation(cfg: dict):
    """Run a validated simulation config; returns ``(rows, meta)``.

    Within a repetition the bootstrap draws for each ``p`` are shared by all
    losses, and UE refits are shared by all losses.
    """
    X, mu = make_design(cfg["design"])
    n = mu.size
    alg = cfg["algorithm"]
    g = make_algorithm(alg["name"], alg.get("params", {}), algorithm_context(cfg, X))
    specs = [LossSpec.parse(l, cfg["pad_c"]) for l in cfg["losses"]]
    ps = [choose_p(mu)] if cfg["p"] == "auto" else [float(p) for p in cfg["p"]]
    methods = cfg["methods"]
    seed = int(cfg["seed"])
    B = int(cfg["B"])
    reps = int(cfg["repetitions"])
    err, errp = {}, {}
    if cfg["truth"]["enabled"] and reps > 0:
        err, errp = _truths(mu, g, specs, ps, any(m in methods for m in ("ue", "ue_ss")),
                            "cb" in methods, int(cfg["truth"]["R"]), seed)

    def truth_cols(kind, p):
        e, ep = err.get(kind), errp.get((kind, p))
        return [e.value / n if e else None, e.std_error / n if e else None,
                ep.value / n if ep else None, ep.std_error / n if ep else None]

    rows = []
    for r in range(reps):
        y = stream(seed, DATA_STREAM, r).poisson(mu).astype(np.float64)
        if "cb" in methods:
            for pi, p in enumerate(ps):
                draws = draw_coupled_bootstrap(y, p, B, derive_seed(seed, CB_STREAM, r, pi))
                raw = g.fit_batch(draws.y_star)
                for spec in specs:
                    est = cb_from_draws(draws, g, spec, fits=raw)
                    rows.append([r, "cb", p, spec.kind, est.value / n, est.std_error / n,
                                 est.n_padded_summands, *truth_cols(spec.kind, p)])
        if "ue" in methods:
            for kind, est in ue_estimates(y, g, specs).items():
                rows.append([r, "ue", None, kind, est.value / n, est.std_error / n,
                             est.n_padded_summands, *truth_cols(kind, None)])
        if "ue_ss" in methods:
            m = min(int(cfg["m"]), n)
            ests = ue_sampled_estimates(y, g, specs, m, derive_seed(seed, SS_STREAM, r),
                                        cfg["subsample"])
            for kind, est in ests.items():
                rows.append([r, "ue_ss", None, kind, est.value / n, est.std_error / n,
                             est.n_padded_summands, *truth_cols(kind, None)])
    meta = {"n": n, "p": ps, "mu_mean": float(mu.mean()), "losses": [s.kind for s in specs]}
    return rows, meta


def summarize(rows):
    """Per ``(method, p, loss)``: mean, sd and SE over repetitions and the matching truth.

    ``z`` is ``(mean - truth) / sqrt(se_mean^2 + truth_se^2)``.
    """
    groups: dict = {}
    for row in rows:
        _, method, p, loss, est, _, _, te, tes, tp, tps = row
        key = (method, p, loss)
        g = groups.setdefault(key, {"vals": [], "truth": None, "truth_se": None})
        g["vals"].append(est)
        if method == "cb":
            g["truth"], g["truth_se"] = tp, tps
        else:
            g["truth"], g["truth_se"] = te, tes
    out = []
    for (method, p, loss), g in groups.items():
        v = np.asarray(g["vals"], dtype=np.float64)
        sd = float(np.std(v, ddof=1)) if v.size > 1 else 0.0
        se = sd / np.sqrt(v.size) if v.size else float("nan")
        z = None
        if g["truth"] is not None and v.size > 1:
            denom = np.hypot(se, g["truth_se"] or 0.0)
            z = float((v.mean() - g["truth"]) / denom) if denom > 0 else 0.0
        out.append([method, p, loss, int(v.size), float(v.mean()), sd, se, g["truth"],
                    g["truth_se"], z])
    return out


def sweep_header(param_names, with_truth: bool):
    cols = list(param_names) + ["loss", "estimate", "std_error", "n_padded_summands"]
    if with_truth:
        cols += ["truth", "truth_se"]
    return cols + ["argmin"]


def run_sweep(y, factory, grid, losses, p: float, B: int, seed: int, mu=None,
              truth_R: int = 0, truth_seed: int = 0, pad_c: float = 1e-8):
    """CB error curve over a tuning grid with one shared set of bootstrap draws.

    ``factory(params) -> algorithm``; ``grid`` is a list of parameter dicts.
    When ``mu`` and ``truth_R`` are given, each row also carries the Monte
    Carlo test error ``Err(g)``.  Returns ``(header, rows, argmins,
    truth_argmins)``; ``argmins[loss]`` indexes ``grid`` (first minimum on
    ties) and ``truth_argmins`` is empty without a truth.
    """
    if not grid:
        raise ValueError("tuning grid is empty")
    y = np.asarray(y, dtype=np.float64)
    n = y.size
    specs = [LossSpec.parse(l, pad_c) for l in losses]
    names = list(grid[0])
    draws = draw_coupled_bootstrap(y, p, B, seed)
    est = {s.kind: [] for s in specs}
    truth = {s.kind: [] for s in specs}
    for k, params in enumerate(grid):
        g = factory(params)
        raw = g.fit_batch(draws.y_star)
        for li, spec in enumerate(specs):
            est[spec.kind].append(cb_from_draws(draws, g, spec, fits=raw))
            if mu is not None and truth_R:
                truth[spec.kind].append(mc_truth(mu, g, spec, 0.0, truth_R,
                                                 derive_seed(truth_seed, TRUTH_STREAM, k, li),
                                                 conditional=True))
    argmins = {kind: int(np.argmin([e.value for e in vals])) for kind, vals in est.items()}
    with_truth = mu is not None and bool(truth_R)
    rows = []
    for spec in specs:
        for k, params in enumerate(grid):
            e = est[spec.kind][k]
            row = [params[nm] for nm in names] + [spec.kind, e.value / n, e.std_error / n,
                                                  e.n_padded_summands]
            if with_truth:
                t = truth[spec.kind][k]
                row += [t.value / n, t.std_error / n]
            rows.append(row + [k == argmins[spec.kind]])
    truth_argmins = ({kind: int(np.argmin([t.value for t in vals])) for kind, vals in truth.items()}
                     if with_truth else {})
    return sweep_header(names, with_truth), rows, argmins, truth_argmins


def truth_curve(mu, factory, grid, losses, R: int, seed: int, pad_c: float = 1e-8):
    """Monte Carlo ``Err(g)`` (per sample) over a grid; one list per loss."""
    mu = np.asarray(mu, dtype=np.float64)
    specs = [LossSpec.parse(l, pad_c) for l in losses]
    out = {s.kind: [] for s in specs}
    for k, params in enumerate(grid):
        g = factory(params)
        for li, spec in enumerate(specs):
            out[spec.kind].append(mc_truth(mu, g, spec, 0.0, R,
                                           derive_seed(seed, TRUTH_STREAM, k, li),
                                           conditional=True).value / mu.size)
    return out
