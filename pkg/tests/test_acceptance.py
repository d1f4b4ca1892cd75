"""Acceptance criteria, one test each.

Every test prints a single ``PASS``/``FAIL`` line (also repeated in the pytest
terminal summary).  Criteria that are not met at desk scale are marked
``xfail(strict=True)``: they still run in full and report ``FAIL``, and an
unexpected pass breaks the suite.  The analysis of each is in
``notes/decisions.md``.
"""

import json
import time
import warnings
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from poisson_cb.algorithms import LinearShrinkage, PSplineCounts, Threshold, TVDenoiser
from poisson_cb.algorithms.pspline import bin_samples
from poisson_cb.algorithms.tv import phantom
from poisson_cb.cli import main
from poisson_cb.estimators import (
    cb_estimate,
    cb_from_draws,
    cb_infinite_exact,
    choose_p,
    ue_sampled_estimates,
)
from poisson_cb.experiments.config import validate
from poisson_cb.experiments.designs import two_cluster_sample
from poisson_cb.experiments.runners import run_simulation, summarize, truth_curve
from poisson_cb.experiments.verify import (
    suite_bounds,
    suite_hudson,
    suite_illdef,
    suite_limit,
    suite_thinning,
)
from poisson_cb.losses import LossSpec
from poisson_cb.oracles import bias_variance_decomp, bound_rhs, enum_truth, mc_truth, poisson_support
from poisson_cb.thinning import derive_seed, draw_coupled_bootstrap, stream

LEDGER = "criterion not met at desk scale; see notes/decisions.md"
DATA = Path(__file__).parent / "data"


def verdict(num: int, title: str, passed: bool, runtime: float, limit: float, detail: str):
    ok = bool(passed) and runtime < limit
    line = (f"{'PASS' if ok else 'FAIL'} criterion {num}: {title} | {detail} | "
            f"runtime {runtime:.1f}s (limit {limit:.0f}s)")
    print(line)
    ACCEPTANCE_LINES.append(line)
    return ok


def from_report(report):
    worst = [c for c in report["checks"] if not c["passed"]]
    return f"{len(report['checks']) - len(worst)}/{len(report['checks'])} checks"


# ---------------------------------------------------------------- 1-6: exact and fast


def test_c01_thinning_law():
    t = time.perf_counter()
    rep = suite_thinning()
    worst = max(c["value"] for c in rep["checks"])
    assert verdict(1, "thinning factorization", rep["passed"], time.perf_counter() - t, 1,
                   f"{from_report(rep)}, max rel err {worst:.1e} < 1e-10")


def test_c02_hudson_identity():
    t = time.perf_counter()
    rep = suite_hudson()
    worst = max(c["value"] for c in rep["checks"])
    assert verdict(2, "Hudson identity", rep["passed"], time.perf_counter() - t, 10,
                   f"{from_report(rep)}, max residual {worst:.1e} < 1e-8")


def _outer_expectation(mu, g, loss, p, deficit=1e-15):
    """``E_Y[CB_p^inf(Y)]`` over the truncated product support of ``Pois(mu)``."""
    supports = [poisson_support(m, deficit) for m in mu]
    total = 0.0
    for y1, w1 in zip(supports[0][0], supports[0][1]):
        for y2, w2 in zip(supports[1][0], supports[1][1]):
            total += w1 * w2 * cb_infinite_exact([y1, y2], g, loss, p)
    return total


def test_c03_mean_shrunken_unbiasedness():
    t = time.perf_counter()
    mu, g = np.array([1.0, 2.0]), Threshold(1.0, "hard")
    worst = 0.0
    for loss in ("squared", "deviance"):
        for p in (0.1, 0.3):
            lhs = _outer_expectation(mu, g, loss, p)
            rhs = enum_truth(mu, g, loss, p).value
            worst = max(worst, abs(lhs - rhs) / abs(rhs))
    assert verdict(3, "mean-shrunken unbiasedness", worst < 1e-6, time.perf_counter() - t, 60,
                   f"max relative gap {worst:.1e} < 1e-6 over 2 losses x 2 p")


def test_c04_noiseless_limit():
    t = time.perf_counter()
    rep = suite_limit()
    ratios = [r for c in rep["checks"] for r in c["value"]]
    ok = rep["passed"] and len(rep["checks"]) >= 3
    assert verdict(4, "noiseless limit", ok, time.perf_counter() - t, 10,
                   f"{from_report(rep)} fixtures, gap ratios in [{min(ratios):.2f}, {max(ratios):.2f}]")


def test_c05_illdefined_deviance():
    t = time.perf_counter()
    rep = suite_illdef()
    z = max(abs(c["value"] - c["target"]) / c["se"] for c in rep["checks"])
    assert verdict(5, "ill-defined deviance frequencies", rep["passed"], time.perf_counter() - t,
                   60, f"{from_report(rep)}, max |z| {z:.2f} <= 4")


def test_c06_bias_bound():
    t = time.perf_counter()
    rep = suite_bounds()
    checks = [{"passed": c["passed"], "ratio": c["value"] / c["target"]}
              for c in rep["checks"] if c["name"].startswith("bias")]
    # larger constant designs by Monte Carlo: gap + 2 SE against the bound
    g = LinearShrinkage(0.7)
    for n, m in ((100, 0.5), (100, 3.0), (20, 10.0)):
        mu = np.full(n, m)
        for loss in ("squared", "deviance"):
            err = mc_truth(mu, g, loss, 0.0, 20_000, derive_seed(6, n, int(m * 10)), conditional=True)
            for k, p in enumerate((0.05, 0.1, 0.3, 0.5)):
                errp = mc_truth(mu, g, loss, p, 20_000, derive_seed(6, n, int(m * 10), k + 1),
                                conditional=True)
                gap = abs(errp.value - err.value) + 2 * np.hypot(errp.std_error, err.std_error)
                rhs = bound_rhs("bias", mu, g, loss, p, R=20_000, seed=7).value
                checks.append({"passed": gap <= rhs, "ratio": gap / rhs})
    ok = all(c["passed"] for c in checks)
    ratio = max(c["ratio"] for c in checks)
    assert verdict(6, "bias bound", ok, time.perf_counter() - t, 300,
                   f"{sum(c['passed'] for c in checks)}/{len(checks)} (design, loss, p) points, "
                   f"max gap/bound {ratio:.3f}")


# ---------------------------------------------------------------- 7: reducible variance


C7_B = (32, 64, 128, 256, 512, 1024)
C7_MU = (1.0, 3.0, 10.0, 30.0)


@pytest.mark.slow
def test_c07_reducible_variance_scaling():
    t = time.perf_counter()
    g, n, p = LinearShrinkage(), 100, 0.1
    worst_ratio, slopes = 0.0, []
    n_ok = n_pts = 0
    for loss in ("squared", "deviance"):
        for i, m in enumerate(C7_MU):
            mu = np.full(n, m)
            unit = bound_rhs("rvar", mu, g, loss, p, B=1, R=20_000, seed=derive_seed(7, i)).value
            rv = []
            for j, B in enumerate(C7_B):
                rep = bias_variance_decomp(mu, g, LossSpec(loss), p, B, 20, 20,
                                           derive_seed(70, i, j), truth=0.0)
                rv.append(rep.reducible_var)
                ratio = rep.reducible_var / (unit / B)
                worst_ratio = max(worst_ratio, ratio)
                n_pts += 1
                n_ok += ratio <= 1.1
            slopes.append(np.polyfit(np.log(C7_B), np.log(rv), 1)[0])
    ok = n_ok == n_pts and all(abs(s + 1) <= 0.1 for s in slopes)
    assert verdict(7, "reducible-variance scaling", ok, time.perf_counter() - t, 1800,
                   f"{n_ok}/{n_pts} grid points under bound+10% (max RVar/bound {worst_ratio:.3f}), "
                   f"slopes in [{min(slopes):.3f}, {max(slopes):.3f}]")


# ---------------------------------------------------------------- 8: simulation panels


PANELS = {
    "a": ({"kind": "lowdim"}, {"name": "poisson_glm"}, 20_000),
    "b": ({"kind": "lowdim"}, {"name": "tree"}, 5_000),
    "c": ({"kind": "highdim"}, {"name": "lasso_cv"}, 2_000),
    "d": ({"kind": "denoising"}, {"name": "eb_one_step", "params": {"h": 0.85}}, 50_000),
}


@pytest.mark.slow
def test_c08_simulation_panels():
    t = time.perf_counter()
    fails, zmax, sd_ok, sd_txt = [], 0.0, True, []
    for name, (design, alg, R) in PANELS.items():
        cfg = validate({"design": design, "algorithm": alg, "methods": ["cb", "ue"],
                        "p": [0.05, 0.1, 0.3, 0.5, 0.7], "B": 100, "repetitions": 100,
                        "seed": 8, "truth": {"R": R}})
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rows, _ = run_simulation(cfg)
        summ = summarize(rows)
        for method, p, loss, _, _, sd, _, _, _, z in summ:
            zmax = max(zmax, abs(z))
            if abs(z) > 4:
                fails.append(f"{name}/{method}/{p}/{loss} z={z:.2f}")
        if name == "c":
            sd_of = {(m, p, l): sd for m, p, l, _, _, sd, *_ in summ}
            for loss in ("squared", "deviance"):
                cb_sd, ue_sd = sd_of["cb", 0.05, loss], sd_of["ue", None, loss]
                sd_ok &= cb_sd < ue_sd
                sd_txt.append(f"{loss} sd CB {cb_sd:.3g} vs UE {ue_sd:.3g}")
    ok = not fails and sd_ok
    assert verdict(8, "simulation panels", ok, time.perf_counter() - t, 7200,
                   f"max |z| {zmax:.2f} (fails: {fails or 'none'}); lasso panel {'; '.join(sd_txt)}")


# ---------------------------------------------------------------- 9: CB vs sampled-summand UE


def variance_table(n, m_mu, reps=200, B=100, m=100, seed=9):
    """Variances over repetitions of CB (auto ``p``) and UE_ss for constant means."""
    mu = np.full(n, m_mu)
    g, p = LinearShrinkage(), choose_p(mu)
    specs = [LossSpec("squared"), LossSpec("deviance")]
    cb = {s.kind: [] for s in specs}
    ss = {s.kind: [] for s in specs}
    for r in range(reps):
        y = stream(seed, n, int(10 * m_mu), r).poisson(mu).astype(np.float64)
        draws = draw_coupled_bootstrap(y, p, B, derive_seed(seed, n, int(10 * m_mu), r, 1))
        raw = g.fit_batch(draws.y_star)
        for s in specs:
            cb[s.kind].append(cb_from_draws(draws, g, s, fits=raw).value / n)
        est = ue_sampled_estimates(y, g, specs, m, derive_seed(seed, n, int(10 * m_mu), r, 2))
        for s in specs:
            ss[s.kind].append(est[s.kind].value / n)
    return {k: (np.var(cb[k], ddof=1), np.var(ss[k], ddof=1)) for k in cb}


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason=LEDGER)
def test_c09_sampled_summands_pattern():
    t = time.perf_counter()
    ok, cells = True, []
    for n in (1_000, 10_000):
        for m_mu in (0.5, 3.0, 20.0):
            tab = variance_table(n, m_mu)
            vc, vs = tab["deviance"]
            want_cb_le = not (n == 1_000 and m_mu == 20.0)
            dev_ok = (vc <= vs) == want_cb_le
            sq_ok = True
            if m_mu == 20.0:
                sq_ok = tab["squared"][0] > tab["squared"][1]
            ok &= dev_ok and sq_ok
            cells.append(f"n={n} mu={m_mu}: dev {vc / vs:.2f}{'' if dev_ok else '!'} "
                         f"sq {tab['squared'][0] / tab['squared'][1]:.2f}{'' if sq_ok else '!'}")
    assert verdict(9, "CB vs UE_ss variance pattern", ok, time.perf_counter() - t, 3600,
                   "var ratio CB/UE_ss (! = wrong sign) " + "; ".join(cells))


# ---------------------------------------------------------------- 10: TV tuning


C10_TAUS = np.logspace(-2, 1, 13)


@pytest.mark.slow
def test_c10_tv_tuning():
    t = time.perf_counter()
    size, p, B = 32, 0.1, 50
    mu = phantom(size).ravel()
    factory = lambda tau: TVDenoiser((size, size), tau)
    grid = [{"tau": tau} for tau in C10_TAUS]
    losses = ("squared", "deviance")
    truth = truth_curve(mu, lambda prm: factory(prm["tau"]), grid, losses, 40, 10)
    t_arg = {l: int(np.argmin(v)) for l, v in truth.items()}
    near, order = 0, 0
    seeds = 20
    for s in range(seeds):
        y = stream(10, 1, s).poisson(mu).astype(np.float64)
        draws = draw_coupled_bootstrap(y, p, B, derive_seed(10, 2, s))
        cb = {l: [] for l in losses}
        for tau in C10_TAUS:
            g = factory(tau)
            raw = g.fit_batch(draws.y_star)
            for l in losses:
                cb[l].append(cb_from_draws(draws, g, l, fits=raw).value)
        a = {l: int(np.argmin(v)) for l, v in cb.items()}
        near += all(abs(a[l] - t_arg[l]) <= 1 for l in losses)
        order += a["deviance"] >= a["squared"]
    ok = near >= 0.8 * seeds and order >= 0.8 * seeds
    assert verdict(10, "TV tuning", ok, time.perf_counter() - t, 3600,
                   f"truth argmin tau sq {C10_TAUS[t_arg['squared']]:.3g} "
                   f"dev {C10_TAUS[t_arg['deviance']]:.3g}; within one step {near}/{seeds}; "
                   f"dev >= sq {order}/{seeds}")


# ---------------------------------------------------------------- 11: density tuning


C11_BINS, C11_KNOTS, C11_B = 20, 10, 100
C11_LAMS = np.logspace(-2, 4, 13)


def density_argmins(x, seed):
    counts, edges = bin_samples(x, C11_BINS)
    draws = draw_coupled_bootstrap(counts, 0.1, C11_B, seed)
    cb = {"squared": [], "deviance": []}
    for lam in C11_LAMS:
        g = PSplineCounts(edges, C11_KNOTS, lam)
        raw = g.fit_batch(draws.y_star)
        for l in cb:
            cb[l].append(cb_from_draws(draws, g, l, fits=raw).value)
    return {l: int(np.argmin(v)) for l, v in cb.items()}


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason=LEDGER)
def test_c11_density_tuning():
    t = time.perf_counter()
    seeds, order = 20, 0
    for s in range(seeds):
        a = density_argmins(two_cluster_sample(116, s), derive_seed(11, s))
        order += a["deviance"] >= a["squared"]
    # isotropic vs anisotropic with equal penalties, one sample
    counts, edges = bin_samples(two_cluster_sample(116, 0), C11_BINS)
    iso = PSplineCounts(edges, C11_KNOTS, 10.0).fit(counts)
    ani = PSplineCounts(edges, C11_KNOTS, (10.0, 10.0)).fit(counts)
    exact = bool(np.array_equal(iso, ani))
    ok = order >= 0.8 * seeds and exact
    assert verdict(11, "density tuning", ok, time.perf_counter() - t, 1800,
                   f"dev lambda >= sq lambda in {order}/{seeds} seeds "
                   f"({C11_BINS}x{C11_BINS} bins, {C11_KNOTS} knots); iso == aniso diagonal: {exact}")


# ---------------------------------------------------------------- 12: determinism


def _artifacts(root: Path):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*"))
            if p.is_file()}


def _run_all(root: Path, capsys):
    root.mkdir()
    counts = root / "y.txt"
    counts.write_text("".join(f"{v}\n" for v in stream(12, 0).poisson(3.0, size=40)))
    samples = root / "x.txt"
    np.savetxt(samples, two_cluster_sample(116, 3))
    cfg = root / "cfg.json"
    cfg.write_text(json.dumps({"design": {"kind": "denoising", "n": 40},
                               "algorithm": {"name": "eb_one_step"}, "B": 20,
                               "repetitions": 3, "seed": 4, "truth": {"R": 200}}))
    cmds = [
        ["estimate", "--counts", str(counts), "--algorithm", "soft_threshold", "--param", "lam=1",
         "--B", "30", "--seed", "2", "--out", str(root / "est.csv")],
        ["estimate", "--counts", str(counts), "--algorithm", "linear_shrinkage",
         "--method", "ue_ss", "--m", "10", "--seed", "2", "--out", str(root / "ess.csv")],
        ["simulate", "--config", str(cfg), "--out", str(root / "sim.csv")],
        ["tune", "--counts", str(counts), "--algorithm", "linear_shrinkage", "--grid", "lin:0:1:5",
         "--B", "20", "--seed", "3", "--out", str(root / "tune.csv")],
        ["denoise", "--image", str(DATA / "phantom32.pgm"), "--tune", "--grid", "0.1,1",
         "--B", "4", "--seed", "5", "--out", str(root / "den.pgm")],
        ["density", "--samples", str(samples), "--bins", "16", "--knots", "6", "--grid", "1,100",
         "--B", "5", "--seed", "6", "--out", str(root / "dens.csv")],
        ["verify", "thinning", "--out", str(root / "thin.json")],
    ]
    stdout = []
    for cmd in cmds:
        assert main(cmd) == 0, cmd
        stdout.append(capsys.readouterr().out)
    return _artifacts(root), stdout


def test_c12_determinism(tmp_path, capsys):
    t = time.perf_counter()
    first, out1 = _run_all(tmp_path / "run1", capsys)
    second, out2 = _run_all(tmp_path / "run2", capsys)
    same = first.keys() == second.keys() and all(first[k] == second[k] for k in first)
    ok = same and out1 == out2
    assert verdict(12, "CLI determinism", ok, time.perf_counter() - t, 600,
                   f"{len(first)} artifacts from 6 subcommands byte-identical: {ok}")
