"""Command-line front end: ``poisson-cb {estimate,simulate,tune,denoise,density,verify}``.

All outputs are deterministic functions of the arguments: the same flags and
seeds produce byte-identical files.  Errors and estimates in CSV output are
per-sample (divided by the number of coordinates).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .estimators import cb_estimate, ue_estimate, ue_sampled
from .experiments import config as cfgmod
from .experiments.algorithms import ALGORITHMS, TUNING_PARAM, make_algorithm
from .experiments.fileio import (
    ParseError,
    csv_text,
    read_counts,
    read_pgm,
    read_samples,
    read_table,
    write_csv,
    write_json,
    write_pgm,
)
from .experiments.runners import SIM_HEADER, SUMMARY_HEADER, run_simulation, run_sweep, summarize
from .experiments.verify import SUITES, run_suite
from .losses import DEFAULT_PAD_C, LossSpec

ESTIMATE_HEADER = ["method", "loss", "p", "B", "seed", "n", "estimate", "std_error",
                   "n_padded_summands"]


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- arg types


def _prob(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError("p must lie strictly between 0 and 1")
    return v


def _pos_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _nonneg_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError("must be nonnegative")
    return v


def _pos_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _param(text):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    k, v = text.split("=", 1)
    try:
        return k, json.loads(v)
    except json.JSONDecodeError:
        return k, v


def _shape(text):
    try:
        h, w = (int(t) for t in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError("shape must look like HxW") from None
    if h < 1 or w < 1:
        raise argparse.ArgumentTypeError("shape must be positive")
    return h, w


def parse_grid(text: str) -> list[float]:
    """``"a,b,c"`` or ``"log:lo:hi:num"`` (base-10 exponents) or ``"lin:lo:hi:num"``."""
    try:
        if text.startswith(("log:", "lin:")):
            kind, lo, hi, num = text.split(":")
            lo, hi, num = float(lo), float(hi), int(num)
            if num < 1:
                raise ValueError
            vals = np.logspace(lo, hi, num) if kind == "log" else np.linspace(lo, hi, num)
            return [float(v) for v in vals]
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed grid: {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("grid is empty")
    return vals


def _grid(text):
    return parse_grid(text)


# ---------------------------------------------------------------- helpers


def _common(p: argparse.ArgumentParser, loss_multi=False, p_default=0.1, B_default=100):
    if loss_multi:
        p.add_argument("--loss", action="append", choices=["squared", "deviance"],
                       help="loss (repeatable; default: both)")
    else:
        p.add_argument("--loss", choices=["squared", "deviance"], default="squared")
    p.add_argument("--p", type=_prob, default=p_default, help="thinning probability")
    p.add_argument("--B", type=_pos_int, default=B_default, help="bootstrap draws")
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--out", help="output path")
    p.add_argument("--config", help="JSON file whose keys provide flag defaults")
    p.add_argument("--pad-c", type=_pos_float, default=DEFAULT_PAD_C,
                   help="padding for zero fitted means under deviance")


def _losses(args):
    return args.loss or ["squared", "deviance"]


def _context(args, n):
    ctx = {}
    if getattr(args, "design", None):
        X = read_table(args.design, "design row")
        if X.shape[0] != n:
            raise UsageError(f"design has {X.shape[0]} rows but there are {n} counts")
        ctx["X"] = X
    if getattr(args, "shape", None):
        h, w = args.shape
        if h * w != n:
            raise UsageError(f"shape {h}x{w} does not match {n} counts")
        ctx["shape"] = (h, w)
    return ctx


def _emit(path, text):
    if path:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _sibling(path, suffix):
    p = Path(path)
    return p.with_name(p.stem + suffix)


# ---------------------------------------------------------------- commands


def cmd_estimate(args):
    y = read_counts(args.counts)
    n = y.size
    g = make_algorithm(args.algorithm, dict(args.param or []), _context(args, n))
    loss = args.loss
    spec = LossSpec(loss, args.pad_c)
    if args.method == "cb":
        est = cb_estimate(y, g, spec, args.p, args.B, args.seed)
        p, B = args.p, args.B
    elif args.method == "ue":
        est = ue_estimate(y, g, spec)
        p, B = None, None
    else:
        est = ue_sampled(y, g, spec, min(args.m, n), args.seed)
        p, B = None, None
    value, se = est.value / n, est.std_error / n
    print(f"value={value!r} std_error={se!r} n_padded_summands={est.n_padded_summands}")
    if args.out:
        write_csv(args.out, ESTIMATE_HEADER,
                  [[args.method, loss, p, B, args.seed, n, value, se, est.n_padded_summands]])
    return 0


def cmd_simulate(args):
    cfg = cfgmod.load(args.config)
    for key in ("seed", "B"):
        v = getattr(args, key)
        if v is not None:
            cfg[key] = v
    if args.repetitions is not None:
        cfg["repetitions"] = args.repetitions
    rows, meta = run_simulation(cfg)
    out = args.out or cfg.get("out")
    _emit(out, csv_text(SIM_HEADER, rows))
    if out:
        write_csv(_sibling(out, "_summary.csv"), SUMMARY_HEADER, summarize(rows))
    print(f"p={meta['p']} n={meta['n']} rows={len(rows)}", file=sys.stderr)
    return 0


def _factory(name, fixed, ctx):
    def build(params):
        prm = dict(fixed)
        prm.update(params)
        return make_algorithm(name, prm, ctx)
    return build


def cmd_tune(args):
    if args.counts:
        y = read_counts(args.counts)
    else:
        y = read_pgm(args.image)
        if args.shape is None:
            args.shape = y.shape
        y = y.ravel()
    ctx = _context(args, y.size)
    param = args.param_name or TUNING_PARAM.get(args.algorithm)
    if param is None:
        raise UsageError(f"algorithm {args.algorithm!r} has no default tuning parameter; "
                         "pass --param-name")
    grid = [{param: v} for v in args.grid]
    mu = None
    if args.mu:
        mu = read_table(args.mu, "mean").ravel()
        if mu.size != y.size:
            raise UsageError(f"--mu has {mu.size} values but there are {y.size} counts")
    header, rows, argmins, _ = run_sweep(
        y, _factory(args.algorithm, dict(args.param or []), ctx), grid, _losses(args),
        args.p, args.B, args.seed, mu=mu, truth_R=args.truth_R if mu is not None else 0,
        truth_seed=args.seed, pad_c=args.pad_c)
    _emit(args.out, csv_text(header, rows))
    for loss, k in argmins.items():
        print(f"argmin {loss}: {param}={grid[k][param]!r}", file=sys.stderr)
    return 0


def cmd_denoise(args):
    img = read_pgm(args.image)
    shape = img.shape
    y = img.ravel()
    losses = _losses(args)
    if args.tune:
        grid = [{"tau": t} for t in args.grid]
        header, rows, argmins, _ = run_sweep(
            y, lambda prm: make_algorithm("tv", {"tau": prm["tau"], "rho": args.rho},
                                          {"shape": shape}),
            grid, losses, args.p, args.B, args.seed, pad_c=args.pad_c)
        tau = grid[argmins[losses[0]]]["tau"]
        if args.out:
            write_csv(_sibling(args.out, "_sweep.csv"), header, rows)
        else:
            sys.stdout.write(csv_text(header, rows))
        print(f"selected tau={tau!r} by {losses[0]}", file=sys.stderr)
    else:
        if args.tau is None:
            raise UsageError("give --tau or --tune")
        tau = args.tau
    fit = make_algorithm("tv", {"tau": tau, "rho": args.rho}, {"shape": shape}).fit(y)
    fit = fit.reshape(shape)
    if args.out:
        write_pgm(args.out, fit)
        rr, cc = np.indices(shape)
        write_csv(_sibling(args.out, "_values.csv"), ["row", "col", "value"],
                  zip(rr.ravel().tolist(), cc.ravel().tolist(), fit.ravel().tolist()))
    return 0


def density_grid(args, dim):
    if args.grid2 is not None:
        if dim != 2:
            raise UsageError("--grid2 (anisotropic penalty) needs two-dimensional samples")
        return [{"lam_x": a, "lam_y": b} for a in args.grid for b in args.grid2]
    return [{"lam": v} for v in args.grid]


def _pspline_factory(edges, knots):
    def build(prm):
        lam = prm["lam"] if "lam" in prm else (prm["lam_x"], prm["lam_y"])
        return make_algorithm("pspline", {"lam": lam, "knots": knots}, {"edges": edges})
    return build


def cmd_density(args):
    from .algorithms.pspline import bin_samples
    x = read_samples(args.samples)
    dim = 1 if x.ndim == 1 else x.shape[1]
    counts, edges = bin_samples(x, args.bins)
    if args.knots > args.bins:
        raise UsageError("--knots must not exceed --bins")
    grid = density_grid(args, dim)
    losses = _losses(args)
    factory = _pspline_factory(edges, args.knots)
    header, rows, argmins, _ = run_sweep(counts, factory, grid, losses, args.p, args.B,
                                         args.seed, pad_c=args.pad_c)
    best = grid[argmins[losses[0]]]
    fitted = factory(best).fit(counts)
    density = fitted / fitted.sum()
    centers = [0.5 * (e[1:] + e[:-1]) for e in edges]
    if dim == 1:
        dhead = ["bin", "x", "count", "mean", "density"]
        drows = [[i, centers[0][i], counts[i], fitted[i], density[i]] for i in range(counts.size)]
    else:
        nx, ny = len(centers[0]), len(centers[1])
        dhead = ["bin_x", "bin_y", "x", "y", "count", "mean", "density"]
        drows = [[i, j, centers[0][i], centers[1][j], counts[i * ny + j], fitted[i * ny + j],
                  density[i * ny + j]] for i in range(nx) for j in range(ny)]
    _emit(args.out, csv_text(dhead, drows))
    if args.out:
        write_csv(_sibling(args.out, "_sweep.csv"), header, rows)
    print(f"selected {best} by {losses[0]}", file=sys.stderr)
    return 0


def cmd_verify(args):
    report = run_suite(args.suite)
    text = json.dumps(report, indent=2, sort_keys=True, default=_jsonable) + "\n"
    if args.out:
        write_json(args.out, json.loads(text))
    sys.stdout.write(text)
    return 0 if report["passed"] else 1


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(type(o).__name__)


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="poisson-cb", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="estimate the test error of one fit")
    _common(p)
    p.add_argument("--counts", required=True, help="newline-delimited nonnegative integers")
    p.add_argument("--algorithm", required=True, choices=sorted(ALGORITHMS))
    p.add_argument("--param", type=_param, action="append", help="algorithm parameter key=value")
    p.add_argument("--design", help="design matrix file (one row per count)")
    p.add_argument("--shape", type=_shape, help="image shape HxW for tv")
    p.add_argument("--method", choices=["cb", "ue", "ue_ss"], default="cb")
    p.add_argument("--m", type=_pos_int, default=100, help="summands kept by ue_ss")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("simulate", help="run a JSON-configured simulation")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--seed", type=_nonneg_int)
    p.add_argument("--B", type=_pos_int)
    p.add_argument("--repetitions", type=_nonneg_int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("tune", help="CB error curve over a tuning grid")
    _common(p, loss_multi=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--counts")
    src.add_argument("--image", help="ASCII PGM image (pixels are counts)")
    p.add_argument("--algorithm", required=True, choices=sorted(ALGORITHMS))
    p.add_argument("--grid", type=_grid, required=True,
                   help="values 'a,b,c', 'log:lo:hi:num' or 'lin:lo:hi:num'")
    p.add_argument("--param-name", help="parameter the grid varies")
    p.add_argument("--param", type=_param, action="append", help="fixed parameter key=value")
    p.add_argument("--design")
    p.add_argument("--shape", type=_shape)
    p.add_argument("--mu", help="true means (adds Monte Carlo truth columns)")
    p.add_argument("--truth-R", type=_pos_int, default=200)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("denoise", help="TV-denoise a count image")
    _common(p, loss_multi=True, B_default=50)
    p.add_argument("--image", required=True)
    p.add_argument("--tau", type=float)
    p.add_argument("--tune", action="store_true", help="select tau by CB over --grid")
    p.add_argument("--grid", type=_grid, default=parse_grid("log:-2:1:13"))
    p.add_argument("--rho", type=_pos_float, default=1e-5)
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("density", help="P-spline density estimate with CB-tuned penalty")
    _common(p, loss_multi=True)
    p.add_argument("--samples", required=True, help="one or two reals per line")
    p.add_argument("--bins", type=_pos_int, default=200)
    p.add_argument("--knots", type=_pos_int, default=30)
    p.add_argument("--grid", type=_grid, default=parse_grid("log:-2:4:13"),
                   help="penalty grid (first axis when --grid2 is given)")
    p.add_argument("--grid2", type=_grid, help="second-axis penalty grid (anisotropic)")
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("verify", help="run a self-check suite")
    p.add_argument("suite", choices=sorted(SUITES))
    p.add_argument("--out", help="write the JSON report here too")
    p.set_defaults(func=cmd_verify)
    return parser


def _config_defaults(parser, argv):
    """Apply ``--config`` keys (flag names with dashes or underscores) as defaults."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    choices = parser._subparsers._group_actions[0].choices
    if known.command not in choices or known.command == "simulate" or not known.config:
        return
    try:
        with open(known.config, encoding="utf-8") as fh:
            conf = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {known.config}: {exc}") from None
    if not isinstance(conf, dict):
        raise UsageError("config: must be a JSON object")
    sub = choices[known.command]
    known = {a.dest for a in sub._actions}
    bad = [k for k in conf if k.replace("-", "_") not in known]
    if bad:
        raise UsageError(f"config: unknown keys {', '.join(sorted(bad))}")
    conf = {k.replace("-", "_"): v for k, v in conf.items()}
    for action in sub._actions:
        if action.dest in conf:
            action.required = False
    sub.set_defaults(**conf)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        _config_defaults(parser, argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except (ParseError, cfgmod.ConfigError, UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
