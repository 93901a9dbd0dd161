"""Command-line interface: ``mtcdeblur {synth,deblur-reg,sample,mean,diagnose}``.

Images are written as lossless raw float grids (see :mod:`mtcdeblur.imageio`)
with 8-bit PGM previews.  Every command writes ``manifest.json`` into its
output directory recording the arguments needed to re-run it.

Exit codes: 0 success, 2 usage or input error, 3 numerical failure.
"""

import argparse
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .diagnostics import bin_centers, diagnose_chain, histogram, iact
from .exceptions import (
    ConvergenceError,
    DegeneratePsfError,
    DegenerateSeriesError,
    DimensionError,
    DomainError,
    FlaggedModeError,
    GridTooSmallError,
    NoCornerError,
    ParameterError,
    SingularSystemError,
    UnsupportedPriorError,
)
from .imageio import read_image, write_pgm, write_raw
from .kernels import BACKEND
from .model import PeriodicModel, Psf, ZeroPaddedModel, extract_psf
from .regularize import build_lcurve, default_lambda_grid, solve_gendeconv
from .samplers import BURN_IN, KINDS, DEFAULT_W2, DEFAULT_WIDTHS, Chain, GammaPrior, Hyper, PeriodicProblem
from .solvers import IterativeSolverConfig
from .synthetic import TRUTHS, make_truth, parse_psf_spec, simulate

EXIT_USAGE = 2
EXIT_NUMERICAL = 3

NUMERICAL_ERRORS = (
    ConvergenceError,
    SingularSystemError,
    FlaggedModeError,
    NoCornerError,
    GridTooSmallError,
    DegenerateSeriesError,
    FloatingPointError,
    ArithmeticError,
)
USAGE_ERRORS = (
    ParameterError,
    DomainError,
    DimensionError,
    DegeneratePsfError,
    UnsupportedPriorError,
    OSError,
    ValueError,
)


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# helpers


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _manifest(args, argv, **extra):
    d = {k: v for k, v in vars(args).items() if k != "func"}
    d.update(argv=list(argv), version=__version__, backend=BACKEND)
    d.update(extra)
    return d


def _outdir(path):
    os.makedirs(path, exist_ok=True)
    return path


def _write_image(stem, image):
    write_raw(stem + ".raw", image)
    write_pgm(stem + ".pgm", image, scale="minmax")


def _solver(args):
    return IterativeSolverConfig(restart=args.restart, rel_tol=args.rel_tol,
                                 max_iters=args.max_iters, method=args.krylov)


def _prior(args):
    return GammaPrior(args.alpha_gamma, args.beta_gamma, args.alpha_delta, args.beta_delta)


def _load_psf(args, data):
    given = [v is not None for v in (args.psf, args.psf_file, args.psf_region)]
    if sum(given) != 1:
        raise UsageError("give exactly one of --psf, --psf-file, --psf-region")
    anchor = None
    if args.psf_anchor is not None:
        try:
            anchor = tuple(int(v) for v in args.psf_anchor.split(","))
        except ValueError as exc:
            raise UsageError(f"--psf-anchor wants row,col: {exc}") from exc
        if len(anchor) != 2:
            raise UsageError("--psf-anchor wants row,col")
    if args.psf is not None:
        psf = parse_psf_spec(args.psf)
        return psf if anchor is None else Psf(psf.kernel, anchor)
    if args.psf_file is not None:
        return Psf.from_array(read_image(args.psf_file), anchor)
    try:
        region = [int(v) for v in args.psf_region.split(",")]
    except ValueError as exc:
        raise UsageError(f"--psf-region wants row,col,height,width: {exc}") from exc
    if len(region) != 4:
        raise UsageError("--psf-region wants row,col,height,width")
    return extract_psf(data, region, anchor)


def _model(args, psf, y):
    if args.boundary == "periodic":
        model = PeriodicModel(psf, y.shape)
    else:
        model = ZeroPaddedModel(psf, y.shape, args.border)
    return model, model.laplacian()


def _psf_record(psf):
    return {"shape": list(psf.shape), "anchor": list(psf.anchor)}


# --------------------------------------------------------------------------
# commands


def cmd_synth(args, argv):
    out = _outdir(args.out)
    psf = parse_psf_spec(args.psf)
    rng = np.random.default_rng(args.seed)
    b = args.border if args.boundary == "dirichlet" else 0
    truth = make_truth((args.size + 2 * b, args.size + 2 * b), args.truth)
    gamma = math.inf if args.no_noise else args.gamma
    y = simulate(truth, psf, gamma, rng, args.boundary, b)
    _write_image(os.path.join(out, "y"), y)
    _write_image(os.path.join(out, "x_true"), truth)
    write_raw(os.path.join(out, "psf.raw"), psf.kernel)
    _write_json(os.path.join(out, "manifest.json"), _manifest(args, argv, psf_info=_psf_record(psf)))
    print(f"wrote {args.size}x{args.size} data to {out}")
    return 0


def cmd_deblur_reg(args, argv):
    out = _outdir(args.out)
    y = read_image(args.data)
    psf = _load_psf(args, y)
    model, lap = _model(args, psf, y)
    solver = _solver(args)
    t0 = time.perf_counter()
    grid = default_lambda_grid(model, lap, args.grid_size)
    curve = build_lcurve(model, lap, y, grid, solver)
    t_curve = time.perf_counter() - t0
    lam = curve.corner_lambda
    t1 = time.perf_counter()
    x = solve_gendeconv(model, lap, lam, y, solver)
    t_solve = time.perf_counter() - t1
    curve.write_csv(os.path.join(out, "lcurve.csv"))
    _write_image(os.path.join(out, "x_reg"), x)
    report = {"lambda": lam, "corner_index": curve.corner_index, "grid_size": len(grid),
              "lcurve_seconds": t_curve, "solve_seconds": t_solve,
              "time_to_lambda": t_curve, "total_seconds": t_curve + t_solve}
    if args.truth is not None:
        truth = read_image(args.truth)
        if truth.shape != x.shape:
            raise UsageError(f"truth shape {truth.shape} differs from reconstruction {x.shape}")
        report["rmse"] = float(np.sqrt(np.mean((x - truth) ** 2)))
        if truth.shape == y.shape:
            report["rmse_data"] = float(np.sqrt(np.mean((y - truth) ** 2)))
        else:
            b = args.border
            inner = truth[b:b + y.shape[0], b:b + y.shape[1]]
            report["rmse_data"] = float(np.sqrt(np.mean((y - inner) ** 2)))
    _write_json(os.path.join(out, "report.json"), report)
    _write_json(os.path.join(out, "manifest.json"), _manifest(args, argv, psf_info=_psf_record(psf)))
    print(f"lambda = {lam!r} (corner {curve.corner_index} of {len(grid)})")
    print(f"time: L-curve {t_curve:.4f} s, solve {t_solve:.4f} s")
    if "rmse" in report:
        print(f"RMSE: data {report['rmse_data']:.4f}, reconstruction {report['rmse']:.4f}")
    return 0


def _sample_problem(args, psf, y, prior):
    if args.algorithm == "mtc-nonperiodic":
        from .nonperiodic import NonPeriodicProblem

        if args.boundary != "dirichlet":
            raise UsageError("mtc-nonperiodic needs --boundary dirichlet")
        return NonPeriodicProblem(psf, y, args.border, prior, _solver(args), order=args.order,
                                  probes=args.probes)
    if args.boundary != "periodic":
        raise UsageError(f"{args.algorithm} needs --boundary periodic")
    return PeriodicProblem(psf, y, prior, order=args.order, eps=args.eps)


def cmd_sample(args, argv):
    from .samplers import tune_w2, tune_widths

    out = _outdir(args.out)
    y = read_image(args.data)
    psf = _load_psf(args, y)
    prior = _prior(args)
    kind = args.algorithm
    t_setup = time.perf_counter()
    problem = _sample_problem(args, psf, y, prior)
    widths = tuple(args.widths) if args.widths else None
    w2 = args.w2
    tuning = {}
    options = {}
    init = None
    if kind == "mtc-nonperiodic":
        options.update(w3=args.w3, lambda_init=args.lambda_init, max_centers=args.max_centers)
    else:
        init = problem.mode()
        if args.tune and kind == "mtc2" and w2 is None:
            w2, init = tune_w2(problem, init, seed=args.seed)
            tuning["w2"] = w2
        elif args.tune and kind in ("mtc1", "oneblock") and widths is None:
            widths, w2_pilot = tune_widths(problem, init, seed=args.seed)
            tuning.update(widths=list(widths), pilot_w2=w2_pilot)
    setup = time.perf_counter() - t_setup
    chain = _run(kind, problem, args, init, widths, w2, options)
    chain.write_csv(os.path.join(out, "chain.csv"))
    burn = BURN_IN[kind] if args.burn_in is None else args.burn_in
    meta = {k: v for k, v in chain.meta.items() if k not in ("expansions", "log_ratios")}
    info = {"kind": kind, "steps": chain.steps, "thinning": chain.thinning,
            "acceptance_rate": chain.acceptance_rate, "wall_time": chain.wall_time,
            "setup_time": setup, "burn_in": burn, "seed": args.seed, "tuning": tuning,
            "meta": meta}
    if kind == "mtc-nonperiodic":
        chain.meta["expansions"].save(os.path.join(out, "expansions.json"))
    n_images = 0
    if kind in ("mtc1", "mtc2", "mtc-nonperiodic") and args.max_images != 0:
        n_images = _write_draws(problem, chain, burn, args, out, info)
    _write_json(os.path.join(out, "chain.json"), info)
    _write_json(os.path.join(out, "manifest.json"), _manifest(args, argv, psf_info=_psf_record(psf)))
    print(f"{kind}: {chain.steps} steps, acceptance {chain.acceptance_rate:.4f}, "
          f"chain {chain.wall_time:.4f} s, setup {setup:.4f} s, images {n_images}")
    return 0


def _run(kind, problem, args, init, widths, w2, options):
    from .samplers import run_chain

    return run_chain(kind, problem, args.steps, seed=args.seed, init=init,
                     thinning=args.thinning, widths=widths, w2=w2, **options)


def _write_draws(problem, chain, burn, args, out, info):
    """One conditional image per effectively independent ``theta`` after burn-in."""
    lam = chain.lam[1 + burn:]
    if lam.size < 100:
        info["images"] = {"count": 0, "reason": "chain too short for an IACT estimate"}
        return 0
    try:
        tau = iact(lam).tau
    except DegenerateSeriesError:
        tau = float(lam.size)
    stride = max(1, int(math.ceil(tau)))
    idx = np.arange(1 + burn, len(chain), stride)
    if args.max_images is not None and args.max_images > 0:
        idx = idx[: args.max_images]
    img_dir = _outdir(os.path.join(out, "images"))
    rng = np.random.default_rng([args.seed, 2])
    t0 = time.perf_counter()
    for j, i in enumerate(idx):
        x = problem.draw_x(Hyper(chain.gamma[i], chain.delta[i]), rng)
        write_raw(os.path.join(img_dir, f"draw_{j:05d}.raw"), x)
    info["images"] = {"count": int(idx.size), "stride": stride, "iact_lambda": tau,
                      "chain_index": idx.tolist(), "seconds": time.perf_counter() - t0}
    return int(idx.size)


def _read_histogram_csv(path):
    import csv

    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise UsageError(f"{path}: empty histogram")
    centers = np.array([float(r["center"]) for r in rows])
    weights = np.array([float(r["weight"]) for r in rows])
    return centers, weights


def cmd_mean(args, argv):
    from .nonperiodic import posterior_mean

    if (args.chain is None) == (args.histogram is None):
        raise UsageError("give exactly one of --chain, --histogram")
    out = _outdir(args.out)
    y = read_image(args.data)
    psf = _load_psf(args, y)
    model, lap = _model(args, psf, y)
    if args.chain is not None:
        chain = Chain.read_csv(args.chain)
        burn = 0 if args.burn_in is None else args.burn_in
        edges, weights = histogram(chain.lam[1 + burn:], args.bins)
        centers = bin_centers(edges)
    else:
        centers, weights = _read_histogram_csv(args.histogram)
    keep = weights > 0
    centers, weights = centers[keep], weights[keep] / weights[keep].sum()
    t0 = time.perf_counter()
    x = posterior_mean(model, lap, y, (centers, weights), _solver(args))
    elapsed = time.perf_counter() - t0
    _write_image(os.path.join(out, "mean"), x)
    _write_json(os.path.join(out, "report.json"), {"bins": int(centers.size), "seconds": elapsed})
    _write_json(os.path.join(out, "manifest.json"), _manifest(args, argv, psf_info=_psf_record(psf)))
    print(f"posterior mean from {centers.size} bins in {elapsed:.4f} s")
    return 0


def cmd_diagnose(args, argv):
    reports = {}
    for path in args.chains:
        stem = os.path.splitext(path)[0]
        info = {}
        if os.path.exists(stem + ".json"):
            with open(stem + ".json") as fh:
                info = json.load(fh)
        kind = args.kind or info.get("kind", "unknown")
        chain = Chain.read_csv(path, kind=kind)
        chain.meta["steps"] = info.get("steps", chain.steps)
        chain.wall_time = args.wall_time if args.wall_time is not None else info.get("wall_time", 0.0)
        burn = args.burn_in if args.burn_in is not None else info.get("burn_in", BURN_IN.get(kind, 0))
        per = {}
        for stat in args.statistic:
            rep = diagnose_chain(chain, stat, burn, args.bins)
            per[stat] = rep.to_dict()
            if args.out:
                _outdir(args.out)
                base = os.path.basename(stem)
                rep.write_histogram_csv(os.path.join(args.out, f"{base}_{stat}_hist.csv"))
            print(f"{path} [{kind}] {stat}: tau={rep.tau:.4g} +- {rep.tau_std_error:.2g} "
                  f"cces={rep.cces:.4g} s accept={rep.acceptance_rate:.4f} "
                  f"mean={rep.mean:.6g} sd={rep.std:.4g}")
        reports[path] = per
    if args.out:
        _write_json(os.path.join(args.out, "diagnostics.json"), reports)
        _write_json(os.path.join(args.out, "manifest.json"), _manifest(args, argv))
    return 0


# --------------------------------------------------------------------------
# parser


def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s}")
    return v


def _positive_float(s):
    v = float(s)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {s}")
    return v


def _add_psf(p):
    p.add_argument("--psf", help='synthetic PSF spec: "gaussian:SIGMA[:RADIUS]", "box:N" or "delta"')
    p.add_argument("--psf-file", help="PSF image (raw or PGM), normalized on load")
    p.add_argument("--psf-region", help="row,col,height,width of a point source in the data")
    p.add_argument("--psf-anchor", help="row,col of the kernel origin (default: brightest pixel)")


def _add_model(p):
    p.add_argument("--data", required=True, help="observed image (raw or PGM)")
    _add_psf(p)
    p.add_argument("--boundary", choices=("periodic", "dirichlet"), default="periodic")
    p.add_argument("--border", type=int, default=16, help="nuisance border width (dirichlet)")


def _add_solver(p):
    p.add_argument("--restart", type=_positive_int, default=25)
    p.add_argument("--rel-tol", type=_positive_float, default=1e-3)
    p.add_argument("--max-iters", type=_positive_int, default=2500)
    p.add_argument("--krylov", choices=("gmres", "cg"), default="gmres")


def build_parser():
    parser = argparse.ArgumentParser(prog="mtcdeblur", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="simulate blurred noisy data from a test image")
    p.add_argument("--size", type=_positive_int, default=64)
    p.add_argument("--truth", choices=TRUTHS, default="planet")
    p.add_argument("--psf", default="gaussian:2")
    p.add_argument("--gamma", type=_positive_float, default=0.25, help="noise precision")
    p.add_argument("--no-noise", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--boundary", choices=("periodic", "dirichlet"), default="periodic")
    p.add_argument("--border", type=int, default=16)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("deblur-reg", help="regularized deblurring with an L-curve choice of lambda")
    _add_model(p)
    _add_solver(p)
    p.add_argument("--grid-size", type=_positive_int, default=200)
    p.add_argument("--truth", help="true image for an RMSE report")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_deblur_reg)

    p = sub.add_parser("sample", help="sample the hyperparameter posterior")
    _add_model(p)
    _add_solver(p)
    p.add_argument("--algorithm", choices=KINDS, default="mtc2")
    p.add_argument("--steps", type=_positive_int, default=10000)
    p.add_argument("--burn-in", type=int, default=None)
    p.add_argument("--thinning", type=_positive_int, default=1)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--alpha-gamma", type=_positive_float, default=1.0)
    p.add_argument("--beta-gamma", type=_positive_float, default=1e-4)
    p.add_argument("--alpha-delta", type=_positive_float, default=1.0)
    p.add_argument("--beta-delta", type=_positive_float, default=1e-4)
    p.add_argument("--widths", type=_positive_float, nargs=2, metavar=("W_GAMMA", "W_DELTA"),
                   help=f"random-walk widths (default {DEFAULT_WIDTHS[0]:g} {DEFAULT_WIDTHS[1]:g})")
    p.add_argument("--w2", type=_positive_float, help=f"angular width for mtc2 (default {DEFAULT_W2:g})")
    p.add_argument("--w3", type=_positive_float, help="lambda width for mtc-nonperiodic (default 1e-4)")
    p.add_argument("--tune", action="store_true", help="tune proposal widths before sampling")
    p.add_argument("--eps", type=_positive_float, default=1e-6)
    p.add_argument("--order", type=_positive_int, default=None,
                   help="expansion order (default 8 periodic, 4 non-periodic)")
    p.add_argument("--probes", type=_positive_int, default=4)
    p.add_argument("--lambda-init", type=_positive_float, default=5e-3)
    p.add_argument("--max-centers", type=_positive_int, default=4)
    p.add_argument("--max-images", type=int, default=None,
                   help="cap on conditional image draws (0 for none)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("mean", help="posterior mean image from a lambda histogram")
    _add_model(p)
    _add_solver(p)
    p.add_argument("--chain", help="chain CSV to histogram")
    p.add_argument("--histogram", help="histogram CSV with center and weight columns")
    p.add_argument("--bins", type=_positive_int, default=50)
    p.add_argument("--burn-in", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mean)

    p = sub.add_parser("diagnose", help="IACT, CCES and histograms for chain CSVs")
    p.add_argument("chains", nargs="+")
    p.add_argument("--statistic", nargs="+", choices=("gamma", "delta", "lambda"),
                   default=["gamma", "delta", "lambda"])
    p.add_argument("--kind", choices=KINDS)
    p.add_argument("--burn-in", type=int, default=None)
    p.add_argument("--bins", type=_positive_int, default=50)
    p.add_argument("--wall-time", type=_positive_float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_diagnose)
    return parser


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "order", 0) is None:
        args.order = 4 if args.algorithm == "mtc-nonperiodic" else 8
    try:
        return args.func(args, argv)
    except UsageError as exc:
        print(f"mtcdeblur: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NUMERICAL_ERRORS as exc:
        print(f"mtcdeblur: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except USAGE_ERRORS as exc:
        print(f"mtcdeblur: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
