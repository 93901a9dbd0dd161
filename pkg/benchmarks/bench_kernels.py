"""Compare the compiled and pure-Python kernels on a 64x64 periodic problem.

Run with ``python benchmarks/bench_kernels.py [--size 64] [--steps 10000]``.
Prints per-call times for the direct and fast ``f``/``g`` evaluations and
whole-chain times for the two marginal samplers, plus the speedup.
"""

import argparse
import time

import numpy as np

from mtcdeblur import _pykernels, kernels
from mtcdeblur.samplers import PeriodicProblem, rng_streams
from mtcdeblur.spectral import f_threshold, g_threshold
from mtcdeblur.synthetic import standard_problem


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(problem, steps):
    c, t = problem.cache, problem.tables
    h = problem.half_rank
    params = problem.prior.params(h)
    hyper = problem.mode()
    lam = hyper.lam
    cf, cg = f_threshold(c, t, problem.eps), g_threshold(c, t, problem.eps)
    st = rng_streams(0)
    normals2 = st["proposal"].standard_normal((steps, 2))
    normals1 = normals2[:, 0].copy()
    logu = np.log(st["uniform"].random(steps))
    stdgam = st["gamma"].standard_gamma(h + 2.0, steps)
    widths = (0.01, 3e-5)
    w2 = 1.5e-4
    return {
        "f_direct": (lambda k: k.f_direct(c.Z, c.w, c.n_fin, c.w_flag, lam), 200),
        "g_direct": (lambda k: k.g_direct(c.Z, c.n_fin, c.a, lam), 200),
        "f_fast": (lambda k: k.f_fast(c.Z, c.w, c.n_fin, t.S, t.T, lam, cf, t.order), 200),
        "g_fast": (lambda k: k.g_fast(c.Z, c.n_fin, t.U, t.V, t.b, c.a, lam, cg, t.order), 200),
        f"mtc1_chain[{steps}]": (
            lambda k: k.mtc1_chain(c.Z, c.w, c.n_fin, c.w_flag, c.a, params, hyper.gamma,
                                   hyper.delta, *widths, normals2, logu), 1),
        f"mtc2_chain[{steps}]": (
            lambda k: k.mtc2_chain(c.Z, c.w, c.n_fin, c.a, t.S, t.T, t.U, t.V, t.b, cf, cg,
                                   t.order, params, hyper.gamma, hyper.delta, w2, stdgam,
                                   normals1, logu), 1),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=64)
    ap.add_argument("--steps", type=int, default=10000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    _, psf, y = standard_problem(args.size)
    problem = PeriodicProblem(psf, y)
    backends = {"python": _pykernels}
    if kernels.compiled_backend is not None:
        backends["cython"] = kernels.compiled_backend
    else:
        print("compiled extension not available; timing the Python fallback only")

    print(f"{args.size}x{args.size} periodic problem, n = {problem.n}")
    print(f"{'kernel':<22}" + "".join(f"{b:>14}" for b in backends) + f"{'speedup':>10}")
    for name, (call, inner) in cases(problem, args.steps).items():
        row = {}
        for bname, mod in backends.items():
            call(mod)  # warm-up
            row[bname] = best_of(lambda: [call(mod) for _ in range(inner)], args.repeat) / inner
        line = f"{name:<22}" + "".join(f"{row[b] * 1e6:>12.1f}us" for b in backends)
        if "cython" in row:
            line += f"{row['python'] / row['cython']:>9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
