#!/usr/bin/env python3
"""Benchmark the compiled kernels against the scipy-backed fallback.

Times the five backend kernels at several sizes, then two end-to-end
workloads that hammer them (a Gibbs chain and one full EM fit).  Run:

    python benchmarks/bench_backends.py [--quick]
"""

import argparse
import os
import time

import numpy as np

from pncem.backends import _ref

try:
    from pncem.backends import _core
except ImportError:
    _core = None


def timeit(fn, *args, repeat=200):
    fn(*args)  # warm up
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat


def bench_kernels(sizes, repeat):
    rng = np.random.default_rng(0)
    rows = []
    for n in sizes:
        diag = rng.uniform(2.0, 3.0, n)
        off = rng.uniform(-0.9, 0.9, n - 1)
        rhs = rng.normal(size=n)
        eta = rng.normal(size=n)
        d_ref, l_ref, _ = _ref.ldl_factor(diag, off)
        cases = {
            "ldl_factor": (lambda impl: impl.ldl_factor(diag, off)),
            "ldl_solve": (lambda impl: impl.ldl_solve(d_ref, l_ref, rhs)),
            "selected_inverse": (lambda impl: impl.selected_inverse(d_ref, l_ref)),
            "sqrt_solve": (lambda impl: impl.sqrt_solve(d_ref, l_ref, rhs)),
            "ar1_scan": (lambda impl: impl.ar1_scan(0.9, 0.3, eta)),
        }
        for name, call in cases.items():
            t_ref = timeit(call, _ref, repeat=repeat)
            t_core = timeit(call, _core, repeat=repeat) if _core else float("nan")
            rows.append((name, n, t_core * 1e6, t_ref * 1e6,
                         t_ref / t_core if _core else float("nan")))
    return rows


def bench_end_to_end(quick):
    """Chain and fit timings under each backend, via subprocesses so the
    import-time backend selection applies."""
    import subprocess
    import sys

    n = 500 if quick else 2000
    draws = 2000 if quick else 10000
    code = (
        "import time, numpy as np, pncem\n"
        "from pncem import gibbs, em\n"
        "from pncem.model import Parametrization\n"
        f"p = pncem.ModelParams(1.0, 0.1, 0.1, 0.5); n = {n}\n"
        "ts = pncem.simulate(p, n, seed=1)\n"
        "t0 = time.perf_counter()\n"
        f"gibbs.run_chain(ts, p, Parametrization(0.0, np.zeros(n)), {draws}, seed=2)\n"
        "t1 = time.perf_counter()\n"
        "em.algorithm3(ts)\n"
        "t2 = time.perf_counter()\n"
        "print(t1 - t0, t2 - t1)\n"
    )
    rows = []
    for backend in ("core", "ref"):
        if backend == "core" and _core is None:
            rows.append((backend, float("nan"), float("nan")))
            continue
        env = dict(os.environ, PNCEM_BACKEND=backend)
        out = subprocess.run([sys.executable, "-c", code], env=env,
                             capture_output=True, text=True, check=True)
        chain_s, fit_s = (float(v) for v in out.stdout.split())
        rows.append((backend, chain_s, fit_s))
    return rows, n, draws


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true",
                        help="smaller sizes and fewer repeats")
    args = parser.parse_args()

    sizes = (1000, 10000) if args.quick else (1000, 10000, 100000)
    repeat = 20 if args.quick else 200

    if _core is None:
        print("compiled core NOT available; fallback timings only\n")
    print(f"{'kernel':18} {'n':>7} {'core us':>10} {'ref us':>10} {'ref/core':>9}")
    for name, n, t_core, t_ref, ratio in bench_kernels(sizes, repeat):
        print(f"{name:18} {n:>7} {t_core:>10.1f} {t_ref:>10.1f} {ratio:>9.1f}")

    rows, n, draws = bench_end_to_end(args.quick)
    print(f"\nend-to-end (n={n}): Gibbs chain of {draws} sweeps, full EM fit")
    print(f"{'backend':18} {'chain s':>10} {'fit s':>10}")
    for backend, chain_s, fit_s in rows:
        print(f"{backend:18} {chain_s:>10.2f} {fit_s:>10.2f}")


if __name__ == "__main__":
    main()
