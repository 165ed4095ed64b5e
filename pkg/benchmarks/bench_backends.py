#!/usr/bin/env python3
"""Time the numba kernels against their numpy fallbacks.

Each hot loop is run on identical random inputs with both builds; numba is
warmed up first so compilation is not counted.  The last section runs the
photon kappa(0) end to end in two subprocesses, one with
SLITLOOPS_DISABLE_NUMBA=1, and checks that both give the same answer.

    python benchmarks/bench_backends.py [--sizes 256 1024 4096] [--repeats 3]
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from slitloops import _kernels
from slitloops.kernels import _contour_rule


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def kernel_cases(n, rng):
    u1 = np.sort(rng.uniform(-15e-6, 15e-6, n))
    u2 = np.sort(rng.uniform(-15e-6, 15e-6, n))
    b = rng.normal(size=n) + 1j * rng.normal(size=n)
    gap = 100e-6
    k = 2 * np.pi / 810e-9
    tau, w = _contour_rule(k)
    coeffs = 4j * w * np.exp(-k * tau**2)
    r1 = np.array([-0.18, 0.0, 0.0])
    r3 = np.array([0.18, 1e-4, 0.0])
    grid = np.linspace(-2e-3, 2e-3, n)
    wts = np.full(n, grid[1] - grid[0])
    # contour sums cost 40x more per pair, so they get a smaller problem
    m = max(16, n // 4)
    return {
        "inverse_sqrt_sums": (
            lambda impl: impl(b, u1, u2, gap),
        ),
        "contour_kernel_sums": (
            lambda impl: impl(b[:m], u1[:m], u2[:m], gap, coeffs, tau**2),
        ),
        "plane_propagator_sum": (
            lambda impl: impl(r1, r3, 0.0, grid, wts, grid, wts, k),
        ),
    }


def end_to_end(disable_numba):
    env = dict(os.environ, SLITLOOPS_DISABLE_NUMBA="1" if disable_numba else "0")
    code = (
        "import time, json; t=time.perf_counter();"
        "from slitloops import preset, validate, epsilon_full, delta, BACKEND;"
        "vs=validate(preset('photon'));"
        "k=epsilon_full(vs, 0.0)/delta(vs);"
        "print(json.dumps({'backend': BACKEND, 'kappa0': k, 'seconds': time.perf_counter()-t}))"
    )
    out = subprocess.run([sys.executable, "-W", "ignore", "-c", code], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[256, 1024, 4096])
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--skip-end-to-end", action="store_true")
    args = ap.parse_args(argv)

    if _kernels.numba is None:
        sys.exit("numba is not importable; nothing to compare")

    rng = np.random.default_rng(12345)
    print(f"{'kernel':<22}{'n':>6}{'numpy [s]':>12}{'numba [s]':>12}{'speedup':>9}{'max rel diff':>14}")
    for n in args.sizes:
        for name, (call,) in kernel_cases(n, rng).items():
            fast = getattr(_kernels, f"{name}_numba")
            slow = getattr(_kernels, f"{name}_numpy")
            call(fast)  # compile
            t_np, ref = best_of(lambda: call(slow), args.repeats)
            t_nb, got = best_of(lambda: call(fast), args.repeats)
            ref, got = np.atleast_1d(ref), np.atleast_1d(got)
            diff = float(np.max(np.abs(got - ref)) / np.max(np.abs(ref)))
            print(f"{name:<22}{n:>6}{t_np:>12.4f}{t_nb:>12.4f}{t_np / t_nb:>9.1f}{diff:>14.2e}")

    if not args.skip_end_to_end:
        print()
        rows = [end_to_end(False), end_to_end(True)]
        for r in rows:
            print(f"photon kappa(0) [{r['backend']:>5}]  {r['kappa0']:+.12e}  {r['seconds']:.2f} s (incl. import)")
        rel = abs(rows[0]["kappa0"] - rows[1]["kappa0"]) / abs(rows[0]["kappa0"])
        print(f"backend agreement: {rel:.2e} relative")


if __name__ == "__main__":
    main()
