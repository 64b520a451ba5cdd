#!/usr/bin/env python3
"""Benchmark the estimator quadrature kernels: compiled vs pure Python.

The kernels run once per control tick, so a 250 s rig run at 10 ms touches
them 25k times; this script times both backends on representative window
sizes and a full scenario run under each backend.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from mfclab import _kernels_py

try:
    from mfclab import _kernels as compiled
except ImportError:
    compiled = None


def time_kernel(fn, args, repeat):
    best = float("inf")
    for _ in range(5):
        t0 = time.perf_counter_ns()
        for _ in range(repeat):
            fn(*args)
        best = min(best, (time.perf_counter_ns() - t0) / repeat)
    return best


def bench_kernels(repeat):
    rng = np.random.default_rng(0)
    print(f"{'window':>8} {'kernel':>12} {'python':>12} {'cython':>12} "
          f"{'speedup':>8}")
    for n in (11, 21, 101, 1001):
        y = rng.normal(size=n)
        u = rng.normal(size=n)
        e = rng.normal(size=n)
        ts, tau = 0.01, (n - 1) * 0.01
        for label, py_fn, cy_fn, args in (
            ("algebraic", _kernels_py.algebraic_f,
             compiled.algebraic_f if compiled else None,
             (y, u, ts, tau, 0.1)),
            ("closedloop", _kernels_py.closedloop_f,
             compiled.closedloop_f if compiled else None,
             (y, u, e, ts, tau, 0.1, 0.5)),
        ):
            t_py = time_kernel(py_fn, args, repeat)
            if cy_fn is None:
                print(f"{n:>8} {label:>12} {t_py:>10.0f}ns {'n/a':>12}")
                continue
            t_cy = time_kernel(cy_fn, args, repeat)
            print(f"{n:>8} {label:>12} {t_py:>10.0f}ns {t_cy:>10.0f}ns "
                  f"{t_py / t_cy:>7.1f}x")


def bench_scenario():
    import os
    import subprocess
    import sys

    code = ("import time, mfclab; t0=time.monotonic(); "
            "mfclab.run_scenario(mfclab.build_scenario('aero-2')); "
            "print(f'{time.monotonic()-t0:.2f}s')")
    for env_flag, label in (("0", "cython"), ("1", "python")):
        env = dict(os.environ, MFCLAB_PURE_PY=env_flag)
        out = subprocess.run([sys.executable, "-c", code], env=env,
                             capture_output=True, text=True)
        print(f"aero-2 full run ({label:>6}): {out.stdout.strip()}")


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=20000)
    args = parser.parse_args()
    if compiled is None:
        print("compiled extension not available; timing pure Python only")
    bench_kernels(args.repeat)
    print()
    bench_scenario()


if __name__ == "__main__":
    main()
