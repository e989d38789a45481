"""Compare the compiled and the numpy kernel backends.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5] [--steps 20000]

Two measurements are taken per backend: a tight loop over the fused
``barrier_step`` kernel on a small random problem, and a complete EZO solve
of the disk problem with a fixed iteration count. The solve benchmark swaps
the backend in a fresh interpreter so the import-time selection is honest.
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from safezo.kernels import backends

SOLVE_SNIPPET = """
import time
from safezo import disk_quadratic, solve, SolverConfig
from safezo.kernels import BACKEND
p = disk_quadratic()
t0 = time.perf_counter()
r = solve(p, SolverConfig(eta0=0.1, T={steps}, mode="EZO"))
print(BACKEND, time.perf_counter() - t0, r.N_T)
"""


def step_inputs(d=2, m=4, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-0.1, 0.1, d)
    nu = 1e-3
    cons = -rng.uniform(0.2, 1.0, m)
    center = np.concatenate([[rng.normal()], cons])
    probes = center + nu * rng.normal(size=(d, m + 1))
    lip = np.full(m, 4.0)
    return x, center, probes, cons, nu, 0.1, 2.0, 4.0, lip


def bench_step(mod, repeat, number):
    args = step_inputs()
    timer = timeit.Timer(lambda: mod.barrier_step(*args))
    return min(timer.repeat(repeat=repeat, number=number)) / number


def bench_solve(name, steps):
    env = dict(os.environ)
    env["SAFEZO_PURE_PYTHON"] = "1" if name == "python" else "0"
    out = subprocess.run([sys.executable, "-c", SOLVE_SNIPPET.format(steps=steps)],
                         env=env, capture_output=True, text=True, check=True)
    backend, secs, n_t = out.stdout.split()
    return backend, float(secs), int(n_t)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--number", type=int, default=20000)
    ap.add_argument("--steps", type=int, default=20000)
    args = ap.parse_args(argv)

    mods = backends()
    print(f"{'backend':<8} {'barrier_step [us]':>18} {'EZO solve [s]':>14} {'N_T':>8}")
    timings = {}
    for name, mod in sorted(mods.items()):
        per_call = bench_step(mod, args.repeat, args.number)
        backend, secs, n_t = bench_solve(name, args.steps)
        if backend != name:
            print(f"warning: requested {name} backend but got {backend}")
        timings[name] = (per_call, secs)
        print(f"{name:<8} {per_call * 1e6:18.2f} {secs:14.3f} {n_t:8d}")
    if len(timings) == 2:
        (kp, sp), (kc, sc) = timings["python"], timings["cython"]
        print(f"speed-up: kernel {kp / kc:.1f}x, full solve {sp / sc:.2f}x")


if __name__ == "__main__":
    main()
