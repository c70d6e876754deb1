#!/usr/bin/env python3
"""Benchmark the split-step inner loop: compiled extension vs NumPy fallback.

Runs identical step sequences on desk-scale-like meshes with both backends,
reports steps/second and the relative deviation between the final fields
(the backends implement the same arithmetic; differences are roundoff from
the different tridiagonal factorizations).

Usage: python benchmarks/bench_stepper.py [--steps N] [--sizes n1,n2,...]
"""

import argparse
import time

import numpy as np

from radialsp import evolution as ev
from radialsp import fem, potential


def bench(n: int, r_max: float, dt: float, steps: int):
    V = potential.smoothed_potential()
    ops = fem.assemble(fem.build_sinh_mesh(n, r_max), V)
    r = ops.mesh.nodes[:-1]
    phi0 = (np.exp(-r) * (1.0 + 0.1j * np.exp(-((r - 10.0) ** 2)))
            ).astype(complex)

    results = {}
    for backend in ev.available_backends():
        evolver = ev.StrangEvolver(ops, dt, backend=backend)
        evolver.step(phi0, 3)                       # warm up
        t0 = time.perf_counter()
        out = evolver.step(phi0, steps)
        elapsed = time.perf_counter() - t0
        results[backend] = (steps / elapsed, out)

    rates = {b: r for b, (r, _) in results.items()}
    line = f"n={n:6d}: " + "  ".join(
        f"{b}: {rate:8.1f} steps/s" for b, rate in rates.items())
    if len(results) == 2:
        a = results["python"][1]
        b = results["cython"][1]
        dev = np.max(np.abs(a - b)) / np.max(np.abs(a))
        speedup = rates["cython"] / rates["python"]
        line += f"  speedup: {speedup:4.2f}x  max rel dev: {dev:.2e}"
    print(line)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=400)
    ap.add_argument("--sizes", default="2000,8000,32000")
    ap.add_argument("--rmax", type=float, default=400.0)
    ap.add_argument("--dt", type=float, default=0.005)
    args = ap.parse_args()
    print(f"available backends: {ev.available_backends()}")
    for n in (int(s) for s in args.sizes.split(",")):
        bench(n, args.rmax, args.dt, args.steps)


if __name__ == "__main__":
    main()
