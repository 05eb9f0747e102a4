#!/usr/bin/env python
"""Benchmark the numba kernels against the pure-numpy fallback.

Covers the three hot paths: batched NNLS (the SNMF activation step),
inhomogeneous Markov chain sampling, and the ARMA noise recursion.

Usage:
    python benchmarks/benchmark_kernels.py
    python benchmarks/benchmark_kernels.py --periods 2000 --steps 500000
    python benchmarks/benchmark_kernels.py --output results.json

Setting LOADFORGE_NUMBA=0 switches the library itself to the numpy path;
this script always times both variants when numba is installed.
"""

import argparse
import json
import time

import numpy as np

from loadforge import kernels


def _time(fn, *args, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def bench_nnls(periods, components):
    rng = np.random.default_rng(0)
    M = rng.normal(size=(200, components))
    B = np.abs(rng.normal(size=(200, periods)))
    args = (M, B, 3 * components)
    results = {}
    for name, impls in (("numpy", kernels.PY_IMPLS), ("numba", kernels.NB_IMPLS)):
        if not impls:
            continue
        impls["nnls_batch"](M, B[:, :2], 3 * components)  # warm the JIT
        results[name] = _time(impls["nnls_batch"], *args)
    return results


def bench_chain(steps):
    rng = np.random.default_rng(1)
    p_off = rng.uniform(0.05, 0.95, size=(24, 2))
    tau = rng.integers(0, 24, size=steps)
    u = rng.random(steps)
    results = {}
    for name, impls in (("numpy", kernels.PY_IMPLS), ("numba", kernels.NB_IMPLS)):
        if not impls:
            continue
        impls["binary_chain"](p_off, tau[:10], u[:10], 0)
        results[name] = _time(impls["binary_chain"], p_off, tau, u, 0)
    return results


def bench_arma(steps):
    rng = np.random.default_rng(2)
    phi = np.array([0.9])
    theta = np.array([0.3])
    w = rng.normal(size=steps)
    results = {}
    for name, impls in (("numpy", kernels.PY_IMPLS), ("numba", kernels.NB_IMPLS)):
        if not impls:
            continue
        impls["arma_recursion"](phi, theta, w[:10])
        results[name] = _time(impls["arma_recursion"], phi, theta, w)
    return results


def report(label, results):
    numpy_t = results.get("numpy")
    numba_t = results.get("numba")
    speedup = numpy_t / numba_t if numpy_t and numba_t else float("nan")
    print(f"{label:<28} numpy={numpy_t:9.4f}s  numba={numba_t if numba_t else float('nan'):9.4f}s"
          f"  speedup={speedup:6.1f}x")


def main():
    parser = argparse.ArgumentParser(description="Benchmark loadforge kernels")
    parser.add_argument("--periods", type=int, default=1000,
                        help="periods for the batched NNLS benchmark")
    parser.add_argument("--components", type=int, default=4)
    parser.add_argument("--steps", type=int, default=200_000,
                        help="steps for the chain/ARMA benchmarks")
    parser.add_argument("--output", default=None, help="write results to a JSON file")
    args = parser.parse_args()

    print(f"numba available: {kernels.NUMBA_AVAILABLE}; active backend: {kernels.BACKEND}")
    all_results = {
        "nnls_batch": bench_nnls(args.periods, args.components),
        "binary_chain": bench_chain(args.steps),
        "arma_recursion": bench_arma(args.steps),
    }
    print()
    report(f"nnls_batch {args.periods}x{args.components}", all_results["nnls_batch"])
    report(f"binary_chain {args.steps}", all_results["binary_chain"])
    report(f"arma_recursion {args.steps}", all_results["arma_recursion"])

    if args.output:
        with open(args.output, "w") as fh:
            json.dump(all_results, fh, indent=2)
        print(f"\nresults saved to {args.output}")


if __name__ == "__main__":
    main()
