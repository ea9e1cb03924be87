#!/usr/bin/env python3
"""Benchmark the hot kernels on both backends (numba vs pure numpy).

Times the max-AR series generator and the anti-clustering window scan at a
few sizes, checks that the two implementations agree, and prints a table.

    python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import time

import numpy as np

from exceedance_lab import _backend, models, spatial_max_ar
from exceedance_lab._kernels import window_exceedance_flags


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_series(repeat):
    cases = [
        ("maxar n=1e5 S=1", spatial_max_ar(1.0, 0.5, seed=1), 10 ** 5),
        ("maxar n=1e6 S=1", spatial_max_ar(1.0, 0.5, seed=1), 10 ** 6),
        ("maxar n=1e5 S=4 lam=.3", spatial_max_ar(1.0, 0.5, 0.3, 4, seed=1), 10 ** 5),
    ]
    rows = []
    for label, spec, n in cases:
        results = {}
        timings = {}
        for backend in ("numba", "numpy"):
            _backend.set_backend(backend)
            models._simulate_raw(spec, min(n, 1000), 0)  # warm-up / JIT
            timings[backend] = _time(lambda: models._simulate_raw(spec, n, 0), repeat)
            results[backend] = models._simulate_raw(spec, n, 0)
        agree = np.allclose(results["numba"], results["numpy"], rtol=1e-9)
        rows.append((label, timings["numba"], timings["numpy"], agree))
    return rows


def bench_window_scan(repeat):
    rng = np.random.default_rng(0)
    norms = rng.pareto(1.0, size=10 ** 6) + 1.0
    thr = np.quantile(norms, 1 - 1e-4)
    r_n = 316
    anchors = np.nonzero(norms > thr)[0]
    anchors = anchors[(anchors >= r_n) & (anchors < len(norms) - r_n)].astype(np.int64)
    m_values = np.array([1, 2, 3, 5, 8, 12, 16, 20], dtype=np.int64)
    rows = []
    results = {}
    timings = {}
    for backend in ("numba", "numpy"):
        _backend.set_backend(backend)
        window_exceedance_flags(norms, anchors[:4], m_values, r_n, thr)
        timings[backend] = _time(
            lambda: window_exceedance_flags(norms, anchors, m_values, r_n, thr),
            repeat)
        results[backend] = window_exceedance_flags(norms, anchors, m_values, r_n, thr)
    agree = bool(np.array_equal(results["numba"], results["numpy"]))
    rows.append((f"window scan ({len(anchors)} anchors)",
                 timings["numba"], timings["numpy"], agree))
    return rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not _backend.have_numba():
        raise SystemExit("numba not importable; nothing to compare")

    rows = bench_series(args.repeat) + bench_window_scan(args.repeat)
    _backend.set_backend("auto")

    w = max(len(r[0]) for r in rows)
    print(f"{'case':<{w}}  {'numba':>10}  {'numpy':>10}  {'speedup':>8}  agree")
    for label, tb, tp, agree in rows:
        print(f"{label:<{w}}  {tb * 1e3:>8.1f}ms  {tp * 1e3:>8.1f}ms  "
              f"{tp / tb:>7.2f}x  {agree}")
    if not all(r[3] for r in rows):
        raise SystemExit("backend mismatch!")


if __name__ == "__main__":
    main()
