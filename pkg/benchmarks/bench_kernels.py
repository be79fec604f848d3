#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallbacks.

Run:  python3 benchmarks/bench_kernels.py [--repeat N]

The numba path must be importable for the comparison; the same process times
both implementations on identical inputs and checks they agree bit-for-bit.
"""

import argparse
import time

import numpy as np

from invarion import _kernels as K


def timed(fn, args, repeat):
    fn(*args)  # warm-up (JIT compile on the numba side)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_stay_linear_box(rng):
    nw, tau, ne, d = 200_000, 6, 201, 1
    entries = rng.integers(0, 33, size=(nw, tau)).astype(np.int32)
    cvals = np.linspace(-1, 1, 33).reshape(-1, 1)
    a = np.array([[2.0]])
    b = np.array([[1.0]])
    x0 = np.linspace(-0.5, 0.5, ne).reshape(-1, 1)
    lo, hi = np.array([-0.495]), np.array([0.495])
    return "stay_linear_box", (entries, cvals, a, b, x0, lo, hi)


def bench_stay_circle_pair_band(rng):
    nw, tau, ne = 60_000, 6, 3000
    ent1 = rng.integers(0, 33, size=(nw, tau)).astype(np.int32)
    ent2 = rng.integers(0, 33, size=(nw, tau)).astype(np.int32)
    cv = np.linspace(-1, 1, 33)
    x1 = rng.uniform(0, 1, ne)
    x2 = (x1 + rng.uniform(-0.1, 0.1, ne)) % 1.0
    return "stay_circle_pair_band", (ent1, ent2, cv, cv, 2.0, 2.0, x1, x2, 0.096)


def bench_band_cover_update(rng):
    ncells, tau, p2, ne = 256, 6, 512, 8000
    t1w = rng.uniform(0, 1, size=(ncells, tau))
    t2 = rng.uniform(0, 1, size=(p2, ncells, tau))
    e1 = rng.integers(0, ncells, ne).astype(np.int32)
    e2 = rng.integers(0, ncells, ne).astype(np.int32)
    out = np.zeros((p2, K.n_packed_words(ne)), dtype=np.uint64)
    return "band_cover_update", (t1w, t2, e1, e2, 0.096, out)


def bench_dp_backward(rng):
    ncells, nctrl, nw, nx1, tau = 256, 33, 24, 64, 6
    succ = rng.integers(0, ncells, size=(ncells, nctrl)).astype(np.int32)
    slices = rng.random((nw, nx1, tau, ncells)) < 0.4
    return "dp_backward", (succ, slices)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    if K.BACKEND != "numba":
        raise SystemExit(
            "numba backend not active (INVARION_NO_NUMBA set or numba missing); "
            "the benchmark compares both paths from one process"
        )

    rng = np.random.default_rng(0)
    cases = [
        bench_stay_linear_box(rng),
        bench_stay_circle_pair_band(rng),
        bench_band_cover_update(rng),
        bench_dp_backward(rng),
    ]
    print("%-24s %12s %12s %9s" % ("kernel", "numba [s]", "numpy [s]", "speedup"))
    for name, call_args in cases:
        nb_args = tuple(a.copy() if isinstance(a, np.ndarray) else a for a in call_args)
        np_args = tuple(a.copy() if isinstance(a, np.ndarray) else a for a in call_args)
        t_nb, out_nb = timed(getattr(K, name), nb_args, args.repeat)
        t_np, out_np = timed(K.NUMPY_KERNELS[name], np_args, args.repeat)
        assert np.array_equal(out_nb, out_np), "backend mismatch in %s" % name
        print("%-24s %12.4f %12.4f %8.1fx" % (name, t_nb, t_np, t_np / t_nb))


if __name__ == "__main__":
    main()
