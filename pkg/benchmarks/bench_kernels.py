"""Time the SRP inner loops under every available backend.

Usage::

    python3 benchmarks/bench_kernels.py [--frames 32] [--grid 8x16] [--repeats 5]

Prints one row per (kernel, backend) with the best wall time per frame and the
speed-up over the numpy fallback. Outputs of the backends are cross-checked first.
"""
import argparse
import time

import numpy as np

from srpedge import build_grid, default_array, n_samp, srp, tdoa_table
from srpedge.kernels import available_backends

K = 4096


def best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--frames", type=int, default=32)
    ap.add_argument("--grid", default="8x16")
    ap.add_argument("--repeats", type=int, default=5)
    a = ap.parse_args(argv)

    arr = default_array()
    grid = build_grid(*(int(v) for v in a.grid.split("x")))
    tdoa = tdoa_table(arr, grid, 16000)
    bounds = n_samp(arr, 16000)
    edge = srp.build_sinc_table_edge(tdoa, bounds)
    two = srp.build_sinc_table(tdoa, bounds)
    lags = srp.td_lags(tdoa, K)
    cos_w, sin_w = srp.fourier_tables(K, edge.n_max)

    rng = np.random.default_rng(0)
    G = np.exp(1j * rng.uniform(-np.pi, np.pi, (a.frames, arr.n_pairs, K // 2 + 1)))
    re, im = np.ascontiguousarray(G.real), np.ascontiguousarray(G.imag)
    td = [np.ascontiguousarray(srp.time_domain_gcc(srp.GccPhatSpectrum(g, K))) for g in G]

    kernels = {
        "edge_accumulate": lambda m, f: m.edge_accumulate(re[f], im[f], cos_w, sin_w, edge.row_pair, edge.row_n, edge.coef, edge.lags),
        "lc_accumulate": lambda m, f: m.lc_accumulate(re[f], im[f], cos_w, sin_w, two.row_pair, two.row_n, two.values),
        "td_gather": lambda m, f: m.td_gather(td[f], lags),
    }
    backends = available_backends()
    print(f"grid {a.grid}, Q={tdoa.Q}, {arr.n_pairs} pairs, {a.frames} frames, backends: {', '.join(backends)}")
    print(f"{'kernel':<16} {'backend':<8} {'ms/frame':>10} {'frames/s':>10} {'speed-up':>9}")
    for name, call in kernels.items():
        ref = call(backends["numpy"], 0)
        times = {}
        for bname, mod in backends.items():
            np.testing.assert_allclose(call(mod, 0), ref, rtol=1e-9, atol=1e-9)
            times[bname] = best_of(lambda: [call(mod, f) for f in range(a.frames)], a.repeats) / a.frames
        for bname, t in times.items():
            print(f"{name:<16} {bname:<8} {1e3 * t:>10.3f} {1 / t:>10.0f} {times['numpy'] / t:>8.1f}x")


if __name__ == "__main__":
    main()
