#!/usr/bin/env python3
"""Benchmark the compiled geometry kernels against the numpy fallback.

The workload mirrors one simulation step at full scale: 2880 direct paths
and 92160 scattered rays against one screen position.

Run:  python benchmarks/bench_kernels.py [repeats]
"""

import sys
import time

import numpy as np

from beamsim import _kernels_py
from beamsim.kernels import HAVE_COMPILED

LAM = 299792458.0 / 28e9
N_LINKS = 2880
N_SUB = 32


def build_workload(seed=0):
    rng = np.random.default_rng(seed)
    tx = rng.uniform([-25, -20, 3.0], [25, 20, 3.0], (N_LINKS, 3))
    rx = rng.uniform([-25, -20, 1.0], [25, 20, 1.0], (N_LINKS, 3))
    rxn = np.repeat(rx, N_SUB, axis=0)
    dirs = rng.normal(size=(N_LINKS * N_SUB, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    center = np.array([0.0, 0.0, 1.5])
    return tx, rx, rxn, dirs, center


def bench(fn, *args, repeats=20):
    fn(*args)  # warm up
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - t0) / repeats


def main():
    repeats = int(sys.argv[1]) if len(sys.argv) > 1 else 20
    tx, rx, rxn, dirs, center = build_workload()

    impls = [("numpy", _kernels_py)]
    if HAVE_COMPILED:
        from beamsim import _kernels
        impls.append(("compiled", _kernels))
    else:
        print("compiled extension not available; benchmarking numpy only")

    rows = []
    for name, mod in impls:
        t_los = bench(mod.blockage_loss_los, tx, rx, center, 2.0, 3.0, LAM,
                      repeats=repeats)
        t_nlos = bench(mod.blockage_loss_nlos, rxn, dirs, center, 2.0, 3.0,
                       LAM, repeats=repeats)
        t_gt = bench(mod.gt_intersect, tx, rx, center, 2.0, 3.0,
                     repeats=repeats)
        rows.append((name, t_los, t_nlos, t_gt))

    print(f"{'impl':<10}{'los (ms)':>12}{'nlos (ms)':>12}{'gt (ms)':>12}"
          f"{'step total':>12}")
    for name, a, b, c in rows:
        print(f"{name:<10}{a*1e3:>12.3f}{b*1e3:>12.3f}{c*1e3:>12.3f}"
              f"{(a+b+c)*1e3:>12.3f}")
    if len(rows) == 2:
        tot_py = sum(rows[0][1:])
        tot_c = sum(rows[1][1:])
        print(f"\nspeedup: {tot_py / tot_c:.2f}x "
              f"({tot_py*1e3:.2f} ms -> {tot_c*1e3:.2f} ms per step)")


if __name__ == "__main__":
    main()
