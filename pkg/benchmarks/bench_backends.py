"""Compare the numba and pure-numpy engine backends on the hot kernels.

Usage:
    python benchmarks/bench_backends.py [--rows 4000] [--dim 32] [--points 512]

Both backends produce bit-identical counts (asserted here); the interesting
column is throughput.  IDEM_BACKEND chooses the default backend at runtime;
this script times both explicitly.
"""

import argparse
import os
import time

import numpy as np

from idem import MixtureSpec, gen_identity_clouds
from idem.metrics import (ComparisonSpec, WITHIN_NONMATED, far_curve,
                          make_grid, nn_far_curve)


def time_call(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=4000)
    ap.add_argument("--dim", type=int, default=32)
    ap.add_argument("--points", type=int, default=512)
    ap.add_argument("--sigma", type=float, default=0.2)
    args = ap.parse_args()

    K = max(2, args.rows // 4)
    ds = gen_identity_clouds(MixtureSpec(K=K, m=4, dim=args.dim,
                                         within_sigma=args.sigma, seed=0))
    spec = ComparisonSpec(WITHIN_NONMATED, ds)
    grid = make_grid(np.linspace(-1.0, 1.0, args.points))
    pairs = spec.total_comparisons()
    workers = os.cpu_count() or 1
    print(f"rows={ds.n} dim={args.dim} grid={args.points} pairs={pairs:,} "
          f"workers={workers}")

    # compile outside the timed region
    far_curve(spec, grid, backend="numba", workers=1, block=256)

    results = {}
    for op_name, op in (("far", far_curve), ("nn_far", nn_far_curve)):
        for backend in ("numba", "numpy"):
            for w in (1, workers):
                (curve, dt) = time_call(op, spec, grid, backend=backend, workers=w)
                results[(op_name, backend, w)] = (curve, dt)
                print(f"  {op_name:7s} {backend:6s} workers={w}: {dt:7.2f}s "
                      f"({pairs / dt / 1e6:8.1f}M pairs/s)")
        base = results[(op_name, "numba", 1)][0]
        for key, (curve, _) in results.items():
            if key[0] == op_name:
                assert np.array_equal(curve.counts, base.counts), key
        print(f"  {op_name}: all backends/worker counts bit-identical")


if __name__ == "__main__":
    main()
