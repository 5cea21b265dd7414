"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]
"""
import argparse
import json
import time

import numpy as np

from mrvflab import _kernels_py
from mrvflab.fitters.monotone import canonical_orders

try:
    from mrvflab import _kernels
except ImportError:
    _kernels = None


def _time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def cases(rng):
    y6 = rng.normal(size=36)
    w6 = rng.uniform(0.5, 2.0, 36)
    y1 = rng.normal(size=40)
    w1 = rng.uniform(0.5, 2.0, 40)
    perms = canonical_orders(4, [[0], [1], [2], [3]])
    y4 = rng.normal(size=16)
    w4 = np.ones(16)
    combos = np.stack(np.meshgrid(np.arange(len(perms)), np.arange(len(perms)),
                                  indexing="ij")).reshape(2, -1).T.astype(np.int64).copy()
    bounds = np.zeros(len(combos))
    return {
        "pava (40)": lambda k: k.pava(y1, w1),
        "axis_order_bounds (4x4, 24 orders)": lambda k: k.axis_order_bounds(y4, w4, (4, 4), 0, perms),
        "grid_isotonic (6x6)": lambda k: k.grid_isotonic(y6, w6, (6, 6)),
        "search_orders (4x4, 576 pairs)": lambda k: k.search_orders(y4, w4, (4, 4), [perms, perms], combos,
                                                                     bounds, -1.0, -1.0),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", help="write results here")
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    rows = []
    print(f"{'kernel':38s} {'python ms':>10s} {'compiled ms':>12s} {'speedup':>8s}")
    for name, fn in cases(rng).items():
        tp = _time(lambda: fn(_kernels_py), args.repeat) * 1e3
        tc = _time(lambda: fn(_kernels), args.repeat) * 1e3 if _kernels else float("nan")
        rows.append({"kernel": name, "python_ms": tp, "compiled_ms": tc, "speedup": tp / tc})
        print(f"{name:38s} {tp:10.3f} {tc:12.3f} {tp / tc:8.1f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
