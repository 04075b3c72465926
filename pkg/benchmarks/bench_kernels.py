"""Time the compiled kernels against the pure-Python fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--size 65] [--repeat 5]

Prints one line per kernel with the best wall time of each backend, the
speedup, and the largest difference between the two results.
"""

import argparse
import time

import numpy as np

from srmc.kernels import backends


def _cases(size):
    rng = np.random.default_rng(0)
    m = n = size
    xs = np.linspace(1.0, 2.0, m)
    ys = np.linspace(1.0, 2.0, n)
    v = rng.standard_normal((m, n))
    w = np.full((m, n), (xs[1] - xs[0]) * (ys[1] - ys[0]))
    fv = np.full((m, n), 0.5)
    g = np.empty((3, 2, m - 1, n - 1))
    g[0], g[1], g[2] = 1.0, 0.1, 1.5
    yg = 0.1 * rng.standard_normal((3, 2, m - 1, n - 1))
    grid = 0.3 * rng.standard_normal((m, n))
    hnodes = np.ones(2 * 20000 + 1)
    return {
        "tgraph_energy_grad": lambda k: k.tgraph_energy_grad(v, xs, ys, fv, 1e-3, w),
        "intrinsic_area_grad": lambda k: k.intrinsic_area_grad(0.1 * v, 1.0 / (m - 1), 1.0 / (n - 1), g, yg),
        "rk4_char_grid": lambda k: k.rk4_char_grid(grid, 0.0, 1.0 / (m - 1), -5.0, 10.0 / (n - 1), 0.0, 0.0, 1e-4, 10000, -5.0, 5.0),
        "rk4_geodesic_const": lambda k: k.rk4_geodesic_const(1.0, 0.0, 1.0, hnodes, 0.0, 0.0, 0.0, 0.0, 1e-4, 20000),
    }


def _flatten(result):
    if isinstance(result, tuple):
        return np.concatenate([np.ravel(np.asarray(r, dtype=float)) for r in result])
    return np.ravel(np.asarray(result, dtype=float))


def best_time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--size", type=int, default=65, help="grid points per side")
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    impls = backends()
    if "compiled" not in impls:
        print("compiled extension not built; only the fallback is available")
    print(f"{'kernel':<22} {'python [s]':>12} {'compiled [s]':>13} {'speedup':>8} {'max diff':>10}")
    for name, call in _cases(args.size).items():
        t_py = best_time(lambda: call(impls["python"]), args.repeat)
        if "compiled" in impls:
            t_c = best_time(lambda: call(impls["compiled"]), args.repeat)
            diff = float(np.max(np.abs(_flatten(call(impls["python"])) - _flatten(call(impls["compiled"])))))
            print(f"{name:<22} {t_py:12.5f} {t_c:13.5f} {t_py / t_c:8.1f} {diff:10.2e}")
        else:
            print(f"{name:<22} {t_py:12.5f} {'-':>13} {'-':>8} {'-':>10}")


if __name__ == "__main__":
    main()
