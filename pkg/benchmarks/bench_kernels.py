"""Time the compiled kernels against the numpy fallback.

Run with ``python3 benchmarks/bench_kernels.py``.  Prints the median wall
time of each kernel per backend and the largest difference between them.
"""
import argparse
import statistics
import time

import numpy as np

from quadprop import _pykernels

try:
    from quadprop import _ckernels
except ImportError:
    _ckernels = None


def _median_time(func, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = func()
        times.append(time.perf_counter() - t0)
    return statistics.median(times), out


def bench_rk4(steps, dim, repeats):
    rng = np.random.default_rng(0)
    G = rng.normal(size=(dim, dim)) * 0.1
    gens = np.broadcast_to(G, (2 * steps + 1, dim, dim)).copy()
    x0 = np.eye(dim)
    h = 1e-3
    return {
        name: _median_time(lambda mod=mod: mod.rk4_path(gens, h, x0), repeats)
        for name, mod in (("python", _pykernels), ("cython", _ckernels)) if mod is not None
    }


def bench_chirp(points, rows, repeats):
    x = np.linspace(-10, 10, points)
    rng = np.random.default_rng(1)
    phi = rng.normal(size=(rows, points)) + 1j * rng.normal(size=(rows, points))
    return {
        name: _median_time(lambda mod=mod: mod.chirp_apply(x, x, phi, -0.7), repeats)
        for name, mod in (("python", _pykernels), ("cython", _ckernels)) if mod is not None
    }


def report(label, results):
    base = results["python"][0]
    print(label)
    for name, (sec, _) in results.items():
        print(f"  {name:7s} {sec * 1e3:10.2f} ms   x{base / sec:6.2f}")
    if "cython" in results:
        diff = np.max(np.abs(results["cython"][1] - results["python"][1]))
        print(f"  max |cython - python| = {diff:.2e}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()
    if _ckernels is None:
        print("compiled extension not built; timing the numpy fallback only")
    report("rk4_path  (20000 steps, 4x4)", bench_rk4(20000, 4, args.repeats))
    report("rk4_path  (20000 steps, 12x12)", bench_rk4(20000, 12, args.repeats))
    report("chirp_apply (2048 points, 1 row)", bench_chirp(2048, 1, args.repeats))
    report("chirp_apply (256 points, 256 rows)", bench_chirp(256, 256, args.repeats))


if __name__ == "__main__":
    main()
