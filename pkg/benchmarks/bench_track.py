"""Benchmark the compiled track-integration kernel against the Python fallback.

Usage: python3 benchmarks/bench_track.py [steps]
"""
import sys
import time

import numpy as np

from rovermotion import _track_py
from rovermotion.kernels import BACKEND, integrate_track


def bench(fn, vx, vy, wz, dt, repeats=20):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(vx, vy, wz, dt)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 1_000_000
    rng = np.random.default_rng(0)
    vx = rng.uniform(-0.1, 0.1, n)
    vy = rng.uniform(-0.1, 0.1, n)
    wz = rng.uniform(-0.3, 0.3, n)
    dt = 0.01

    print(f"steps: {n}, active backend: {BACKEND}")
    t_py = bench(_track_py.integrate_track, vx, vy, wz, dt)
    print(f"python  : {t_py * 1e3:8.2f} ms  ({n / t_py / 1e6:6.1f} Msteps/s)")
    if BACKEND == "cython":
        t_cy = bench(integrate_track, vx, vy, wz, dt)
        print(f"cython  : {t_cy * 1e3:8.2f} ms  ({n / t_cy / 1e6:6.1f} Msteps/s)")
        print(f"speedup : {t_py / t_cy:.1f}x")
        a = integrate_track(vx, vy, wz, dt)
        b = _track_py.integrate_track(vx, vy, wz, dt)
        worst = max(float(np.max(np.abs(x - y))) for x, y in zip(a, b))
        print(f"max backend deviation: {worst:.2e}")
    else:
        print("compiled extension not available; only the fallback was timed")


if __name__ == "__main__":
    main()
