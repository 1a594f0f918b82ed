"""Timing comparison of the pure-NumPy kernels against the compiled twins.

Run:  python3 benchmarks/bench_kernels.py
"""
import time

import numpy as np

from repmtl._kernels import pure

try:
    from repmtl._kernels import _speedups
except ImportError:
    _speedups = None


def time_call(fn, *args, repeats=200):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_power_method(p, rng):
    M = rng.standard_normal((p, p))
    S = M @ M.T / p
    rows = [("pure", time_call(pure.power_method_sym, S))]
    if _speedups is not None:
        rows.append(("compiled", time_call(_speedups.power_method_sym, S)))
    return rows


def bench_apg(p, rng):
    M = rng.standard_normal((p, p))
    G = 2.0 * (M @ M.T / p) + 0.05 * np.eye(p)
    g0 = rng.standard_normal(p)
    L = float(np.linalg.eigvalsh(G)[-1])
    tau = 0.2 / L
    rows = [("pure", time_call(pure.apg_l2_linear, G, g0, tau, L))]
    if _speedups is not None:
        rows.append(("compiled", time_call(_speedups.apg_l2_linear, G, g0, tau, L)))
    return rows


def report(name, rows):
    base = rows[0][1]
    for label, t in rows:
        speedup = "" if label == "pure" else f"  ({base / t:.2f}x vs pure)"
        print(f"  {name:<22s} {label:<9s} {t * 1e6:9.1f} us{speedup}")


def main():
    rng = np.random.default_rng(0)
    if _speedups is None:
        print("compiled backend not available; timing pure only")
    for p in (5, 20, 100):
        print(f"p = {p}")
        report("power_method_sym", bench_power_method(p, rng))
        report("apg_l2_linear", bench_apg(p, rng))


if __name__ == "__main__":
    main()
