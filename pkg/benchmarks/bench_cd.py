"""Benchmark the compiled coordinate-descent kernel against the fallback.

Run as: python benchmarks/bench_cd.py
"""

import time

import numpy as np

from japmed import _cd_py
from japmed._kernel import KERNEL

try:
    from japmed._cd_cy import cd_gram as compiled_kernel
except ImportError:
    compiled_kernel = None


def make_problem(n, p, seed):
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, p))
    beta_true = np.zeros(p)
    beta_true[:p // 4] = rng.uniform(0.5, 2.0, p // 4)
    y = z @ beta_true + rng.standard_normal(n)
    gram = np.ascontiguousarray(z.T @ z)
    c = z.T @ y
    thresh = np.full(p, 50.0 / (2.0 * np.diag(gram)))
    return gram, c, thresh


def time_kernel(kernel, gram, c, thresh, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        beta = np.zeros(c.size)
        t0 = time.perf_counter()
        sweeps = kernel(gram, c, thresh, beta, 1e-10, 100_000)
        best = min(best, time.perf_counter() - t0)
    return best, sweeps, beta


def main():
    print(f"selected kernel at import: {KERNEL}")
    for n, p in [(500, 30), (2000, 90), (2000, 150), (5000, 300)]:
        gram, c, thresh = make_problem(n, p, seed=n + p)
        t_py, s_py, b_py = time_kernel(_cd_py.cd_gram, gram, c, thresh)
        line = f"n={n:5d} p={p:4d}  python: {t_py * 1e3:9.3f} ms ({s_py} sweeps)"
        if compiled_kernel is not None:
            t_cy, s_cy, b_cy = time_kernel(compiled_kernel, gram, c, thresh)
            agree = float(np.max(np.abs(b_cy - b_py)))
            line += (f"  compiled: {t_cy * 1e3:9.3f} ms ({s_cy} sweeps)"
                     f"  speedup: {t_py / t_cy:6.1f}x  max diff: {agree:.2e}")
        else:
            line += "  compiled: unavailable"
        print(line)


if __name__ == "__main__":
    main()
