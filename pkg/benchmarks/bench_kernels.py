"""Benchmark the scoring kernels: numba jit loop vs pure-numpy fallback.

Times one full hybrid-scoring pass (every node against one query) across
graph sizes. Run from the repo root:

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --sizes 1000,100000 --dim 512
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from graphtriage import kernels


def make_problem(n: int, dim: int, seed: int = 0):
    rng = np.random.RandomState(seed)

    def unit_rows(count):
        rows = rng.standard_normal((count, dim))
        rows /= np.linalg.norm(rows, axis=1, keepdims=True)
        return rows.astype(np.float32)

    q = rng.standard_normal(2 * dim)
    q /= np.linalg.norm(q)
    return unit_rows(n), unit_rows(n), q[:dim].copy(), q[dim:].copy()


def bench(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="1000,10000,100000")
    parser.add_argument("--dim", type=int, default=256)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    kernels.warmup()
    print(f"dim={args.dim}, repeats={args.repeats} (best-of shown), "
          f"lambda=0.4")
    print(f"{'nodes':>8}  {'numba (ms)':>11}  {'numpy (ms)':>11}  {'ratio':>6}")
    for n in sizes:
        text, mm, q_text, q_mm = make_problem(n, args.dim)
        jit = bench(lambda: kernels.hybrid_scores(
            text, mm, q_text, q_mm, 0.4, use_numba=True), args.repeats)
        plain = bench(lambda: kernels.hybrid_scores(
            text, mm, q_text, q_mm, 0.4, use_numba=False), args.repeats)
        check_a = kernels.hybrid_scores(text, mm, q_text, q_mm, 0.4,
                                        use_numba=True)
        check_b = kernels.hybrid_scores(text, mm, q_text, q_mm, 0.4,
                                        use_numba=False)
        assert np.allclose(check_a, check_b, atol=1e-12)
        print(f"{n:>8}  {jit * 1e3:>11.3f}  {plain * 1e3:>11.3f}  "
              f"{plain / jit:>6.2f}x")


if __name__ == "__main__":
    main()
