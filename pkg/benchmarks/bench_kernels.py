"""Benchmark the jitted kernels against their pure-numpy fallbacks.

Runs both implementations of each hot kernel on realistic shapes, checks
they agree, and prints timings side by side.

    python benchmarks/bench_kernels.py [--repeats 20]
"""

import argparse
import time

import numpy as np

from gransum import kernels


def timeit(fn, args, repeats):
    fn(*args)  # warmup (and jit compile)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_lcs(repeats):
    rng = np.random.default_rng(0)
    a = rng.integers(0, 50, 300).astype(np.int64)
    b = rng.integers(0, 50, 300).astype(np.int64)
    t_py = timeit(kernels._lcs_mask_greedy_py, (a, b), repeats)
    row = f"lcs_mask_greedy   300x300   numpy {t_py * 1e3:8.2f} ms"
    if kernels._lcs_mask_greedy_nb is not None:
        t_nb = timeit(kernels._lcs_mask_greedy_nb, (a, b), repeats)
        same = np.array_equal(
            kernels._lcs_mask_greedy_py(a, b), kernels._lcs_mask_greedy_nb(a, b)
        )
        row += f"   numba {t_nb * 1e3:8.2f} ms   speedup {t_py / t_nb:6.1f}x   agree {same}"
    print(row)


def bench_gru(repeats):
    rng = np.random.default_rng(1)
    t_steps, h = 400, 64
    args = (
        rng.normal(size=(t_steps, 2 * h)),
        rng.normal(size=(t_steps, h)),
        rng.normal(size=(h, 2 * h)) * 0.3,
        rng.normal(size=(h, h)) * 0.3,
        rng.normal(size=2 * h) * 0.1,
        rng.normal(size=h) * 0.1,
        rng.normal(size=h),
    )
    t_py = timeit(kernels._gru_seq_forward_py, args, repeats)
    row = f"gru_seq_forward   T=400 H=64 numpy {t_py * 1e3:8.2f} ms"
    if kernels._gru_seq_forward_nb is not None:
        t_nb = timeit(kernels._gru_seq_forward_nb, args, repeats)
        py_out = kernels._gru_seq_forward_py(*args)
        nb_out = kernels._gru_seq_forward_nb(*args)
        same = all(np.allclose(a, b, atol=1e-12) for a, b in zip(py_out, nb_out))
        row += f"   numba {t_nb * 1e3:8.2f} ms   speedup {t_py / t_nb:6.1f}x   agree {same}"
    print(row)

    hs, zs, rs, ns = kernels._gru_seq_forward_py(*args)
    dh_out = rng.normal(size=zs.shape)
    dh_final = rng.normal(size=h)
    bwd_args = (hs, zs, rs, ns, args[2], args[3], dh_out, dh_final)
    t_py = timeit(kernels._gru_seq_backward_py, bwd_args, repeats)
    row = f"gru_seq_backward  T=400 H=64 numpy {t_py * 1e3:8.2f} ms"
    if kernels._gru_seq_backward_nb is not None:
        t_nb = timeit(kernels._gru_seq_backward_nb, bwd_args, repeats)
        py_out = kernels._gru_seq_backward_py(*bwd_args)
        nb_out = kernels._gru_seq_backward_nb(*bwd_args)
        same = all(np.allclose(a, b, atol=1e-12) for a, b in zip(py_out, nb_out))
        row += f"   numba {t_nb * 1e3:8.2f} ms   speedup {t_py / t_nb:6.1f}x   agree {same}"
    print(row)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()
    print(f"numba enabled: {kernels.NUMBA_ENABLED}")
    bench_lcs(args.repeats)
    bench_gru(args.repeats)


if __name__ == "__main__":
    main()
