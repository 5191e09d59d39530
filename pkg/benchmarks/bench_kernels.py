"""Compare the jitted kernels against their pure-numpy fallbacks.

Run directly: python benchmarks/bench_kernels.py
The active backend for the package is chosen by AFDMSIM_BACKEND (numba when
available, numpy when forced); this script times both implementations.
"""
import time

import numpy as np

from afdmsim import _kernels
from afdmsim._kernels import _ml_nearest_numpy, _zeta_channel_numpy


def timeit(fn, *args, repeat=20):
    fn(*args)  # warm-up (JIT compile / cache load)
    t0 = time.perf_counter()
    for _ in range(repeat):
        out = fn(*args)
    return (time.perf_counter() - t0) / repeat, out


def bench_ml_nearest():
    rng = np.random.default_rng(0)
    frames, cands, dim = 2048, 256, 16
    z = rng.standard_normal((frames, dim)) + 1j * rng.standard_normal((frames, dim))
    c = rng.standard_normal((cands, dim)) + 1j * rng.standard_normal((cands, dim))
    t_np, ref = timeit(_ml_nearest_numpy, z, c)
    print(f"ml_nearest  ({frames} frames x {cands} candidates x {dim})")
    print(f"  numpy : {t_np * 1e3:8.3f} ms")
    if _kernels.USE_NUMBA:
        t_nb, out = timeit(_kernels.ml_nearest, z, c)
        assert np.array_equal(ref, out)
        print(f"  numba : {t_nb * 1e3:8.3f} ms   ({t_np / t_nb:5.1f}x)")
    else:
        print("  numba : disabled (AFDMSIM_BACKEND=numpy or numba missing)")


def bench_zeta_channel():
    rng = np.random.default_rng(1)
    n, paths = 64, 4
    gains = rng.standard_normal(paths) + 1j * rng.standard_normal(paths)
    delays = np.arange(paths, dtype=float)
    dopplers = rng.uniform(-1.5, 1.5, paths)
    args = (n, 5 / 128, 1 / (2 * np.pi * n**2), gains, delays, dopplers)
    t_np, ref = timeit(_zeta_channel_numpy, *args)
    print(f"zeta_channel_matrix (N={n}, P={paths})")
    print(f"  numpy : {t_np * 1e3:8.3f} ms")
    if _kernels.USE_NUMBA:
        t_nb, out = timeit(_kernels.zeta_channel_matrix, *args)
        assert np.abs(ref - out).max() < 1e-10
        print(f"  numba : {t_nb * 1e3:8.3f} ms   ({t_np / t_nb:5.1f}x)")
    else:
        print("  numba : disabled (AFDMSIM_BACKEND=numpy or numba missing)")


if __name__ == "__main__":
    print(f"active backend: {_kernels.backend_name()}")
    bench_ml_nearest()
    bench_zeta_channel()
