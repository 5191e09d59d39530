"""Hot numeric kernels with numba-jitted and pure-numpy implementations.

The active backend is chosen at import time: numba when importable, unless the
environment variable ``AFDMSIM_BACKEND=numpy`` forces the fallback path.  Both
implementations are kept importable so benchmarks and tests can compare them.
"""
from __future__ import annotations

import os

import numpy as np

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    _HAVE_NUMBA = False

_FORCED = os.environ.get("AFDMSIM_BACKEND", "").strip().lower()
USE_NUMBA = _HAVE_NUMBA and _FORCED != "numpy"


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# Nearest-candidate search (ML detection inner loop)
# ---------------------------------------------------------------------------

def _ml_nearest_numpy(z, cands):
    """Index of the closest candidate row for each row of ``z``.

    Uses ||z - c||^2 = ||z||^2 - 2 Re<z, c> + ||c||^2; the ||z||^2 term is
    common per row and dropped.
    """
    cross = z @ cands.conj().T
    metric = np.sum(np.abs(cands) ** 2, axis=1)[None, :] - 2.0 * cross.real
    return np.argmin(metric, axis=1)


def _zeta_channel_numpy(n_sub, c1, c2, gains, delays, dopplers):
    """DAFT-domain channel matrix from the closed-form per-entry sums.

    Entry (n, n') is (1/N) sum_p h_p zeta1(l_p,n,n') zeta2(l_p,k_p,n,n') with
    the removable zeta2 singularity at (n - n' + Ind_p) = 0 mod N resolved to
    its limit value N.
    """
    n = np.arange(n_sub)[:, None]
    npr = np.arange(n_sub)[None, :]
    h = np.zeros((n_sub, n_sub), dtype=np.complex128)
    for hp, lp, kp in zip(gains, delays, dopplers):
        ind = np.mod(kp + 2.0 * n_sub * c1 * lp, n_sub)
        z1 = np.exp(
            2j
            * np.pi
            / n_sub
            * (n_sub * c1 * lp * lp - npr * lp + n_sub * c2 * (npr**2 - n**2))
        )
        v = n - npr + ind
        num = np.exp(-2j * np.pi * v) - 1.0
        den = np.exp(-2j * np.pi * v / n_sub) - 1.0
        r = np.mod(v, n_sub)
        singular = np.minimum(r, n_sub - r) < 1e-9
        z2 = np.where(singular, n_sub + 0j, num / np.where(singular, 1.0, den))
        h += hp * z1 * z2
    return h / n_sub


if USE_NUMBA:

    @numba.njit(cache=True)
    def _ml_nearest_numba(z, cands):
        n_rows, dim = z.shape
        n_cand = cands.shape[0]
        out = np.empty(n_rows, dtype=np.int64)
        for b in range(n_rows):
            best = np.inf
            best_k = 0
            for k in range(n_cand):
                acc = 0.0
                for l in range(dim):
                    dr = z[b, l].real - cands[k, l].real
                    di = z[b, l].imag - cands[k, l].imag
                    acc += dr * dr + di * di
                if acc < best:
                    best = acc
                    best_k = k
            out[b] = best_k
        return out

    @numba.njit(cache=True)
    def _zeta_channel_numba(n_sub, c1, c2, gains, delays, dopplers):
        h = np.zeros((n_sub, n_sub), dtype=np.complex128)
        two_pi = 2.0 * np.pi
        for p in range(gains.shape[0]):
            hp = gains[p]
            lp = delays[p]
            kp = dopplers[p]
            ind = (kp + 2.0 * n_sub * c1 * lp) % n_sub
            num = np.exp(-1j * two_pi * ind) - 1.0
            for n in range(n_sub):
                for npr in range(n_sub):
                    z1 = np.exp(
                        1j
                        * two_pi
                        / n_sub
                        * (
                            n_sub * c1 * lp * lp
                            - npr * lp
                            + n_sub * c2 * (npr * npr - n * n)
                        )
                    )
                    v = n - npr + ind
                    r = v % n_sub
                    if min(r, n_sub - r) < 1e-9:
                        z2 = n_sub + 0j
                    else:
                        z2 = num / (np.exp(-1j * two_pi * v / n_sub) - 1.0)
                    h[n, npr] += hp * z1 * z2
        return h / n_sub

    def ml_nearest(z, cands):
        return _ml_nearest_numba(
            np.ascontiguousarray(z, dtype=np.complex128),
            np.ascontiguousarray(cands, dtype=np.complex128),
        )

    def zeta_channel_matrix(n_sub, c1, c2, gains, delays, dopplers):
        return _zeta_channel_numba(
            n_sub,
            float(c1),
            float(c2),
            np.asarray(gains, dtype=np.complex128),
            np.asarray(delays, dtype=np.float64),
            np.asarray(dopplers, dtype=np.float64),
        )

else:
    ml_nearest = _ml_nearest_numpy

    def zeta_channel_matrix(n_sub, c1, c2, gains, delays, dopplers):
        return _zeta_channel_numpy(
            n_sub,
            float(c1),
            float(c2),
            np.asarray(gains, dtype=np.complex128),
            np.asarray(delays, dtype=np.float64),
            np.asarray(dopplers, dtype=np.float64),
        )
