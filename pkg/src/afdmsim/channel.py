"""Doubly-selective channel generation and chirp-domain channel matrices.

Each propagation path is (gain, integer delay, possibly fractional Doppler).
The per-antenna-pair time-domain matrix after prefix removal is
sum_p h_p Gamma_p Delta_{k_p} Pi^{l_p}: a cyclic delay, a Doppler phase ramp
diag(exp(-2j pi k n / N)) and a diagonal prefix-correction patch Gamma_p for
the wrapped samples.  Conjugating by the chirp transform gives the banded
multicarrier-domain matrix whose per-path bands sit at offset
Ind_p = (k_p + 2 N c1 l_p) mod N from the diagonal.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .modem import AfdmParams, build_daft_matrix

SPEED_OF_LIGHT = 299_792_458.0


def velocity_to_kmax(v_kmh, f_c, delta_f):
    """Normalized maximum Doppler shift for a velocity in km/h."""
    return (v_kmh / 3.6) * f_c / (SPEED_OF_LIGHT * delta_f)


@dataclass(frozen=True)
class PathTap:
    gain: complex
    delay: int
    doppler: float

    def __post_init__(self):
        if self.delay < 0:
            raise ValueError("delay index must be non-negative")


@dataclass(frozen=True)
class ChannelRealization:
    """P paths per (receive, transmit) antenna pair, drawn independently."""

    taps: tuple  # taps[j][m] = tuple of P PathTap
    params: AfdmParams
    m: int
    j: int
    p: int

    def pair(self, j, m):
        return self.taps[j][m]


def sample_channel(m, j, p, params: AfdmParams, doppler_model, rng,
                   k_max=None) -> ChannelRealization:
    """Draw a channel realization.

    Gains are CN(0, 1/P).  The first path has delay 0; the others draw
    uniformly (with replacement) from {1, ..., l_max}.  Dopplers follow the
    Jakes law k = k_max cos(theta), theta ~ U[0, pi]; ``integer-only`` rounds
    each draw to the nearest integer.
    """
    if p < 1:
        raise ValueError("need at least one path")
    if doppler_model not in ("jakes-fractional", "integer-only"):
        raise ValueError(f"unknown doppler model {doppler_model!r}")
    if p > 1 and params.l_max == 0:
        raise ValueError("multiple paths need l_max >= 1 for the delayed taps")
    budget = params.k_max if k_max is None else k_max
    rows = []
    for _ in range(j):
        row = []
        for _ in range(m):
            gains = np.sqrt(0.5 / p) * (rng.standard_normal(p) + 1j * rng.standard_normal(p))
            delays = np.zeros(p, dtype=np.int64)
            if p > 1:
                delays[1:] = rng.integers(1, params.l_max + 1, size=p - 1)
            dopplers = budget * np.cos(rng.uniform(0.0, np.pi, size=p))
            if doppler_model == "integer-only":
                dopplers = np.round(dopplers)
            row.append(tuple(PathTap(g, int(l), float(k))
                             for g, l, k in zip(gains, delays, dopplers)))
        rows.append(tuple(row))
    return ChannelRealization(taps=tuple(rows), params=params, m=m, j=j, p=p)


# ---------------------------------------------------------------------------
# Time-domain operators
# ---------------------------------------------------------------------------

def prefix_patch_diagonal(delay, params: AfdmParams) -> np.ndarray:
    """Diagonal of Gamma_p: restores circularity for the wrapped samples."""
    n = np.arange(params.n)
    xi = np.ones(params.n, dtype=np.complex128)
    wrapped = n < delay
    xi[wrapped] = np.exp(
        -2j * np.pi * params.c1 * (params.n**2 - 2.0 * params.n * (delay - n[wrapped]))
    )
    return xi


def td_path_operator(tap: PathTap, params: AfdmParams) -> np.ndarray:
    """Gain-free path operator B_p = Gamma_p Delta_k Pi^l (N x N)."""
    n_sub = params.n
    diag = prefix_patch_diagonal(tap.delay, params) * np.exp(
        -2j * np.pi * tap.doppler * np.arange(n_sub) / n_sub
    )
    op = np.zeros((n_sub, n_sub), dtype=np.complex128)
    rows = np.arange(n_sub)
    op[rows, (rows - tap.delay) % n_sub] = diag
    return op


def apply_td_paths(s, taps, params: AfdmParams, gains=None):
    """sum_p g_p B_p s without materializing the matrices; s is (N,) or (N, batch)."""
    s = np.asarray(s, dtype=np.complex128)
    out = np.zeros_like(s)
    n_sub = params.n
    for i, tap in enumerate(taps):
        g = tap.gain if gains is None else gains[i]
        diag = prefix_patch_diagonal(tap.delay, params) * np.exp(
            -2j * np.pi * tap.doppler * np.arange(n_sub) / n_sub
        )
        shifted = np.roll(s, tap.delay, axis=0)
        out += g * (diag[:, None] * shifted if s.ndim == 2 else diag * shifted)
    return out


def build_td_block(taps, params: AfdmParams) -> np.ndarray:
    """Time-domain channel block sum_p h_p Gamma_p Delta_{k_p} Pi^{l_p}."""
    out = np.zeros((params.n, params.n), dtype=np.complex128)
    for tap in taps:
        out += tap.gain * td_path_operator(tap, params)
    return out


# ---------------------------------------------------------------------------
# Chirp-domain matrices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DaftChannel:
    """Stacked MIMO channel in both domains: h = (I x A) hbar (I x A^H)."""

    h: np.ndarray = field(repr=False)  # NJ x NM, multicarrier domain
    hbar: np.ndarray = field(repr=False)  # NJ x NM, time domain
    realization: ChannelRealization = field(repr=False)


def build_daft_channel(real: ChannelRealization) -> DaftChannel:
    params = real.params
    n_sub = params.n
    a = build_daft_matrix(params)
    hbar = np.zeros((n_sub * real.j, n_sub * real.m), dtype=np.complex128)
    h = np.zeros_like(hbar)
    for j in range(real.j):
        for m in range(real.m):
            blk = build_td_block(real.pair(j, m), params)
            hbar[j * n_sub:(j + 1) * n_sub, m * n_sub:(m + 1) * n_sub] = blk
            h[j * n_sub:(j + 1) * n_sub, m * n_sub:(m + 1) * n_sub] = a @ blk @ a.conj().T
    return DaftChannel(h=h, hbar=hbar, realization=real)


def path_band_offset(tap: PathTap, params: AfdmParams) -> float:
    """Band-center offset Ind_p = (k_p + 2 N c1 l_p) mod N."""
    return float(np.mod(tap.doppler + 2.0 * params.n * params.c1 * tap.delay, params.n))


def elementwise_channel_entry(n, n_prime, taps, params: AfdmParams) -> complex:
    """Entry (n, n') of the chirp-domain block from the closed-form sums.

    Independent of the matrix-product construction; used to cross-check it.
    The zeta2 ratio has a removable singularity, resolved to N, whenever
    (n - n' + Ind_p) = 0 mod N.
    """
    if not (0 <= n < params.n and 0 <= n_prime < params.n):
        raise ValueError("indices out of range")
    total = 0j
    for tap in taps:
        ind = path_band_offset(tap, params)
        z1 = np.exp(
            2j * np.pi / params.n
            * (params.n * params.c1 * tap.delay**2
               - n_prime * tap.delay
               + params.n * params.c2 * (n_prime**2 - n**2))
        )
        v = n - n_prime + ind
        r = np.mod(v, params.n)
        if min(r, params.n - r) < 1e-9:
            z2 = params.n + 0j
        else:
            z2 = (np.exp(-2j * np.pi * v) - 1.0) / (np.exp(-2j * np.pi * v / params.n) - 1.0)
        total += tap.gain * z1 * z2
    return total / params.n


def elementwise_channel_matrix(taps, params: AfdmParams) -> np.ndarray:
    """Full N x N block via the closed-form entry sums (jitted hot path)."""
    gains = np.array([t.gain for t in taps], dtype=np.complex128)
    delays = np.array([t.delay for t in taps], dtype=np.float64)
    dopplers = np.array([t.doppler for t in taps], dtype=np.float64)
    return _kernels.zeta_channel_matrix(params.n, params.c1, params.c2,
                                        gains, delays, dopplers)


def band_support_mask(real: ChannelRealization, k_nu=None) -> np.ndarray:
    """Structural support of the stacked matrix: per path, the band of width
    2 k_nu + 1 centred at column (n + Ind_p) mod N in every row n."""
    params = real.params
    n_sub = params.n
    guard = params.k_nu if k_nu is None else int(k_nu)
    mask = np.zeros((n_sub * real.j, n_sub * real.m), dtype=bool)
    rows = np.arange(n_sub)
    width = np.arange(-guard, guard + 1)
    for j in range(real.j):
        for m in range(real.m):
            blk = np.zeros((n_sub, n_sub), dtype=bool)
            for tap in real.pair(j, m):
                centers = np.round(rows + path_band_offset(tap, params)).astype(int)
                cols = (centers[:, None] + width[None, :]) % n_sub
                blk[rows[:, None], cols] = True
            mask[j * n_sub:(j + 1) * n_sub, m * n_sub:(m + 1) * n_sub] = blk
    return mask


def estimation_support_mask(real: ChannelRealization) -> np.ndarray:
    """Entries a standard channel estimator resolves for this waveform.

    The chirp-domain estimator reconstructs the full effective matrix (any
    residual Doppler-like rotation, CFO included, is absorbed into the banded
    channel model it fits); a plain-OFDM receiver (c1 = 0) estimates one
    coefficient per subcarrier and antenna pair, i.e. a width-0 band, leaving
    Doppler/CFO/PN intercarrier leakage unmodeled.
    """
    if real.params.c1 != 0.0:
        return np.ones((real.params.n * real.j, real.params.n * real.m), dtype=bool)
    return band_support_mask(real, k_nu=0)


def error_support_mask(real: ChannelRealization) -> np.ndarray:
    """Support carrying channel-estimation error: the banded model support
    (guard k_nu) for the chirp waveform, the diagonal for plain OFDM."""
    return band_support_mask(real, k_nu=None if real.params.c1 != 0.0 else 0)
