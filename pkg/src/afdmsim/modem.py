"""Chirp-multicarrier modem: DAFT matrix, chirp-periodic prefix, bit mapping.

The modulator multiplexes symbols on orthogonal chirp subcarriers through the
discrete affine Fourier transform A = Lambda_c2 F Lambda_c1, where F is the
unitary DFT and Lambda_c = diag(exp(-2j pi c n^2)).  Setting c1 = c2 = 0
reduces everything to plain OFDM with a cyclic prefix.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np


def select_c1(k_max, k_nu, n_sub):
    """First chirp parameter achieving full delay-Doppler separation."""
    return (2.0 * (k_max + k_nu) + 1.0) / (2.0 * n_sub)


def default_c2(n_sub):
    """Small irrational second chirp parameter (well below 1/(2N))."""
    return 1.0 / (2.0 * np.pi * n_sub**2)


@dataclass(frozen=True)
class AfdmParams:
    """Waveform geometry and chirp parameters.

    ``k_max`` is the Doppler budget in subcarrier-spacing units (may be
    fractional), ``k_nu`` the guard width used for the chirp-rate rule and for
    the banded-support diagnostics, ``l_max`` the maximum normalized delay.
    """

    n: int
    c1: float
    c2: float
    l_cpp: int
    k_max: float = 0.0
    k_nu: int = 0
    l_max: int = 0
    delta_f: float = 15e3
    f_c: float = 4e9

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"need at least 2 subcarriers, got {self.n}")
        if self.delta_f <= 0 or self.f_c <= 0:
            raise ValueError("delta_f and f_c must be positive")
        if self.l_cpp < 0 or self.l_max < 0 or self.k_nu < 0 or self.k_max < 0:
            raise ValueError("k_max, k_nu, l_max, l_cpp must be non-negative")
        if self.l_cpp < self.l_max:
            raise ValueError("prefix length must cover the maximum delay")
        guard = 2.0 * (self.k_max + self.k_nu) * (self.l_max + 1) + self.l_max
        if not guard < self.n:
            raise ValueError(
                f"delay-Doppler budget too large for N={self.n}: "
                f"2(k_max+k_nu)(l_max+1)+l_max = {guard} must be < N"
            )

    @classmethod
    def create(cls, n, k_max=0.0, k_nu=0, l_max=0, delta_f=15e3, f_c=4e9,
               waveform="afdm", l_cpp=None, c2=None):
        """Build params with the chirp-rate rule (AFDM) or c1 = c2 = 0 (OFDM)."""
        if waveform == "afdm":
            c1 = select_c1(round(k_max), k_nu, n)
            c2 = default_c2(n) if c2 is None else c2
        elif waveform == "ofdm":
            c1, c2 = 0.0, 0.0
        else:
            raise ValueError(f"unknown waveform {waveform!r}")
        return cls(n=n, c1=c1, c2=c2, l_cpp=l_max if l_cpp is None else l_cpp,
                   k_max=k_max, k_nu=k_nu, l_max=l_max,
                   delta_f=delta_f, f_c=f_c)

    @property
    def symbol_duration(self):
        return 1.0 / self.delta_f

    @property
    def sample_period(self):
        return 1.0 / (self.n * self.delta_f)


@lru_cache(maxsize=32)
def _daft_matrix_cached(n, c1, c2):
    idx = np.arange(n)
    chirp1 = np.exp(-2j * np.pi * c1 * idx**2)
    chirp2 = np.exp(-2j * np.pi * c2 * idx**2)
    dft = np.exp(-2j * np.pi * np.outer(idx, idx) / n) / np.sqrt(n)
    a = chirp2[:, None] * dft * chirp1[None, :]
    a.setflags(write=False)
    return a


def build_daft_matrix(params: AfdmParams) -> np.ndarray:
    """Unitary transform matrix A = Lambda_c2 F Lambda_c1 (N x N)."""
    return _daft_matrix_cached(params.n, params.c1, params.c2)


def modulate(x, params: AfdmParams) -> np.ndarray:
    """Time-domain frame s = A^H x.  ``x`` may be (N,) or (N, batch)."""
    x = np.asarray(x, dtype=np.complex128)
    if x.shape[0] != params.n:
        raise ValueError(f"expected length-{params.n} symbol vector, got {x.shape[0]}")
    return build_daft_matrix(params).conj().T @ x


def demodulate(r, params: AfdmParams) -> np.ndarray:
    """Multicarrier-domain samples y = A r."""
    r = np.asarray(r, dtype=np.complex128)
    if r.shape[0] != params.n:
        raise ValueError(f"expected length-{params.n} frame, got {r.shape[0]}")
    return build_daft_matrix(params) @ r


def cpp_phases(params: AfdmParams) -> np.ndarray:
    """Prefix phase factors exp(-2j pi c1 (N^2 + 2 N n)) for n = -L..-1."""
    n_neg = np.arange(-params.l_cpp, 0)
    return np.exp(-2j * np.pi * params.c1 * (params.n**2 + 2.0 * params.n * n_neg))


def add_cpp(s, params: AfdmParams) -> np.ndarray:
    """Prepend the chirp-periodic prefix (plain cyclic prefix when c1 = 0)."""
    s = np.asarray(s, dtype=np.complex128)
    if params.l_cpp > params.n:
        raise ValueError("prefix longer than the frame")
    if params.l_cpp == 0:
        return s.copy()
    prefix = s[params.n - params.l_cpp:] * cpp_phases(params)
    return np.concatenate([prefix, s])


def remove_cpp(r, params: AfdmParams) -> np.ndarray:
    """Drop the first L_cpp samples."""
    r = np.asarray(r)
    if r.shape[0] < params.l_cpp:
        raise ValueError("frame shorter than the prefix")
    return r[params.l_cpp:]


# ---------------------------------------------------------------------------
# Constellations
# ---------------------------------------------------------------------------

def _gray_levels(bits_per_axis):
    """PAM levels indexed by Gray-coded axis bits, descending from +(2^b - 1).

    The all-zeros label maps to the most positive level, so BPSK sends
    0 -> +1, 1 -> -1 and QPSK sends 00 -> (1 + 1j)/sqrt(2).
    """
    m = 1 << bits_per_axis
    levels = np.empty(m)
    for g in range(m):
        b = g
        # Gray label -> binary rank
        shift = 1
        while shift < bits_per_axis:
            b ^= b >> shift
            shift <<= 1
        levels[g] = (m - 1) - 2 * b
    return levels


@dataclass(frozen=True)
class Constellation:
    """Gray-mapped constellation with unit average symbol energy."""

    name: str
    points: np.ndarray = field(repr=False)
    bits_per_symbol: int

    @classmethod
    def make(cls, name: str) -> "Constellation":
        key = name.strip().lower()
        if key == "bpsk":
            return cls("bpsk", np.array([1.0 + 0j, -1.0 + 0j]), 1)
        if key == "qpsk":
            key = "4qam"
        if key.endswith("qam"):
            order = int(key[:-3].rstrip("-_"))
            bits = order.bit_length() - 1
            if 1 << bits != order or bits % 2 != 0:
                raise ValueError(f"square QAM order must be an even power of 2, got {order}")
            axis = _gray_levels(bits // 2)
            re, im = np.meshgrid(axis, axis, indexing="ij")
            pts = (re + 1j * im).ravel()
            pts = pts / np.sqrt(np.mean(np.abs(pts) ** 2))
            label = "qpsk" if order == 4 else f"{order}qam"
            return cls(label, pts, bits)
        raise ValueError(f"unknown constellation {name!r}")

    @property
    def order(self) -> int:
        return self.points.shape[0]

    def map_bits(self, bits) -> np.ndarray:
        """Bits (MSB-first per symbol) to constellation points."""
        bits = np.asarray(bits, dtype=np.int64).reshape(-1, self.bits_per_symbol)
        if self.name == "bpsk":
            return self.points[bits[:, 0]]
        half = self.bits_per_symbol // 2
        w_axis = 1 << np.arange(half - 1, -1, -1)
        i_idx = bits[:, :half] @ w_axis
        q_idx = bits[:, half:] @ w_axis
        axis = int(np.sqrt(self.order))
        return self.points[i_idx * axis + q_idx]

    def nearest_index(self, symbols) -> np.ndarray:
        d = np.abs(np.asarray(symbols).reshape(-1, 1) - self.points[None, :])
        return np.argmin(d, axis=1)

    def demap(self, symbols) -> np.ndarray:
        """Nearest-point hard decisions back to bits."""
        idx = self.nearest_index(symbols)
        return self.index_to_bits(idx).reshape(-1)

    def index_to_bits(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        if self.name == "bpsk":
            return idx.reshape(-1, 1)
        axis = int(np.sqrt(self.order))
        half = self.bits_per_symbol // 2
        i_idx, q_idx = idx // axis, idx % axis
        out = np.empty((idx.size, self.bits_per_symbol), dtype=np.int64)
        for k in range(half):
            shift = half - 1 - k
            out[:, k] = (i_idx >> shift) & 1
            out[:, half + k] = (q_idx >> shift) & 1
        return out

    def all_symbol_vectors(self, length, cap=1 << 20):
        """Every candidate vector in A^length plus its bit labels.

        Returns (order^length, length) symbols and the matching
        (order^length, length * bits_per_symbol) bit array.
        """
        total = self.order**length
        if total > cap:
            raise ValueError(
                f"search space |A|^{length} = {total} exceeds the cap {cap}"
            )
        grids = np.meshgrid(*([np.arange(self.order)] * length), indexing="ij")
        idx = np.stack([g.ravel() for g in grids], axis=1)
        symbols = self.points[idx]
        bits = self.index_to_bits(idx.ravel()).reshape(total, -1)
        return symbols, bits


def map_bits(bits, constellation: Constellation, n=None) -> np.ndarray:
    """Bit sequence to a length-N symbol vector."""
    symbols = constellation.map_bits(bits)
    if n is not None and symbols.shape[0] != n:
        raise ValueError(f"bit count maps to {symbols.shape[0]} symbols, expected {n}")
    return symbols


def demap_bits(symbols, constellation: Constellation) -> np.ndarray:
    return constellation.demap(symbols)
