"""Maximum-likelihood and LMMSE detection with perfect or noisy CSI.

The enumeration (ML) detector scores every candidate symbol vector against
the receiver's reconstruction of the deterministic receive signal; gain CSI
errors enter as a mismatched metric.  The LMMSE detector is G = H^H W^{-1}
with W = H H^H + E E^H + R_v, reporting the per-symbol output SINR
chi_c = T(c,c) / (1 - T(c,c)) from T = G H.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernels import ml_nearest
from .channel import error_support_mask, estimation_support_mask
from .link import ImpairedLink, estimated_matrices
from .modem import Constellation


@dataclass(frozen=True)
class CsiModel:
    """Receiver channel knowledge.

    ``gaussian-error`` perturbs the stacked path gains (enumeration detector)
    or the resolved support of the effective channel matrix (LMMSE) with
    CN(0, sigma_h2) draws.  ``knowledge='masked'`` limits the matrix estimate
    to the waveform's structural support (banded for the chirp waveform, one
    coefficient per subcarrier for plain OFDM); ``'full'`` resolves every
    entry.
    """

    mode: str = "perfect"
    sigma_h2: float = 0.0
    knowledge: str = "masked"

    def __post_init__(self):
        if self.mode not in ("perfect", "gaussian-error"):
            raise ValueError(f"unknown CSI mode {self.mode!r}")
        if self.knowledge not in ("masked", "full"):
            raise ValueError(f"unknown knowledge model {self.knowledge!r}")
        if self.mode == "perfect" and self.sigma_h2 != 0.0:
            raise ValueError("perfect CSI implies sigma_h2 = 0")
        if self.sigma_h2 < 0.0 or self.sigma_h2 > 1.0:
            raise ValueError("sigma_h2 must lie in [0, 1]")


def _cn(rng, var, shape):
    if var == 0.0:
        return np.zeros(shape, dtype=np.complex128)
    return np.sqrt(var / 2.0) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def inject_gain_csi_error(gains, sigma_h2, rng):
    """Estimated path gains h + e_h with e_h ~ CN(0, sigma_h2 I)."""
    gains = np.asarray(gains, dtype=np.complex128)
    if sigma_h2 == 0.0:
        return gains.copy()
    return gains + _cn(rng, sigma_h2, gains.shape)


def inject_matrix_csi_error(h_eff, support, sigma_h2, rng):
    """Estimated channel matrix perturbed by CN(0, sigma_h2) on its support.

    Returns (h_est, h_err) with h_err = h_eff - h_est, so the error matrix
    shares the support of the channel.
    """
    h_eff = np.asarray(h_eff, dtype=np.complex128)
    if sigma_h2 == 0.0:
        return h_eff.copy(), np.zeros_like(h_eff)
    err = _cn(rng, sigma_h2, h_eff.shape) * support
    return h_eff + err, -err


def inject_csi_error(link: ImpairedLink, csi: CsiModel, rng, which="matrix"):
    """Draw the receiver's channel estimate for one link realization.

    ``which='gains'`` returns the estimated stacked gain vector; ``'matrix'``
    returns (h_est, h_err) for the LMMSE path, where the believed channel is
    the effective channel restricted to the resolved support.
    """
    if which == "gains":
        return inject_gain_csi_error(link.gain_vector(), csi.sigma_h2, rng)
    if csi.knowledge == "masked":
        base_mask = estimation_support_mask(link.channel)
        err_mask = error_support_mask(link.channel)
    else:
        base_mask = np.ones((link.nj, link.nm), dtype=bool)
        err_mask = base_mask
    return inject_matrix_csi_error(link.h_eff * base_mask, err_mask,
                                   csi.sigma_h2, rng)


# ---------------------------------------------------------------------------
# Enumeration (ML) detection
# ---------------------------------------------------------------------------

class SearchSpaceError(ValueError):
    pass


@dataclass
class MlCandidateTable:
    """Precomputed hypothesis signals for one link realization.

    Candidate k's noiseless receive signal is H_est x_k + M_est conj(x_k);
    the common DC and (genie) distortion terms are subtracted from y before
    the nearest-candidate search, which is equivalent to including them in
    every hypothesis.  Ties resolve to the lowest candidate index.
    """

    symbols: np.ndarray = field(repr=False)  # (K, NM)
    bits: np.ndarray = field(repr=False)  # (K, L_b)
    cands: np.ndarray = field(repr=False)  # (K, NJ)
    chain: np.ndarray = field(repr=False)
    v_di: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, link: ImpairedLink, constellation: Constellation,
              gains=None, cap=1 << 20):
        try:
            symbols, bits = constellation.all_symbol_vectors(link.nm, cap=cap)
        except ValueError as exc:
            raise SearchSpaceError(str(exc)) from exc
        h_est, mirror_est, chain_est, v_di_est = estimated_matrices(link, gains=gains)
        cands = symbols @ h_est.T + np.conj(symbols) @ mirror_est.T
        return cls(symbols=symbols, bits=bits, cands=cands,
                   chain=chain_est, v_di=v_di_est)

    def detect_indices(self, y, u=None):
        """Candidate indices for stacked frames y of shape (NJ,) or (NJ, F)."""
        y = np.asarray(y, dtype=np.complex128)
        single = y.ndim == 1
        z = (y[:, None] if single else y) - self.v_di[:, None]
        if u is not None:
            uu = np.asarray(u, dtype=np.complex128)
            z = z - self.chain @ (uu[:, None] if uu.ndim == 1 else uu)
        idx = ml_nearest(np.ascontiguousarray(z.T), self.cands)
        return idx[0] if single else idx


def ml_detect(y, link: ImpairedLink, csi: CsiModel, constellation: Constellation,
              rng=None, u=None, cap=1 << 20):
    """One-shot enumeration detection; returns (symbol vector, bits).

    With ``csi.mode='gaussian-error'`` the metric uses mismatched gains drawn
    here, so ``rng`` is required.  ``u`` is the realized transmit distortion
    vector (genie reconstruction of the nonlinear term); omit it for a
    receiver that treats that term as noise.
    """
    gains = None
    if csi.mode == "gaussian-error":
        if rng is None:
            raise ValueError("gaussian-error CSI needs an rng for the estimate draw")
        gains = inject_gain_csi_error(link.gain_vector(), csi.sigma_h2, rng)
    table = MlCandidateTable.build(link, constellation, gains=gains, cap=cap)
    k = table.detect_indices(y, u=u)
    return table.symbols[k], table.bits[k]


# ---------------------------------------------------------------------------
# LMMSE detection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EqualizerReport:
    """LMMSE filter summary for one realization: T = G H_est and the SINRs."""

    t: np.ndarray = field(repr=False)
    g: np.ndarray = field(repr=False)
    chi: np.ndarray = field(repr=False)
    regularized: bool = False

    def soft_estimate(self, y):
        return self.g @ y


def _solve_hermitian(w, rhs):
    try:
        l = np.linalg.cholesky(w)
        x = np.linalg.solve(l.conj().T, np.linalg.solve(l, rhs))
        return x, False
    except np.linalg.LinAlgError:
        jitter = 1e-12 * max(np.trace(w).real / w.shape[0], 1.0)
        wj = w + jitter * np.eye(w.shape[0])
        l = np.linalg.cholesky(wj)
        return np.linalg.solve(l.conj().T, np.linalg.solve(l, rhs)), True


def lmmse_equalize(h_est, r_v, h_err=None, err_var=0.0, support_counts=None):
    """Build the LMMSE report from the estimated channel and noise statistics.

    The channel-error contribution to W uses the realized error matrix when
    given; otherwise its expectation err_var * diag(per-row support counts).
    """
    h_est = np.asarray(h_est, dtype=np.complex128)
    w = h_est @ h_est.conj().T + np.asarray(r_v, dtype=np.complex128)
    if h_err is not None:
        he = np.asarray(h_err, dtype=np.complex128)
        w = w + he @ he.conj().T
    elif err_var > 0.0:
        counts = (np.full(h_est.shape[0], h_est.shape[1])
                  if support_counts is None else np.asarray(support_counts))
        w = w + np.diag(err_var * counts.astype(float))
    x, regularized = _solve_hermitian(w, h_est)
    g = x.conj().T
    t = g @ h_est
    diag = np.clip(np.real(np.diag(t)), 0.0, 1.0 - 1e-300)
    chi = diag / np.maximum(1.0 - diag, 1e-300)
    return EqualizerReport(t=t, g=g, chi=chi, regularized=regularized)


def lmmse_detect(y, h_est, r_v, constellation: Constellation,
                 h_err=None, err_var=0.0, support_counts=None):
    """Equalize and slice one frame (or an (NJ, F) batch); returns
    (soft estimates, bits, report)."""
    report = lmmse_equalize(h_est, r_v, h_err=h_err, err_var=err_var,
                            support_counts=support_counts)
    x_soft = report.soft_estimate(np.asarray(y, dtype=np.complex128))
    bits = constellation.demap(x_soft.T.reshape(-1) if x_soft.ndim == 2 else x_soft)
    return x_soft, bits, report


def estimate_rv_covariance(link: ImpairedLink, constellation: Constellation,
                           n_frames, rng) -> np.ndarray:
    """Monte-Carlo second moment of v = v_MI + v_DI + v_NI + w over frames
    with symbols drawn uniformly from the constellation."""
    if n_frames < 1:
        raise ValueError("need at least one frame")
    total = np.zeros((link.nj, link.nj), dtype=np.complex128)
    done = 0
    while done < n_frames:
        batch = min(4096, n_frames - done)
        x = constellation.points[rng.integers(0, constellation.order,
                                              size=(link.nm, batch))]
        n = _cn(rng, link.eta, (link.nm, batch))
        q = _cn(rng, link.sigma_q2, (link.nm, batch))
        w = _cn(rng, link.sigma2, (link.nj, batch))
        v = (link.mirror_op @ np.conj(x) + link.v_di[:, None]
             + link.chain @ (link.k_pa * link.phi_t_flat()[:, None] * n + q)
             + link.rx_rotate(w))
        total += v @ v.conj().T
        done += batch
    r = total / n_frames
    return 0.5 * (r + r.conj().T)


def analytic_rv_covariance(link: ImpairedLink) -> np.ndarray:
    """Closed-form counterpart of the Monte-Carlo estimate (oracle/fast path)."""
    r = link.mirror_op @ link.mirror_op.conj().T
    r += np.outer(link.v_di, link.v_di.conj())
    r += (link.k_pa**2 * link.eta + link.sigma_q2) * (link.chain @ link.chain.conj().T)
    r += link.sigma2 * np.eye(link.nj)
    return r
