"""Transceiver impairment models.

Multiplicative blocks (oscillator phase noise, carrier frequency offset) are
unit-modulus diagonal operators represented by their diagonals.  Additive
blocks follow Bussgang-style statistical surrogates: the additive quantization
noise model for low-resolution DACs, gain/phase IQ imbalance, a soft-envelope
limiter power amplifier, and a static DC offset.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import erfc

# AQNM scaling factors for uniform quantizers up to 5 bits; beyond that the
# asymptotic formula sqrt(3) pi 2^(-2b-1) applies.
_DAC_ETA_TABLE = {1: 0.3634, 2: 0.1175, 3: 0.03454, 4: 0.009497, 5: 0.002499}


@dataclass(frozen=True)
class HwiConfig:
    """Impairment knobs; the default instance is ideal hardware."""

    pn_enabled: bool = False
    psi_t: float = 0.0
    psi_r: float = 0.0
    pn_mode: str = "clo"  # clo: one oscillator per side; slo: one per antenna
    cfo: float = 0.0
    dac_bits: int | None = None  # None = ideal DAC
    iqi_lambda: float = 0.0
    iqi_beta: float = 0.0  # radians
    nu_clip_db: float | None = None  # None = ideal amplifier
    p_s: float = 1.0
    dco: complex = 0j

    def __post_init__(self):
        if self.pn_mode not in ("clo", "slo"):
            raise ValueError(f"pn_mode must be 'clo' or 'slo', got {self.pn_mode!r}")
        if not 0.0 <= self.iqi_lambda <= 1.0:
            raise ValueError("iqi_lambda must be in [0, 1]")
        if not 0.0 <= self.iqi_beta <= np.pi / 2:
            raise ValueError("iqi_beta must be in [0, pi/2] radians")
        if self.dac_bits is not None and self.dac_bits < 1:
            raise ValueError("dac_bits must be >= 1")
        if self.p_s <= 0:
            raise ValueError("p_s must be positive")

    @property
    def nu_clip(self) -> float:
        """Clipping level on a linear scale (inf for an ideal amplifier)."""
        if self.nu_clip_db is None:
            return np.inf
        return 10.0 ** (self.nu_clip_db / 20.0)

    @property
    def eta(self) -> float:
        return 0.0 if self.dac_bits is None else dac_scaling_factor(self.dac_bits)

    def scalars(self):
        """(rho1, rho2, k_pa, sigma_q2, eta) for this configuration."""
        rho1, rho2 = iqi_params(self.iqi_lambda, self.iqi_beta)
        k_pa, sigma_q2 = sel_pa_params(self.nu_clip, self.p_s)
        return rho1, rho2, k_pa, sigma_q2, self.eta

    def is_ideal(self) -> bool:
        return (
            not self.pn_enabled
            and self.cfo == 0.0
            and self.dac_bits is None
            and self.iqi_lambda == 0.0
            and self.iqi_beta == 0.0
            and self.nu_clip_db is None
            and self.dco == 0
        )


def hwi_preset(name: str) -> HwiConfig:
    """Named impairment profiles used by the bundled experiment recipes."""
    key = name.strip().lower().replace("-", "").replace("_", "")
    if key == "ideal":
        return HwiConfig()
    if key == "scheme1":
        return HwiConfig(cfo=0.04, dac_bits=5, iqi_lambda=0.02,
                         iqi_beta=np.deg2rad(1.0), nu_clip_db=4.0, dco=0.02 + 0j)
    if key == "scheme2":
        return HwiConfig(cfo=0.04, dac_bits=5, iqi_lambda=0.05,
                         iqi_beta=np.deg2rad(1.0), nu_clip_db=4.0, dco=0.04 + 0j)
    if key == "scheme1additive":
        # additive blocks only: DCO, IQI, DAC, amplifier; no CFO/PN
        return replace(hwi_preset("scheme1"), cfo=0.0, pn_enabled=False)
    raise ValueError(f"unknown HWI preset {name!r}")


# ---------------------------------------------------------------------------
# Multiplicative distortions
# ---------------------------------------------------------------------------

def pn_increment_variance(psi, f_c, t_s):
    """Wiener phase-walk increment variance 4 pi^2 f_c^2 psi T_s."""
    return 4.0 * np.pi**2 * f_c**2 * psi * t_s


def _pn_walks(n, count, var, rng):
    theta0 = rng.uniform(0.0, 2.0 * np.pi, size=(count, 1))
    steps = rng.normal(0.0, np.sqrt(var), size=(count, n - 1)) if var > 0 else np.zeros((count, n - 1))
    return np.concatenate([theta0, theta0 + np.cumsum(steps, axis=1)], axis=1)


def pn_matrices(config: HwiConfig, params, m, j, rng):
    """Diagonals of the transmit/receive phase-noise operators.

    Returns (phi_t, phi_r) with shapes (m, N) and (j, N); each row is the
    diagonal of one antenna's N x N rotation block.  In 'clo' mode all rows on
    a side share one oscillator trajectory; 'slo' draws independent ones.
    theta(0) is uniform on [0, 2 pi) per oscillator.
    """
    if not config.pn_enabled:
        ones = np.ones((m, params.n), dtype=np.complex128)
        return ones, np.ones((j, params.n), dtype=np.complex128)
    t_s = params.sample_period
    var_t = pn_increment_variance(config.psi_t, params.f_c, t_s)
    var_r = pn_increment_variance(config.psi_r, params.f_c, t_s)
    if config.pn_mode == "clo":
        theta_t = np.repeat(_pn_walks(params.n, 1, var_t, rng), m, axis=0)
        theta_r = np.repeat(_pn_walks(params.n, 1, var_r, rng), j, axis=0)
    else:
        theta_t = _pn_walks(params.n, m, var_t, rng)
        theta_r = _pn_walks(params.n, j, var_r, rng)
    return np.exp(1j * theta_t), np.exp(1j * theta_r)


def cfo_matrix(phi_cfo, n, j=1):
    """Diagonal of the receive CFO operator, identical for every antenna.

    Returns shape (j, n) with entries exp(2j pi phi n / N).
    """
    ramp = np.exp(2j * np.pi * phi_cfo * np.arange(n) / n)
    return np.tile(ramp, (j, 1))


# ---------------------------------------------------------------------------
# Additive distortions
# ---------------------------------------------------------------------------

def dac_scaling_factor(b: int) -> float:
    """AQNM distortion factor eta for a b-bit quantizer."""
    if b < 1:
        raise ValueError("quantizer resolution must be >= 1 bit")
    if b <= 5:
        return _DAC_ETA_TABLE[b]
    return np.sqrt(3.0) * np.pi * 2.0 ** (-2 * b - 1)


def dac_quantize(s, b, rng):
    """Statistical quantizer surrogate sqrt(1 - eta) s + CN(0, eta).

    This is the Bussgang decomposition of the quantizer, not a deterministic
    rounding stage.  ``b`` may be None for an ideal converter.
    """
    s = np.asarray(s, dtype=np.complex128)
    if b is None:
        return s.copy()
    eta = dac_scaling_factor(b)
    noise = np.sqrt(eta / 2.0) * (rng.standard_normal(s.shape) + 1j * rng.standard_normal(s.shape))
    return np.sqrt(1.0 - eta) * s + noise


def iqi_params(lam, beta):
    """Direct/conjugate mixing coefficients for gain/phase IQ mismatch."""
    rho1 = np.cos(beta) + 1j * lam * np.sin(beta)
    rho2 = lam * np.cos(beta) - 1j * np.sin(beta)
    return rho1, rho2


def iqi_apply(s, rho1, rho2):
    return rho1 * np.asarray(s) + rho2 * np.conj(s)


def sel_pa_params(nu_clip, p_s=1.0):
    """Bussgang gain and distortion power of a soft-envelope limiter.

    K = 1 - exp(-nu^2) + (sqrt(pi)/2) nu erfc(nu) and
    sigma_q^2 = P_s (1 - exp(-nu^2) - K^2) for clipping level nu = A / sqrt(P_s).
    """
    if nu_clip < 0:
        raise ValueError("clipping level must be non-negative")
    if p_s <= 0:
        raise ValueError("symbol power must be positive")
    if np.isinf(nu_clip):
        return 1.0, 0.0
    k_pa = 1.0 - np.exp(-nu_clip**2) + 0.5 * np.sqrt(np.pi) * nu_clip * erfc(nu_clip)
    sigma_q2 = p_s * (1.0 - np.exp(-nu_clip**2) - k_pa**2)
    return float(k_pa), float(max(sigma_q2, 0.0))


def sel_pa_apply(s, k_pa, sigma_q2, rng):
    """Bussgang amplifier surrogate K s + CN(0, sigma_q^2)."""
    s = np.asarray(s, dtype=np.complex128)
    if sigma_q2 == 0.0:
        return k_pa * s
    noise = np.sqrt(sigma_q2 / 2.0) * (rng.standard_normal(s.shape) + 1j * rng.standard_normal(s.shape))
    return k_pa * s + noise


def sel_clip(s, nu_clip, p_s=1.0):
    """Deterministic envelope clipper (diagnostic cross-check for the surrogate)."""
    s = np.asarray(s, dtype=np.complex128)
    limit = nu_clip * np.sqrt(p_s)
    mag = np.abs(s)
    scale = np.where(mag > limit, limit / np.maximum(mag, 1e-300), 1.0)
    return s * scale


def dco_apply(s, d_t):
    """Static DC offset s + d_T 1."""
    return np.asarray(s, dtype=np.complex128) + d_t
