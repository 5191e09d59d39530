"""End-to-end impaired link: channel plus impairment chain, per realization.

The received frame decomposes into exactly five terms,

    y = H_eff x + M conj(x) + v_DI + v_NI + w,

with H_eff = rho1 K sqrt(1-eta) (I x A) P Phi_R Theta Phi_T (I x A^H), the
mirror operator M the same with rho2 and conj(Phi_T), the DC term
v_DI = K d_T (I x A) P Phi_R Theta 1, the distortion term
v_NI = (I x A) P Phi_R Theta (K Phi_T n + q) and the rotated thermal noise
w = (I x A) P Phi_R w~.  Phase noise, CFO and the DC term are realized once
per link; DAC noise n, amplifier noise q and w~ are redrawn per frame.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .channel import ChannelRealization, DaftChannel, build_daft_channel, build_td_block
from .hwi import HwiConfig, cfo_matrix, pn_matrices
from .modem import build_daft_matrix


@dataclass(frozen=True)
class ImpairedLink:
    channel: ChannelRealization
    hwi: HwiConfig
    sigma2: float
    rho1: complex
    rho2: complex
    k_pa: float
    sigma_q2: float
    eta: float
    d_t: complex
    phi_t: np.ndarray = field(repr=False)  # (M, N) transmit PN diagonals
    phi_r: np.ndarray = field(repr=False)  # (J, N) receive PN diagonals
    p_cfo: np.ndarray = field(repr=False)  # (N,) CFO ramp, common to all RAs
    daft: DaftChannel = field(repr=False)
    h_eff: np.ndarray = field(repr=False)
    mirror_op: np.ndarray = field(repr=False)
    chain: np.ndarray = field(repr=False)  # (I x A) P Phi_R Theta
    v_di: np.ndarray = field(repr=False)

    @property
    def params(self):
        return self.channel.params

    @property
    def n(self):
        return self.params.n

    @property
    def m(self):
        return self.channel.m

    @property
    def j(self):
        return self.channel.j

    @property
    def nm(self):
        return self.n * self.m

    @property
    def nj(self):
        return self.n * self.j

    @property
    def h(self):
        """Impairment-free multicarrier-domain channel."""
        return self.daft.h

    def phi_t_flat(self):
        return self.phi_t.reshape(-1)

    def rx_diag(self):
        """(J, N) diagonals of P Phi_R."""
        return self.p_cfo[None, :] * self.phi_r

    def rx_rotate(self, w):
        """(I x A) P Phi_R applied to a stacked (NJ,) or (NJ, batch) vector."""
        w = np.asarray(w, dtype=np.complex128)
        a = build_daft_matrix(self.params)
        rx = self.rx_diag()
        out = np.empty_like(w)
        n = self.n
        for j in range(self.j):
            blk = w[j * n:(j + 1) * n]
            rot = rx[j][:, None] * blk if w.ndim == 2 else rx[j] * blk
            out[j * n:(j + 1) * n] = a @ rot
        return out

    def gain_vector(self):
        """Stacked path gains h ordered (j, m, p)."""
        return np.array([t.gain for j in range(self.j) for m in range(self.m)
                         for t in self.channel.pair(j, m)], dtype=np.complex128)

    def with_gains(self, gains):
        """Channel realization with the stacked gain vector replaced."""
        gains = np.asarray(gains, dtype=np.complex128).reshape(self.j, self.m, self.channel.p)
        rows = tuple(
            tuple(
                tuple(replace(tap, gain=complex(gains[j, m, p]))
                      for p, tap in enumerate(self.channel.pair(j, m)))
                for m in range(self.m)
            )
            for j in range(self.j)
        )
        return replace(self.channel, taps=rows)


def _compose_blocks(link_channel, params, rx, phi_t):
    """Blocks A diag(rx_j) Theta_{j,m} diag(phi_t_m) A^H stacked to NJ x NM."""
    a = build_daft_matrix(params)
    ah = a.conj().T
    n = params.n
    m, j = link_channel.m, link_channel.j
    out = np.zeros((n * j, n * m), dtype=np.complex128)
    for jj in range(j):
        for mm in range(m):
            blk = build_td_block(link_channel.pair(jj, mm), params)
            core = rx[jj][:, None] * blk * phi_t[mm][None, :]
            out[jj * n:(jj + 1) * n, mm * n:(mm + 1) * n] = a @ core @ ah
    return out


def realize_link(channel: ChannelRealization, hwi: HwiConfig, sigma2, rng) -> ImpairedLink:
    """Realize one end-to-end link: channel matrices plus drawn PN/CFO."""
    params = channel.params
    rho1, rho2, k_pa, sigma_q2, eta = hwi.scalars()
    phi_t, phi_r = pn_matrices(hwi, params, channel.m, channel.j, rng)
    p_cfo = cfo_matrix(hwi.cfo, params.n, 1)[0]
    rx = p_cfo[None, :] * phi_r
    daft = build_daft_channel(channel)

    amp = rho1 * k_pa * np.sqrt(1.0 - eta)
    h_eff = amp * _compose_blocks(channel, params, rx, phi_t)
    if rho2 != 0:
        mirror = rho2 * k_pa * np.sqrt(1.0 - eta) * _compose_blocks(
            channel, params, rx, np.conj(phi_t))
    else:
        mirror = np.zeros_like(h_eff)

    # chain = (I x A) P Phi_R Theta = composition with Phi_T = I, A^H unapplied
    a = build_daft_matrix(params)
    n = params.n
    chain = np.zeros((n * channel.j, n * channel.m), dtype=np.complex128)
    for jj in range(channel.j):
        for mm in range(channel.m):
            blk = daft.hbar[jj * n:(jj + 1) * n, mm * n:(mm + 1) * n]
            chain[jj * n:(jj + 1) * n, mm * n:(mm + 1) * n] = a @ (rx[jj][:, None] * blk)
    v_di = k_pa * hwi.dco * (chain @ np.ones(n * channel.m, dtype=np.complex128))

    return ImpairedLink(
        channel=channel, hwi=hwi, sigma2=float(sigma2),
        rho1=complex(rho1), rho2=complex(rho2), k_pa=float(k_pa),
        sigma_q2=float(sigma_q2), eta=float(eta), d_t=complex(hwi.dco),
        phi_t=phi_t, phi_r=phi_r, p_cfo=p_cfo, daft=daft,
        h_eff=h_eff, mirror_op=mirror, chain=chain, v_di=v_di,
    )


@dataclass(frozen=True)
class FrameTranscript:
    """One transmitted frame with its exact five-term decomposition."""

    x: np.ndarray
    y: np.ndarray
    desired: np.ndarray
    mirror: np.ndarray
    dc: np.ndarray
    nonlinear: np.ndarray
    noise: np.ndarray
    u: np.ndarray  # K Phi_T n + q, the stacked transmit distortion vector
    dac_noise: np.ndarray
    pa_noise: np.ndarray
    awgn: np.ndarray


def _cn(rng, var, shape):
    if var == 0.0:
        return np.zeros(shape, dtype=np.complex128)
    return np.sqrt(var / 2.0) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def draw_frame_noises(link: ImpairedLink, rng, batch=None):
    """Per-frame random terms (n, q, w~) in the documented order."""
    shape_t = (link.nm,) if batch is None else (link.nm, batch)
    shape_r = (link.nj,) if batch is None else (link.nj, batch)
    n = _cn(rng, link.eta, shape_t)
    q = _cn(rng, link.sigma_q2, shape_t)
    w = _cn(rng, link.sigma2, shape_r)
    return n, q, w


def transmit_frame(link: ImpairedLink, x, rng) -> FrameTranscript:
    """Send one symbol vector through the realized link."""
    x = np.asarray(x, dtype=np.complex128).reshape(-1)
    if x.shape[0] != link.nm:
        raise ValueError(f"expected {link.nm} stacked symbols, got {x.shape[0]}")
    n, q, w = draw_frame_noises(link, rng)
    u = link.k_pa * link.phi_t_flat() * n + q
    desired = link.h_eff @ x
    mirror = link.mirror_op @ np.conj(x)
    nonlinear = link.chain @ u
    noise = link.rx_rotate(w)
    y = desired + mirror + link.v_di + nonlinear + noise
    return FrameTranscript(x=x, y=y, desired=desired, mirror=mirror, dc=link.v_di,
                           nonlinear=nonlinear, noise=noise, u=u,
                           dac_noise=n, pa_noise=q, awgn=w)


def transmit_batch(link: ImpairedLink, x, rng):
    """Vectorized transmit of (NM, F) symbol columns; returns (y, u)."""
    x = np.asarray(x, dtype=np.complex128)
    n, q, w = draw_frame_noises(link, rng, batch=x.shape[1])
    u = link.k_pa * link.phi_t_flat()[:, None] * n + q
    y = (link.h_eff @ x + link.mirror_op @ np.conj(x)
         + link.v_di[:, None] + link.chain @ u + link.rx_rotate(w))
    return y, u


def noise_covariance(link: ImpairedLink) -> np.ndarray:
    """Covariance of the rotated thermal-noise term: sigma^2 I."""
    return link.sigma2 * np.eye(link.nj)


# ---------------------------------------------------------------------------
# Receiver-side channel views
# ---------------------------------------------------------------------------

def estimated_matrices(link: ImpairedLink, gains=None):
    """Receiver-side (H_eff, mirror, chain, v_DI) views of the link.

    ``gains`` substitutes the stacked path-gain vector (imperfect gain CSI
    for the enumeration detector); None reproduces the true matrices.
    """
    params = link.params
    if gains is None:
        return link.h_eff, link.mirror_op, link.chain, link.v_di
    channel = link.with_gains(gains)
    amp = link.k_pa * np.sqrt(1.0 - link.eta)
    rx = link.rx_diag()
    h_eff = link.rho1 * amp * _compose_blocks(channel, params, rx, link.phi_t)
    mirror = link.rho2 * amp * _compose_blocks(channel, params, rx,
                                               np.conj(link.phi_t))
    a = build_daft_matrix(params)
    n = params.n
    chain = np.zeros((link.nj, link.nm), dtype=np.complex128)
    for jj in range(link.j):
        for mm in range(link.m):
            blk = build_td_block(channel.pair(jj, mm), params)
            chain[jj * n:(jj + 1) * n, mm * n:(mm + 1) * n] = a @ (rx[jj][:, None] * blk)
    v_di = link.k_pa * link.d_t * (chain @ np.ones(link.nm, dtype=np.complex128))
    return h_eff, mirror, chain, v_di
