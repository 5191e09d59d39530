"""Closed-form error-rate machinery.

Pairwise error probabilities come from codeword operators Xi(x) that factor
the deterministic receive signal as Xi(x) h over the stacked path gains h.
For an error vector e the distance matrix Omega = blockdiag_j Xi_j(e)^H Xi_j(e)
yields the two-determinant pairwise bound, summed into a union bound over
bit-weighted pairs.  The LMMSE side converts per-symbol output SINRs into the
standard square-QAM bit error approximation and its Jensen lower bound.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc

from .channel import prefix_patch_diagonal, sample_channel
from .link import ImpairedLink, realize_link
from .modem import Constellation, build_daft_matrix


def q_function(x):
    """Gaussian tail probability Q(x) = erfc(x / sqrt(2)) / 2 (exact)."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / np.sqrt(2.0))


def q_approx(x):
    """Two-exponential approximation exp(-x^2/2)/12 + exp(-2x^2/3)/4."""
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x**2) / 12.0 + np.exp(-2.0 * x**2 / 3.0) / 4.0


@dataclass(frozen=True)
class PepContext:
    """Noise/CSI-error levels and the path-gain covariance for PEP bounds.

    The default covariance is (1/P) I over the stacked gains; a full matrix
    can be supplied for correlated-gain studies.
    """

    sigma2: float
    sigma_h2: float = 0.0
    gamma_cov: np.ndarray | None = field(default=None, repr=False)

    @property
    def gamma1(self):
        return 1.0 / (4.0 * self.sigma2)

    @property
    def gamma2(self):
        return 1.0 / (3.0 * self.sigma2)

    @property
    def kappa1(self):
        return 1.0 / (4.0 * (self.sigma_h2 + self.sigma2))

    @property
    def kappa2(self):
        return 1.0 / (3.0 * (self.sigma_h2 + self.sigma2))


# ---------------------------------------------------------------------------
# Codeword operators
# ---------------------------------------------------------------------------

def _b_apply(vec, tap, params):
    """Path operator action B_p v = Gamma_p Delta_k Pi^l v for (N,) or (N, batch)."""
    n_sub = params.n
    diag = prefix_patch_diagonal(tap.delay, params) * np.exp(
        -2j * np.pi * tap.doppler * np.arange(n_sub) / n_sub
    )
    shifted = np.roll(vec, tap.delay, axis=0)
    return diag[:, None] * shifted if vec.ndim == 2 else diag * shifted


@dataclass(frozen=True)
class CodewordOperator:
    """Per-receive-antenna factors Xi_j (N x MP); Xi(x) h reproduces the
    deterministic receive terms for the stacked gain vector h."""

    blocks: tuple = field(repr=False)  # J entries of shape (N, M*P)
    n: int
    m: int
    j: int
    p: int

    def apply(self, gains):
        gains = np.asarray(gains, dtype=np.complex128).reshape(self.j, self.m * self.p)
        return np.concatenate([self.blocks[j] @ gains[j] for j in range(self.j)])

    def full(self):
        l = self.m * self.p
        out = np.zeros((self.n * self.j, l * self.j), dtype=np.complex128)
        for j in range(self.j):
            out[j * self.n:(j + 1) * self.n, j * l:(j + 1) * l] = self.blocks[j]
        return out

    def omega_blocks(self, other=None):
        """Gram blocks Omega_j = Xi_j^H Xi_j (MP x MP each)."""
        o = self if other is None else other
        return tuple(b.conj().T @ ob for b, ob in zip(self.blocks, o.blocks))


def build_codeword_matrix(x, link: ImpairedLink, u=None,
                          include_common=True) -> CodewordOperator:
    """Codeword operator of a stacked symbol vector on a realized link.

    Column (m, p) of Xi_j is A P_j Phi_Rj B_pjm t_m with
    t_m = K sqrt(1-eta) (rho1 Phi_Tm A^H x_m + rho2 conj(Phi_Tm) A^H conj(x_m))
        + K d_T 1 + u_m.
    ``include_common=False`` drops the d_T and u columns (they cancel in
    codeword differences).
    """
    params = link.params
    a = build_daft_matrix(params)
    ah = a.conj().T
    x = np.asarray(x, dtype=np.complex128).reshape(link.m, params.n)
    amp = link.k_pa * np.sqrt(1.0 - link.eta)
    u_arr = None if u is None else np.asarray(u, dtype=np.complex128).reshape(link.m, params.n)

    t = np.empty((link.m, params.n), dtype=np.complex128)
    for m in range(link.m):
        t[m] = amp * (link.rho1 * link.phi_t[m] * (ah @ x[m])
                      + link.rho2 * np.conj(link.phi_t[m]) * (ah @ np.conj(x[m])))
        if include_common:
            t[m] += link.k_pa * link.d_t
            if u_arr is not None:
                t[m] += u_arr[m]

    rx = link.rx_diag()
    blocks = []
    for j in range(link.j):
        cols = np.empty((params.n, link.m * link.channel.p), dtype=np.complex128)
        for m in range(link.m):
            for p, tap in enumerate(link.channel.pair(j, m)):
                cols[:, m * link.channel.p + p] = a @ (rx[j] * _b_apply(t[m], tap, params))
        blocks.append(cols)
    return CodewordOperator(blocks=tuple(blocks), n=params.n, m=link.m,
                            j=link.j, p=link.channel.p)


def codeword_difference(xc, xe, link: ImpairedLink) -> CodewordOperator:
    """Xi(xe) - Xi(xc); the DC and distortion columns cancel."""
    e = np.asarray(xe, dtype=np.complex128) - np.asarray(xc, dtype=np.complex128)
    return build_codeword_matrix(e, link, include_common=False)


# ---------------------------------------------------------------------------
# Pairwise error probabilities
# ---------------------------------------------------------------------------

def upep(xc, xe, ctx: PepContext, link: ImpairedLink) -> float:
    """Unconditional pairwise error probability, perfect gain CSI."""
    diff = codeword_difference(xc, xe, link)
    return _upep_from_blocks(diff.omega_blocks(), ctx, link.channel.p, imperfect=False)


def upep_imperfect_csi(xc, xe, ctx: PepContext, link: ImpairedLink) -> float:
    """Pairwise bound with gain-CSI error: kappa factors and inflated covariance."""
    diff = codeword_difference(xc, xe, link)
    return _upep_from_blocks(diff.omega_blocks(), ctx, link.channel.p, imperfect=True)


def _upep_from_blocks(omegas, ctx: PepContext, p, imperfect):
    g_a, g_b = (ctx.kappa1, ctx.kappa2) if imperfect else (ctx.gamma1, ctx.gamma2)
    extra = ctx.sigma_h2 if imperfect else 0.0
    if ctx.gamma_cov is not None:
        l = sum(b.shape[0] for b in omegas)
        omega = np.zeros((l, l), dtype=np.complex128)
        at = 0
        for b in omegas:
            omega[at:at + b.shape[0], at:at + b.shape[0]] = b
            at += b.shape[0]
        cov = np.asarray(ctx.gamma_cov, dtype=np.complex128) + extra * np.eye(l)
        d_a = np.linalg.det(np.eye(l) + g_a * cov @ omega).real
        d_b = np.linalg.det(np.eye(l) + g_b * cov @ omega).real
    else:
        scale = 1.0 / p + extra
        d_a = d_b = 1.0
        for b in omegas:
            eye = np.eye(b.shape[0])
            d_a *= np.linalg.det(eye + g_a * scale * b).real
            d_b *= np.linalg.det(eye + g_b * scale * b).real
    return 1.0 / (12.0 * d_a) + 1.0 / (4.0 * d_b)


# ---------------------------------------------------------------------------
# Union bound
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PairEigenvalues:
    """Per-pair eigenvalues of the Omega blocks plus bit weights; everything a
    bound curve needs once the HWI/tap realization is fixed."""

    eigs: np.ndarray = field(repr=False)  # (n_pairs, L) non-negative
    weights: np.ndarray = field(repr=False)  # Hamming distances
    n_codewords: int
    bits_per_codeword: int
    pair_scale: float  # total_pairs / sampled_pairs
    sampled: bool


def pair_eigenvalues(link: ImpairedLink, constellation: Constellation,
                     pair_budget=None, rng=None, cap=1 << 20) -> PairEigenvalues:
    """Eigen-decompose Omega for every (or a sampled set of) codeword pair(s).

    The receive-side rotations and the final unitary drop out of the Gram
    blocks, so only B_pjm and the transmit-side factors enter.
    """
    params = link.params
    symbols, bits = constellation.all_symbol_vectors(link.nm, cap=cap)
    k = symbols.shape[0]
    total = k * (k - 1)
    budget = 1 << 16 if pair_budget is None else int(pair_budget)
    if total <= budget:
        idx_c = np.repeat(np.arange(k), k)
        idx_e = np.tile(np.arange(k), k)
        keep = idx_c != idx_e
        idx_c, idx_e = idx_c[keep], idx_e[keep]
        sampled = False
        pair_scale = 1.0
    else:
        if rng is None:
            raise ValueError("sampled pair enumeration needs an rng")
        idx_c = rng.integers(0, k, size=budget)
        shift = rng.integers(1, k, size=budget)
        idx_e = (idx_c + shift) % k
        sampled = True
        pair_scale = total / budget
    weights = np.count_nonzero(bits[idx_c] != bits[idx_e], axis=1).astype(float)
    e_all = (symbols[idx_e] - symbols[idx_c])  # (n_pairs, NM)

    a = build_daft_matrix(params)
    ah = a.conj().T
    amp = link.k_pa * np.sqrt(1.0 - link.eta)
    n_sub = params.n
    mp = link.m * link.channel.p

    t = np.empty((link.m, n_sub, e_all.shape[0]), dtype=np.complex128)
    for m in range(link.m):
        em = e_all[:, m * n_sub:(m + 1) * n_sub].T  # (N, n_pairs)
        t[m] = amp * (link.rho1 * link.phi_t[m][:, None] * (ah @ em)
                      + link.rho2 * np.conj(link.phi_t[m])[:, None] * (ah @ np.conj(em)))

    eig_list = []
    for j in range(link.j):
        u = np.empty((mp, n_sub, e_all.shape[0]), dtype=np.complex128)
        for m in range(link.m):
            for p, tap in enumerate(link.channel.pair(j, m)):
                u[m * link.channel.p + p] = _b_apply(t[m], tap, params)
        omega = np.einsum("ank,bnk->kab", u.conj(), u)
        eig_list.append(np.linalg.eigvalsh(omega))
    eigs = np.concatenate(eig_list, axis=1)
    return PairEigenvalues(eigs=np.maximum(eigs, 0.0), weights=weights,
                           n_codewords=k, bits_per_codeword=bits.shape[1],
                           pair_scale=pair_scale, sampled=sampled)


def bound_from_eigenvalues(pe: PairEigenvalues, ctx: PepContext, p: int) -> float:
    """Union-bound value at one (sigma2, sigma_h2) point from cached eigenvalues."""
    imperfect = ctx.sigma_h2 > 0.0
    g_a, g_b = (ctx.kappa1, ctx.kappa2) if imperfect else (ctx.gamma1, ctx.gamma2)
    lam = (1.0 / p + ctx.sigma_h2) * pe.eigs
    prob = (np.prod(1.0 + g_a * lam, axis=1) ** -1 / 12.0
            + np.prod(1.0 + g_b * lam, axis=1) ** -1 / 4.0)
    lb = pe.bits_per_codeword
    return pe.pair_scale * float(pe.weights @ prob) / (pe.n_codewords * lb)


def aber_union_bound(ctx: PepContext, link: ImpairedLink,
                     constellation: Constellation, pair_budget=None,
                     rng=None) -> float:
    """Average-BER union bound for one realized link at one noise level."""
    pe = pair_eigenvalues(link, constellation, pair_budget=pair_budget, rng=rng)
    return bound_from_eigenvalues(pe, ctx, link.channel.p)


def union_bound_curve(*, params, m, j, p, constellation: Constellation,
                      hwi, snr_db, sigma_h2=0.0, doppler_model="jakes-fractional",
                      n_realizations=100, pair_budget=None, rng,
                      k_max=None) -> np.ndarray:
    """Union bound vs SNR, averaged over tap and transmit-PN realizations.

    Path gains are integrated analytically (they live in the covariance), so
    a realization here fixes delays, Dopplers and the multiplicative draws.
    """
    snr_db = np.atleast_1d(np.asarray(snr_db, dtype=float))
    sigma2_grid = 10.0 ** (-snr_db / 10.0)
    acc = np.zeros_like(sigma2_grid)
    for _ in range(n_realizations):
        ch = sample_channel(m, j, p, params, doppler_model, rng, k_max=k_max)
        link = realize_link(ch, hwi, 1.0, rng)
        pe = pair_eigenvalues(link, constellation, pair_budget=pair_budget, rng=rng)
        for i, s2 in enumerate(sigma2_grid):
            acc[i] += bound_from_eigenvalues(
                pe, PepContext(sigma2=s2, sigma_h2=sigma_h2), p)
    return acc / n_realizations


# ---------------------------------------------------------------------------
# Diversity probe
# ---------------------------------------------------------------------------

def diversity_probe(*, params, m, j, p, constellation: Constellation, hwi,
                    n_error_vectors=24, rng, rank_tol=1e-8,
                    doppler_model="jakes-fractional", k_max=None):
    """Numerical rank of the codeword distance matrix over random error events.

    Returns (min rank(Omega), rank of the gain covariance, diversity order).
    Half the error events flip a single symbol (the rank-minimizing class);
    the rest are random codeword pairs.
    """
    ch = sample_channel(m, j, p, params, doppler_model, rng, k_max=k_max)
    link = realize_link(ch, hwi, 1.0, rng)
    nm = link.nm
    min_rank = None
    for i in range(n_error_vectors):
        xc = constellation.points[rng.integers(0, constellation.order, size=nm)]
        xe = xc.copy()
        if i % 2 == 0:
            pos = rng.integers(0, nm)
            alt = rng.integers(0, constellation.order)
            while constellation.points[alt] == xc[pos]:
                alt = rng.integers(0, constellation.order)
            xe[pos] = constellation.points[alt]
        else:
            xe = constellation.points[rng.integers(0, constellation.order, size=nm)]
            if np.array_equal(xe, xc):
                xe[rng.integers(0, nm)] = constellation.points[
                    (constellation.nearest_index(xc[0])[0] + 1) % constellation.order]
        diff = codeword_difference(xc, xe, link)
        rank = 0
        for blk in diff.blocks:
            sv = np.linalg.svd(blk, compute_uv=False)
            if sv.size and sv[0] > 0:
                rank += int(np.count_nonzero(sv > rank_tol * sv[0]))
        min_rank = rank if min_rank is None else min(min_rank, rank)
    l = p * m * j
    diversity = min(l, min_rank)
    return min_rank, l, diversity


# ---------------------------------------------------------------------------
# LMMSE closed forms
# ---------------------------------------------------------------------------

def qam_ber_constants(constellation: Constellation):
    """(u1, u2) of the square-QAM bit error approximation u1 Q(sqrt(u2 chi))."""
    order = constellation.order
    u1 = (4.0 / np.log2(order)) * (1.0 - 1.0 / np.sqrt(order))
    u2 = 3.0 / (order - 1.0)
    return u1, u2


def lmmse_ber_approx(report, constellation: Constellation) -> float:
    """Mean over symbols of u1 Q(sqrt(u2 chi_c)) with the exact Q function."""
    u1, u2 = qam_ber_constants(constellation)
    return float(np.mean(u1 * q_function(np.sqrt(u2 * report.chi))))


def lmmse_ber_lower_bound(report, constellation: Constellation) -> float:
    """Jensen bound through the average diagonal of T; tight when the
    diagonal is uniform."""
    u1, u2 = qam_ber_constants(constellation)
    tbar = float(np.clip(np.real(np.trace(report.t)) / report.t.shape[0],
                         0.0, 1.0 - 1e-15))
    chi_bar = tbar / (1.0 - tbar)
    return float(u1 * q_function(np.sqrt(u2 * chi_bar)))


def sinr_ratio_form(report, r_v, h_err=None) -> np.ndarray:
    """Per-symbol SINR from the full interference decomposition; equals
    T(c,c)/(1 - T(c,c)) identically (consistency check)."""
    t, g = report.t, report.g
    cross = np.sum(np.abs(t) ** 2, axis=1) - np.abs(np.diag(t)) ** 2
    resid = np.asarray(r_v, dtype=np.complex128)
    if h_err is not None:
        he = np.asarray(h_err, dtype=np.complex128)
        resid = resid + he @ he.conj().T
    extra = np.real(np.einsum("ij,jk,ik->i", g, resid, g.conj()))
    return np.abs(np.diag(t)) ** 2 / (cross + extra)
