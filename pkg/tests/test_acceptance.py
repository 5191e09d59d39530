"""Acceptance suite: one test per criterion, each printing a PASS line.

The Monte-Carlo criteria (5, 6, 7, 8) pin their operating points (geometry,
SNR, stopping rules) so the whole suite stays at desk scale; tolerances are
asserted exactly as stated per criterion.
"""
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy.integrate import quad

from afdmsim.channel import sample_channel
from afdmsim.hwi import HwiConfig, dac_scaling_factor, hwi_preset, sel_pa_params
from afdmsim.link import realize_link, transmit_frame
from afdmsim.modem import AfdmParams, Constellation, build_daft_matrix
from afdmsim.sweep import SweepConfig, analyze, emit_results, run_sweep


def report(criterion, detail):
    print(f"ACCEPTANCE {criterion}: PASS  {detail}")


def test_acceptance_01_daft_unitarity_and_ofdm_reduction():
    t0 = time.perf_counter()
    worst = 0.0
    for n in (2, 8, 64):
        params = AfdmParams(n=n, c1=(2 * 1 + 1) / (2 * n), c2=1 / (2 * np.pi * n**2),
                            l_cpp=0)
        a = build_daft_matrix(params)
        worst = max(worst, np.abs(a @ a.conj().T - np.eye(n)).max())
    assert worst < 1e-12
    dft_dev = 0.0
    for n in (2, 8, 64):
        params = AfdmParams(n=n, c1=0.0, c2=0.0, l_cpp=0)
        f = np.fft.fft(np.eye(n), norm="ortho")
        dft_dev = max(dft_dev, np.abs(build_daft_matrix(params) - f).max())
    assert dft_dev < 1e-12
    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0
    report(1, f"unitarity {worst:.1e}, DFT reduction {dft_dev:.1e}, {elapsed:.2f}s")


def test_acceptance_02_channel_elementwise_oracle():
    from afdmsim.channel import build_daft_channel, elementwise_channel_matrix
    t0 = time.perf_counter()
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(10, 17))
        l_max = 1 if n < 15 else 2
        params = AfdmParams.create(n, k_max=1, k_nu=1, l_max=l_max)
        real = sample_channel(1, 1, int(rng.integers(1, 4)), params,
                              "jakes-fractional", rng, k_max=1.4)
        h = build_daft_channel(real).h
        hz = elementwise_channel_matrix(real.pair(0, 0), params)
        worst = max(worst, np.abs(h - hz).max())
    elapsed = time.perf_counter() - t0
    assert worst < 1e-9
    assert elapsed < 10.0
    report(2, f"100 channels, max route deviation {worst:.2e}, {elapsed:.1f}s")


def test_acceptance_03_hwi_parameter_fidelity():
    table = {1: 0.3634, 2: 0.1175, 3: 0.03454, 4: 0.009497, 5: 0.002499}
    for b, eta in table.items():
        assert dac_scaling_factor(b) == eta
    nu = 10 ** (4 / 20)
    k_pa, sigma_q2 = sel_pa_params(nu, 1.0)

    def rayleigh_pdf(r):
        return 2.0 * r * np.exp(-r**2)

    gain, _ = quad(lambda r: min(r, nu) * r * rayleigh_pdf(r), 0, 12, limit=200)
    power, _ = quad(lambda r: min(r, nu) ** 2 * rayleigh_pdf(r), 0, 12, limit=200)
    assert abs(k_pa - gain) < 1e-6
    assert abs(sigma_q2 - (power - gain**2)) < 1e-6
    report(3, f"DAC table exact; SEL oracle dev {abs(k_pa - gain):.1e} / "
              f"{abs(sigma_q2 - (power - gain**2)):.1e}")


def test_acceptance_04_five_term_decomposition_and_powers():
    params = AfdmParams.create(8, k_max=0.1334, k_nu=1, l_max=1)
    rng = np.random.default_rng(7)
    ch = sample_channel(2, 2, 2, params, "jakes-fractional", rng, k_max=0.1334)
    link = realize_link(ch, hwi_preset("scheme2"), 0.05, rng)
    const = Constellation.make("qpsk")
    n = link.n
    ah = np.kron(np.eye(link.m), build_daft_matrix(params).conj().T)
    acc = np.zeros(4)
    n_frames = 10_000
    for _ in range(n_frames):
        x = const.points[rng.integers(0, 4, size=link.nm)]
        fr = transmit_frame(link, x, rng)
        assert np.array_equal(fr.y, fr.desired + fr.mirror + fr.dc
                              + fr.nonlinear + fr.noise)
        s_tilde = link.phi_t_flat() * (np.sqrt(1 - link.eta) * (ah @ x)
                                       + fr.dac_noise)
        first = slice(0, n)
        acc += [np.linalg.norm(link.k_pa * link.rho1 * s_tilde[first]) ** 2,
                np.linalg.norm(link.k_pa * link.rho2 * np.conj(s_tilde[first])) ** 2,
                np.linalg.norm(link.k_pa * link.d_t * np.ones(n)) ** 2,
                np.linalg.norm(fr.pa_noise[first]) ** 2]
    acc /= n_frames
    expect = np.array([link.k_pa**2 * abs(link.rho1) ** 2 * n,
                       link.k_pa**2 * abs(link.rho2) ** 2 * n,
                       link.k_pa**2 * abs(link.d_t) ** 2 * n,
                       link.sigma_q2 * n])
    dev = np.abs(acc / expect - 1.0).max()
    assert dev < 0.03
    report(4, f"five-term bit-exact over {n_frames} frames; "
              f"worst power deviation {dev * 100:.2f}%")


FIG10 = SweepConfig(waveform="afdm", n=8, m=1, j=2, p=2, constellation="bpsk",
                    detector="ml", velocity_kmh=540.0, k_nu=1, l_max=1,
                    snr_db_start=6.0, snr_db_stop=12.0, snr_db_step=2.0,
                    max_frames=250_000, min_bit_errors=150, frames_per_link=100,
                    theory=True, theory_links=80,
                    hwi=hwi_preset("scheme1"),
                    csi_mode="gaussian-error", sigma_h2=0.02, seed=11)


def test_acceptance_05_ml_bound_tightness():
    t0 = time.perf_counter()
    res = run_sweep(FIG10)
    rows = [r for r in res.rows if r.bit_errors >= 100]
    assert len(rows) >= 3
    for r in rows:
        assert r.ber_sim <= r.ber_theory, (
            f"simulation above the bound at {r.snr_db} dB")
    ratios = [r.ber_theory / r.ber_sim for r in rows]
    assert ratios[-1] <= 3.0 * ratios[0]
    report(5, f"bound holds at {len(rows)} points "
              f"(ratios {ratios[0]:.2f} -> {ratios[-1]:.2f}), "
              f"{time.perf_counter() - t0:.0f}s")


SLOPE_BASE = SweepConfig(waveform="afdm", n=8, m=1, j=2, p=2,
                         constellation="bpsk", detector="ml",
                         velocity_kmh=540.0, k_nu=1, l_max=1,
                         snr_db_start=10.0, snr_db_stop=16.0, snr_db_step=3.0,
                         max_frames=4_000_000, min_bit_errors=200,
                         frames_per_link=250, theory=False, seed=3)


def fitted_exponent(res):
    snr = np.array([r.snr_db for r in res.rows])
    ber = np.array([r.ber_sim for r in res.rows])
    assert all(r.bit_errors >= 150 for r in res.rows)
    return -np.polyfit(snr / 10.0, np.log10(ber), 1)[0]


def test_acceptance_06_diversity_slope_preserved_under_pn_cfo():
    t0 = time.perf_counter()
    exp_ideal = fitted_exponent(run_sweep(SLOPE_BASE))
    pn_cfo = HwiConfig(pn_enabled=True, psi_t=1e-17, psi_r=1e-17, cfo=0.04)
    exp_hwi = fitted_exponent(run_sweep(replace(SLOPE_BASE, hwi=pn_cfo)))
    target = SLOPE_BASE.p * SLOPE_BASE.j  # 4
    for exp in (exp_ideal, exp_hwi):
        assert 0.8 * target <= exp <= 1.2 * target, f"exponent {exp:.2f}"
    assert abs(exp_ideal - exp_hwi) < 0.6
    report(6, f"exponents ideal {exp_ideal:.2f}, PN+CFO {exp_hwi:.2f} "
              f"(target {target}), {time.perf_counter() - t0:.0f}s")


FIG11 = SweepConfig(waveform="afdm", n=16, m=2, j=2, p=3, constellation="qpsk",
                    detector="lmmse", velocity_kmh=540.0, k_nu=1,
                    snr_db_start=4.0, snr_db_stop=28.0, snr_db_step=6.0,
                    max_frames=30_000, min_bit_errors=1000, frames_per_link=10,
                    rv_frames=4000, theory=True,
                    hwi=hwi_preset("scheme2"),
                    csi_mode="gaussian-error", sigma_h2=0.005, seed=1)


def test_acceptance_07_lmmse_closed_form_match():
    t0 = time.perf_counter()
    res = run_sweep(FIG11)
    checked = 0
    for r in res.rows:
        assert r.ber_lower <= r.ber_theory + 1e-12
        if r.ber_sim is not None and r.ber_sim >= 1e-4:
            rel = abs(r.ber_theory - r.ber_sim) / r.ber_sim
            assert rel <= 0.25, f"{rel:.2f} at {r.snr_db} dB"
            checked += 1
    assert checked >= 4
    report(7, f"analytic/simulated agreement at {checked} points, "
              f"{time.perf_counter() - t0:.0f}s")


def _one_point(cfg):
    row = run_sweep(cfg).rows[0]
    assert row.bit_errors >= 200, f"only {row.bit_errors} errors"
    return row.ber_sim


def test_acceptance_08a_cfo_orderings():
    t0 = time.perf_counter()
    base = SweepConfig(waveform="afdm", n=32, m=1, j=1, p=2,
                       constellation="qpsk", velocity_kmh=0.0, k_nu=0,
                       l_max=16, detector="lmmse",
                       snr_db_start=30.0, snr_db_stop=30.0, snr_db_step=1.0,
                       max_frames=800_000, min_bit_errors=220,
                       frames_per_link=100, rv_frames=1500, theory=False,
                       seed=9)
    ber = {}
    for wf in ("afdm", "ofdm"):
        for phi in (0.0, 0.08):
            ber[(wf, phi)] = _one_point(replace(base, waveform=wf,
                                                hwi=HwiConfig(cfo=phi)))
    afdm_ratio = ber[("afdm", 0.08)] / ber[("afdm", 0.0)]
    ofdm_ratio = ber[("ofdm", 0.08)] / ber[("ofdm", 0.0)]
    assert afdm_ratio <= 2.0
    assert ofdm_ratio >= 5.0
    report("8a", f"CFO 0.08 degradation: afdm x{afdm_ratio:.2f}, "
                 f"ofdm x{ofdm_ratio:.2f}, {time.perf_counter() - t0:.0f}s")


def test_acceptance_08b_additive_hwi_vs_velocity():
    t0 = time.perf_counter()
    base = SweepConfig(waveform="afdm", n=32, m=2, j=2, p=3,
                       constellation="qpsk", k_nu=2, detector="lmmse",
                       snr_db_start=20.0, snr_db_stop=20.0, snr_db_step=1.0,
                       max_frames=150_000, min_bit_errors=220,
                       frames_per_link=50, rv_frames=2000, theory=False,
                       hwi=hwi_preset("scheme1-additive"), seed=4)
    gaps = []
    for v in (0.0, 270.0, 540.0):
        afdm = _one_point(replace(base, velocity_kmh=v))
        ofdm = _one_point(replace(base, waveform="ofdm", velocity_kmh=v))
        assert afdm <= ofdm, f"ordering violated at {v} km/h"
        gaps.append(ofdm / afdm)
    report("8b", "ofdm/afdm BER ratios at 0/270/540 km/h: "
                 + ", ".join(f"{g:.1f}" for g in gaps)
                 + f", {time.perf_counter() - t0:.0f}s")


def test_acceptance_08c_pn_slo_beats_clo_on_ofdm():
    t0 = time.perf_counter()
    base = SweepConfig(waveform="ofdm", n=32, m=2, j=4, p=3,
                       constellation="qpsk", velocity_kmh=540.0, k_nu=2,
                       detector="lmmse", snr_db_start=20.0, snr_db_stop=20.0,
                       snr_db_step=1.0, max_frames=20_000, min_bit_errors=4000,
                       frames_per_link=10, rv_frames=1500, theory=False, seed=1)
    out = {}
    for mode in ("clo", "slo"):
        out[mode] = _one_point(replace(base, hwi=HwiConfig(
            pn_enabled=True, psi_t=1e-17, psi_r=1e-17, pn_mode=mode)))
    assert out["slo"] <= out["clo"]
    report("8c", f"ofdm-slo {out['slo']:.3e} <= ofdm-clo {out['clo']:.3e}, "
                 f"{time.perf_counter() - t0:.0f}s")


def test_acceptance_09_sinr_saturation_under_dco():
    t0 = time.perf_counter()
    base = SweepConfig(waveform="afdm", n=32, m=2, j=2, p=3,
                       constellation="qpsk", velocity_kmh=540.0, k_nu=2,
                       detector="lmmse", snr_db_start=28.0, snr_db_stop=28.0,
                       snr_db_step=1.0, max_frames=0, min_bit_errors=0,
                       theory_links=80, rv_frames=4000, seed=2)
    sinr = {}
    for d_t in (0.0, 0.4):
        for mode in ("perfect", "imp"):
            cfg = replace(base, hwi=HwiConfig(dco=d_t + 0j),
                          csi_mode="perfect" if mode == "perfect" else "gaussian-error",
                          sigma_h2=0.0 if mode == "perfect" else 0.01)
            sinr[(d_t, mode)] = analyze(cfg).rows[0].mean_sinr_db
    gap_imp = abs(sinr[(0.0, "imp")] - sinr[(0.4, "imp")])
    gap_perfect = abs(sinr[(0.0, "perfect")] - sinr[(0.4, "perfect")])
    assert gap_imp < 1.0
    assert gap_perfect > 1.0
    report(9, f"SINR gap at 28 dB: imperfect CSI {gap_imp:.2f} dB, "
              f"perfect CSI {gap_perfect:.2f} dB, {time.perf_counter() - t0:.0f}s")


def test_acceptance_10_deterministic_csv(tmp_path):
    cfg = SweepConfig(waveform="afdm", n=8, m=1, j=2, p=2, constellation="qpsk",
                      detector="lmmse", velocity_kmh=540.0, k_nu=1, l_max=1,
                      snr_db_start=0.0, snr_db_stop=8.0, snr_db_step=4.0,
                      max_frames=600, min_bit_errors=80, frames_per_link=20,
                      rv_frames=500, theory=True, seed=123)
    blobs = []
    for tag, workers in (("a", 1), ("b", 2), ("c", 1)):
        res = run_sweep(cfg, workers=workers)
        path = tmp_path / f"{tag}.csv"
        emit_results(res, "csv", path)
        blobs.append(path.read_bytes())
    assert blobs[0] == blobs[1] == blobs[2]
    report(10, f"byte-identical CSV across repeats and worker counts "
               f"({len(blobs[0])} bytes)")
