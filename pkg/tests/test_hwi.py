import numpy as np
import pytest
from scipy.integrate import quad

from afdmsim.hwi import (HwiConfig, cfo_matrix, dac_quantize,
                         dac_scaling_factor, dco_apply, hwi_preset, iqi_apply,
                         iqi_params, pn_increment_variance, pn_matrices,
                         sel_clip, sel_pa_apply, sel_pa_params)
from afdmsim.modem import AfdmParams


def make_params(n=64):
    return AfdmParams(n=n, c1=0.0, c2=0.0, l_cpp=0, delta_f=15e3, f_c=4e9)


# -- phase noise ---------------------------------------------------------------

def test_pn_zero_variance_is_constant_phase():
    rng = np.random.default_rng(0)
    cfg = HwiConfig(pn_enabled=True, psi_t=0.0, psi_r=0.0, pn_mode="slo")
    phi_t, phi_r = pn_matrices(cfg, make_params(), 2, 3, rng)
    for row in np.vstack([phi_t, phi_r]):
        assert np.abs(row - row[0]).max() < 1e-12
        assert abs(abs(row[0]) - 1.0) < 1e-12


def test_pn_clo_shares_one_trajectory_slo_does_not():
    params = make_params()
    cfg = HwiConfig(pn_enabled=True, psi_t=1e-17, psi_r=1e-17, pn_mode="clo")
    phi_t, phi_r = pn_matrices(cfg, params, 3, 2, np.random.default_rng(1))
    assert np.abs(phi_t - phi_t[0]).max() == 0.0
    assert np.abs(phi_r - phi_r[0]).max() == 0.0
    cfg_s = HwiConfig(pn_enabled=True, psi_t=1e-17, psi_r=1e-17, pn_mode="slo")
    phi_t, _ = pn_matrices(cfg_s, params, 3, 2, np.random.default_rng(1))
    assert np.abs(phi_t[0] - phi_t[1]).max() > 1e-3


def test_pn_increment_variance_matches_formula():
    params = make_params(64)
    var = pn_increment_variance(1e-17, params.f_c, params.sample_period)
    assert abs(var - 6.58e-3) / 6.58e-3 < 1e-2
    cfg = HwiConfig(pn_enabled=True, psi_t=1e-17, psi_r=1e-17, pn_mode="slo")
    rng = np.random.default_rng(2)
    incs = []
    for _ in range(1800):
        phi_t, _ = pn_matrices(cfg, params, 1, 1, rng)
        theta = np.unwrap(np.angle(phi_t[0]))
        incs.append(np.diff(theta))
    sample_var = np.var(np.concatenate(incs))
    assert abs(sample_var - var) / var < 0.03


def test_pn_unit_modulus():
    cfg = HwiConfig(pn_enabled=True, psi_t=1e-16, psi_r=1e-16, pn_mode="slo")
    phi_t, phi_r = pn_matrices(cfg, make_params(), 2, 2, np.random.default_rng(3))
    assert np.abs(np.abs(phi_t) - 1.0).max() < 1e-12
    assert np.abs(np.abs(phi_r) - 1.0).max() < 1e-12


# -- CFO ------------------------------------------------------------------------

def test_cfo_identity_cases():
    n = 64
    assert np.abs(cfo_matrix(0.0, n) - 1.0).max() == 0.0
    assert np.abs(cfo_matrix(float(n), n) - 1.0).max() < 1e-9


def test_cfo_entry_and_blocks():
    d = cfo_matrix(0.04, 64, j=3)
    assert abs(d[0, 63] - np.exp(2j * np.pi * 0.04 * 63 / 64)) < 1e-12
    assert np.abs(d - d[0]).max() == 0.0
    assert np.abs(np.abs(d) - 1.0).max() < 1e-12


# -- DAC -------------------------------------------------------------------------

def test_dac_table_and_formula():
    assert dac_scaling_factor(1) == 0.3634
    assert dac_scaling_factor(3) == 0.03454
    expected_b6 = np.sqrt(3) * np.pi * 2.0**-13
    assert abs(dac_scaling_factor(6) - expected_b6) < 1e-12
    assert abs(expected_b6 - 6.642e-4) < 5e-7


def test_dac_factor_monotone_decreasing():
    vals = [dac_scaling_factor(b) for b in range(1, 13)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_dac_quantize_ideal_identity():
    s = np.ones(16, dtype=complex)
    out = dac_quantize(s, None, np.random.default_rng(0))
    assert np.array_equal(out, s)


def test_dac_quantize_moments():
    rng = np.random.default_rng(4)
    n = 100_000
    s = np.exp(2j * np.pi * rng.uniform(size=n))  # unit-power input
    out = dac_quantize(s, 1, rng)
    eta = 0.3634
    signal_part = np.mean(np.abs(np.sqrt(1 - eta) * s) ** 2)
    assert abs(signal_part - (1 - eta)) < 1e-12
    second_moment = np.mean(np.abs(out) ** 2)
    assert abs(second_moment - 1.0) < 0.02  # (1-eta)+eta


# -- IQI -------------------------------------------------------------------------

def test_iqi_params_cases():
    assert iqi_params(0.0, 0.0) == (1.0 + 0j, 0.0 + 0j)
    rho1, rho2 = iqi_params(1.0, 0.0)
    assert abs(rho1 - 1) < 1e-15 and abs(rho2 - 1) < 1e-15
    rho1, rho2 = iqi_params(0.05, np.deg2rad(1.0))
    assert abs(rho1 - (0.99985 + 0.000873j)) < 5e-6
    assert abs(rho2 - (0.04999 - 0.01745j)) < 5e-6


def test_iqi_apply_cases():
    s = np.array([1.0, -2.0, 0.5])
    assert np.abs(iqi_apply(s, 1.0, 1.0) - 2 * s).max() < 1e-15
    z = np.array([0.3 + 0.7j, -1j])
    assert np.abs(iqi_apply(z, 1.0, 0.0) - z).max() == 0.0
    imag = np.array([1j, -2j])
    assert np.abs(iqi_apply(imag, 0.0, 1.0) + imag).max() < 1e-15


# -- amplifier -------------------------------------------------------------------

def test_sel_limits():
    k, s2 = sel_pa_params(np.inf)
    assert (k, s2) == (1.0, 0.0)
    k, s2 = sel_pa_params(40.0)
    assert abs(k - 1.0) < 1e-12 and s2 < 1e-12
    k, s2 = sel_pa_params(0.0)
    assert k == 0.0 and s2 == 0.0


def bussgang_gain_quadrature(nu, p_s=1.0):
    """E[min(r, A) r] / P_s for Rayleigh r with E r^2 = P_s (oracle)."""
    a = nu * np.sqrt(p_s)
    f = lambda r: min(r, a) * r * (2 * r / p_s) * np.exp(-r**2 / p_s)
    val, _ = quad(f, 0.0, 12.0 * np.sqrt(p_s), limit=200)
    return val / p_s


def clipped_power_quadrature(nu, p_s=1.0):
    a = nu * np.sqrt(p_s)
    f = lambda r: min(r, a) ** 2 * (2 * r / p_s) * np.exp(-r**2 / p_s)
    val, _ = quad(f, 0.0, 12.0 * np.sqrt(p_s), limit=200)
    return val


def test_sel_4db_matches_quadrature_oracle():
    nu = 10 ** (4 / 20)
    k, s2 = sel_pa_params(nu, 1.0)
    k_oracle = bussgang_gain_quadrature(nu)
    s2_oracle = clipped_power_quadrature(nu) - k_oracle**2
    assert abs(k - k_oracle) < 1e-6
    assert abs(s2 - s2_oracle) < 1e-6
    # frozen values from the oracle
    assert abs(k - 0.954002) < 1e-6
    assert abs(s2 - 0.008766) < 1e-6


def test_sel_monotonicity():
    nus = np.linspace(0.05, 4.0, 40)
    ks = [sel_pa_params(v)[0] for v in nus]
    assert all(a < b for a, b in zip(ks, ks[1:]))
    assert sel_pa_params(6.0)[1] < 1e-12


def test_sel_apply_moments():
    rng = np.random.default_rng(5)
    k, s2 = sel_pa_params(10 ** (4 / 20))
    s = np.ones(200_000, dtype=complex)
    out = sel_pa_apply(s, k, s2, rng)
    assert abs(np.mean(out) - k) < 0.01
    assert abs(np.var(out) - s2) / s2 < 0.05
    out0 = sel_pa_apply(s[:8], 0.5, 0.0, rng)
    assert np.abs(out0 - 0.5).max() == 0.0


def test_sel_surrogate_gain_matches_deterministic_clipper():
    # empirical Bussgang gain of the hard clipper equals the closed form
    rng = np.random.default_rng(6)
    nu = 10 ** (4 / 20)
    x = np.sqrt(0.5) * (rng.standard_normal(400_000) + 1j * rng.standard_normal(400_000))
    y = sel_clip(x, nu, 1.0)
    g = np.real(np.mean(y * np.conj(x)) / np.mean(np.abs(x) ** 2))
    assert abs(g - sel_pa_params(nu)[0]) < 5e-3


# -- DC offset -------------------------------------------------------------------

def test_dco():
    s = np.arange(4, dtype=complex)
    assert np.array_equal(dco_apply(s, 0.0), s)
    assert np.abs(dco_apply(np.zeros(4), 0.2 + 0.1j) - (0.2 + 0.1j)).max() == 0.0
    d = 0.3 - 0.2j
    assert abs(np.mean(dco_apply(s, d)) - np.mean(s) - d) < 1e-15


# -- configuration ----------------------------------------------------------------

def test_presets_match_documented_schemes():
    s1 = hwi_preset("scheme1")
    assert (abs(s1.dco), s1.dac_bits, s1.cfo) == (0.02, 5, 0.04)
    assert s1.iqi_lambda == 0.02 and abs(s1.iqi_beta - np.deg2rad(1)) < 1e-12
    assert s1.nu_clip_db == 4.0 and not s1.pn_enabled
    s2 = hwi_preset("scheme2")
    assert (abs(s2.dco), s2.iqi_lambda) == (0.04, 0.05)
    add = hwi_preset("scheme1-additive")
    assert add.cfo == 0.0 and add.dac_bits == 5
    assert hwi_preset("ideal").is_ideal()
    with pytest.raises(ValueError):
        hwi_preset("scheme9")


def test_config_validation():
    with pytest.raises(ValueError):
        HwiConfig(iqi_lambda=1.5)
    with pytest.raises(ValueError):
        HwiConfig(pn_mode="dual")
    with pytest.raises(ValueError):
        HwiConfig(dac_bits=0)
    assert HwiConfig().is_ideal()
    assert not HwiConfig(cfo=0.01).is_ideal()
