import math

import numpy as np
import pytest
from scipy import integrate

from isrs_gn.raman import (PowerProfile, SpectralLoad, channel_gains_db, delta_rho_db, effective_length,
                           first_order_profile, profile_general, profile_uniform, taylor_T, validity_check)
from isrs_gn.units import dbm_to_watt

P_TOT = 251 * 1e-3
B_TOT = 10.05e12


def test_effective_length(fb):
    assert effective_length(fb.alpha, 0.0) == 0.0
    assert effective_length(fb.alpha, 1e9) == pytest.approx(1 / fb.alpha)
    assert effective_length(fb.alpha, 100e3) == pytest.approx(0.99 / fb.alpha, rel=1e-12)


def test_power_transfer_values(fb):
    d0 = delta_rho_db(P_TOT, fb.Cr, fb.Leff_full, B_TOT)
    d2 = delta_rho_db(251 * dbm_to_watt(2), fb.Cr, fb.Leff_full, B_TOT)
    assert d0 == pytest.approx(6.3, abs=0.3)
    assert d2 == pytest.approx(10.3, abs=0.4)
    assert delta_rho_db(P_TOT, 0.0, fb.Leff_full, B_TOT) == 0.0


def test_uniform_profile_limits(fb):
    assert profile_uniform(1e12, 0.0, P_TOT, B_TOT, fb.Cr, fb.alpha) == pytest.approx(1.0)
    z = 60e3
    f = np.linspace(-5e12, 5e12, 7)
    assert profile_uniform(f, z, P_TOT, B_TOT, 0.0, fb.alpha) == pytest.approx(np.exp(-fb.alpha * z), rel=1e-14)


def test_uniform_profile_edge_value(fb):
    """Edge gain from the exact normalization ``y e^{y} / sinh y``; half the transfer is only first-order."""
    z = fb.length
    x = P_TOT * fb.Cr * fb.Leff_full
    y = x * B_TOT / 2
    exact = math.exp(-fb.alpha * z) * y * math.exp(y) / math.sinh(y)
    assert profile_uniform(-B_TOT / 2, z, P_TOT, B_TOT, fb.Cr, fb.alpha) == pytest.approx(exact, rel=1e-12)
    # the lowest frequency gains, the highest loses
    assert exact > math.exp(-fb.alpha * z) > profile_uniform(B_TOT / 2, z, P_TOT, B_TOT, fb.Cr, fb.alpha)


def test_power_conservation(fb):
    prof = PowerProfile.uniform(P_TOT, B_TOT, fb.Cr, fb.alpha)
    for z in (1e3, 30e3, 100e3):
        got = integrate.quad(lambda f: prof(f, z), -B_TOT / 2, B_TOT / 2, epsrel=1e-12)[0] / B_TOT
        assert got == pytest.approx(math.exp(-fb.alpha * z), rel=1e-10)


def test_general_profile(fb, grid251):
    # a lone channel only sees its own in-band tilt, a second-order effect
    assert profile_general(0.0, 50e3, SpectralLoad([0.0], 40e9, 1e-3), fb.Cr, fb.alpha) == pytest.approx(
        math.exp(-fb.alpha * 50e3), rel=1e-9)
    f = np.linspace(-5e12, 5e12, 11)
    # the uniform load is gap-free to within 1 MHz per channel
    gu = profile_uniform(f, 100e3, grid251.total_power, grid251.total_bandwidth, fb.Cr, fb.alpha)
    gg = profile_general(f, 100e3, grid251, fb.Cr, fb.alpha)
    assert gg == pytest.approx(gu, rel=1e-5)


def test_two_channel_antisymmetry(fb):
    load = SpectralLoad([-2e12, 2e12], 40e9, 0.1)
    g = channel_gains_db(load, fb.Cr, fb.alpha, 100e3)
    assert g[0] > 0 > g[1]
    # denominator by direct quadrature of the launch spectrum
    x = load.total_power * fb.Cr * fb.Leff_full
    den = sum(integrate.quad(lambda f: np.exp(-x * f) / 40e9 * 0.5, fc - 20e9, fc + 20e9)[0] for fc in (-2e12, 2e12))
    g_low = 10 * math.log10(math.exp(-x * -2e12) / den)
    assert g[0] == pytest.approx(g_low, abs=1e-9)
    # transfer is antisymmetric in the exponent; the common normalization shifts both gains equally
    t = x * 2e12
    assert g[0] - g[1] == pytest.approx(20 * t / math.log(10), rel=1e-9)
    assert g[0] + g[1] == pytest.approx(-20 * math.log10(math.cosh(t) * math.sinh(x * 20e9) / (x * 20e9)),
                                        abs=1e-9)


def test_taylor_T(fb):
    assert taylor_T(3e12, P_TOT, 0.0, fb.alpha) == 2
    assert taylor_T(0.0, P_TOT, fb.Cr, fb.alpha) == 2
    f = 5.025e12
    assert taylor_T(f, P_TOT, fb.Cr, fb.alpha) == pytest.approx(2 - P_TOT * fb.Cr * f / fb.alpha)
    # first-order profile matches the exact one to O(x^2)
    z = 100e3
    prof = PowerProfile.uniform(1e-3, B_TOT, fb.Cr, fb.alpha)
    exact = prof(f, z)
    approx = first_order_profile(f, z, 1e-3, fb.Cr, fb.alpha)
    assert approx == pytest.approx(exact, rel=1e-3)


def test_validity_check():
    ok = validity_check(6.3)
    assert not ok.warn and ok.validity_ratio == pytest.approx(0.244, abs=1e-3)
    assert validity_check(13.0).warn
    assert validity_check(0.0).validity_ratio == 0.0 and not validity_check(0.0).warn
    with pytest.raises(ValueError):
        validity_check(1.0, threshold=0.0)


def test_spectral_load_validation():
    with pytest.raises(ValueError):
        SpectralLoad([], 1.0, 1.0)
    with pytest.raises(ValueError):
        SpectralLoad([0.0, 10e9], 40e9, 1.0)
    with pytest.raises(ValueError):
        SpectralLoad([0.0], 40e9, -1.0)
    ld = SpectralLoad([1e9, -1e11], 1e9, [1.0, 2.0])
    assert ld.freqs[0] == -1e11 and ld.powers[0] == 2.0
