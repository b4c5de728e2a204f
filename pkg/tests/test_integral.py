import math
import os
import subprocess
import sys

import numpy as np
import pytest
from scipy import integrate

from isrs_gn import kernels
from isrs_gn._kernels_py import phasor_power as phasor_power_py
from isrs_gn.closed_form import Channel, eta_xpm_pair_cf
from isrs_gn.integral import (LinkKernel, QuadratureConfig, QuadratureError, cw_interferer_limit, distance_grid,
                              eta_full_integral, eta_spm_integral, eta_xpm_pair_integral, inner_link_integral)
from isrs_gn.raman import PowerProfile, SpectralLoad
from oracles import brute_force_spm, lossy_phasor_power

B = 40.004e9
P_TOT = 0.251
B_TOT = 10.05e12
FAST = QuadratureConfig(estimate_error=False)


def test_inner_integral_no_raman(fb):
    fb0 = fb.replace(Cr=0.0)
    load = SpectralLoad([0.0], B, 1e-3)
    assert inner_link_integral(0.0, 0.0, 0.0, fb0, load) == pytest.approx(fb.Leff_full**2, rel=1e-12)
    for f1, f2 in ((10e9, 15e9), (-18e9, 7e9), (3e9, -2e9)):
        om = -4 * math.pi**2 * f1 * f2 * (fb.beta2 + math.pi * fb.beta3 * (f1 + f2))
        ref = lossy_phasor_power(fb.alpha, om, fb.length)
        assert inner_link_integral(f1, f2, 0.0, fb0, load) == pytest.approx(ref, rel=1e-10)


def test_inner_integral_with_raman_matches_quadrature(fb, grid251):
    prof = PowerProfile.general(grid251, fb.Cr, fb.alpha)
    f_coi = -4e12
    for f1, f2 in ((f_coi + 12e9, f_coi - 5e9), (f_coi + 300e9, f_coi + 80e9)):
        u, v = f1 - f_coi, f2 - f_coi
        om = -4 * math.pi**2 * u * v * (fb.beta2 + math.pi * fb.beta3 * (2 * f_coi + u + v))
        fp = f1 + f2 - f_coi
        re = integrate.quad(lambda z: prof(fp, z) * math.cos(om * z), 0, fb.length, limit=2000, epsrel=1e-11)[0]
        im = integrate.quad(lambda z: prof(fp, z) * math.sin(om * z), 0, fb.length, limit=2000, epsrel=1e-11)[0]
        ref = re * re + im * im
        assert inner_link_integral(f1, f2, f_coi, fb, grid251) == pytest.approx(ref, rel=1e-4)
        assert inner_link_integral(f1, f2, f_coi, fb, grid251, z_nodes=1024) == pytest.approx(ref, rel=2e-6)


def test_inner_integral_peaks_at_phase_match(fb, grid251):
    f = -4e12
    h = np.linspace(-20e9, 20e9, 41)
    u, v = np.meshgrid(f + h, f + h, indexing="ij")
    # without Raman every phase-matched point reaches the center value, nothing exceeds it
    vals = inner_link_integral(u, v, f, fb.replace(Cr=0.0), grid251)
    assert vals.max() == pytest.approx(vals[20, 20], rel=1e-12)
    assert vals[20, 0] == pytest.approx(vals[20, 20], rel=1e-12)
    assert vals[5, 5] < 0.5 * vals[20, 20]
    # with Raman it stays on the phase-matched lines, moved to the lowest frequency
    vals = inner_link_integral(u, v, f, fb, grid251)
    i, j = np.unravel_index(np.argmax(vals), vals.shape)
    assert (i == 20 or j == 20) and min(i, j) == 0


def test_compiled_kernel_matches_fallback(fb, grid251):
    if kernels.BACKEND != "cython":
        pytest.skip("compiled kernel not built")
    prof = PowerProfile.general(grid251, fb.Cr, fb.alpha)
    z = distance_grid(fb, 128)
    rng = np.random.default_rng(0)
    om = rng.normal(0, 1e-3, 5000)
    om[:10] = 0.0
    fp = rng.uniform(-5e12, 5e12, 5000)
    a = kernels.phasor_power(om, fp, z, prof.x(z), prof.log_norm(z), fb.alpha)
    b = phasor_power_py(om, fp, z, prof.x(z), prof.log_norm(z), fb.alpha)
    assert a == pytest.approx(b, rel=1e-10)


def test_spm_integral_matches_brute_force(fb):
    coi = (-4e12, B, 1e-3)
    e = eta_spm_integral(coi, fb, P_TOT, B_TOT, FAST).eta
    ref = brute_force_spm(-4e12, B, fb, P_TOT, B_TOT, n_grid=201, n_z=2001)
    assert 10 * math.log10(e / ref) == pytest.approx(0.0, abs=0.01)


def test_spm_is_half_self_pair(fb):
    coi = (-4e12, B, 1e-3)
    assert eta_spm_integral(coi, fb, P_TOT, B_TOT, FAST).eta == pytest.approx(
        0.5 * eta_xpm_pair_integral(coi, coi, fb, P_TOT, B_TOT, FAST).eta, rel=1e-14)


def test_raman_raises_low_frequency_spm_integral(fb):
    coi = (-4e12, B, 1e-3)
    assert eta_spm_integral(coi, fb, P_TOT, B_TOT, FAST).eta > eta_spm_integral(
        coi, fb.replace(Cr=0.0), P_TOT, B_TOT, FAST).eta


def test_single_channel_two_routes(fb):
    """The full double integral of a lone channel and the halved self-pair integral are the same quantity."""
    fb0 = fb.replace(Cr=0.0)
    load = SpectralLoad([0.0], B, 1e-3)
    full = eta_full_integral(0.0, load, fb0, FAST).eta
    spm = eta_spm_integral((0.0, B, 1e-3), fb0, config=FAST, load=load).eta
    assert 10 * math.log10(full / spm) == pytest.approx(0.0, abs=0.05)


def test_two_channel_decomposition(fb):
    fb0 = fb.replace(Cr=0.0)
    load = SpectralLoad([0.0, 100e9], B, 1e-3)
    full = eta_full_integral(0.0, load, fb0, FAST).eta
    spm = eta_spm_integral((0.0, B, 1e-3), fb0, config=FAST, load=load).eta
    xpm = eta_xpm_pair_integral((0.0, B, 1e-3), (100e9, B, 1e-3), fb0, config=FAST, load=load).eta
    resid = full - spm - xpm
    assert resid >= -1e-6 * full
    assert 10 * math.log10(full / (spm + xpm)) < 0.05


def test_gamma_squared_scaling(fb):
    load = SpectralLoad([0.0, 100e9], B, 1e-3)
    a = eta_full_integral(0.0, load, fb, FAST).eta
    b = eta_full_integral(0.0, load, fb.replace(gamma=2 * fb.gamma), FAST).eta
    assert b == pytest.approx(4 * a, rel=1e-12)


def test_translation_symmetry(fb):
    fb0 = fb.replace(Cr=0.0, beta3=0.0)
    a = eta_full_integral(0.0, SpectralLoad([0.0, 80e9], B, 1e-3), fb0, FAST).eta
    b = eta_full_integral(1e12, SpectralLoad([1e12, 1e12 + 80e9], B, 1e-3), fb0, FAST).eta
    assert b == pytest.approx(a, rel=1e-6)


def test_pair_decays_with_separation(fb):
    coi = (-4e12, B, 1e-3)
    near = eta_xpm_pair_integral(coi, (-4e12 + 40.005e9, B, 1e-3), fb, P_TOT, B_TOT, FAST).eta
    far = eta_xpm_pair_integral(coi, (-4e12 + 200e9, B, 1e-3), fb, P_TOT, B_TOT, FAST).eta
    assert near > far


def test_pair_approaches_closed_form_far_apart(fb):
    fb0 = fb.replace(Cr=0.0)
    coi = Channel(0.0, B, 1e-3)
    inf = Channel(1e12, B, 1e-3)
    num = eta_xpm_pair_integral(tuple(coi), tuple(inf), fb0, P_TOT, B_TOT, FAST).eta
    cf = eta_xpm_pair_cf(coi, inf, fb0, P_TOT)
    assert 10 * math.log10(cf / num) == pytest.approx(0.0, abs=0.05)


def test_narrow_interferer_limit(fb):
    coi = (-1e12, B, 1e-3)
    f_k = -1e12 + 100e9
    lim = cw_interferer_limit(coi, (f_k, 0.0, 1e-3), fb, P_TOT, B_TOT)
    errs = []
    for bk in (10e9, 1e9, 0.1e9):
        v = eta_xpm_pair_integral(coi, (f_k, bk, 1e-3), fb, P_TOT, B_TOT, FAST).eta
        errs.append(abs(v / lim - 1))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 5e-3


def test_tolerance_refinement(fb, grid251):
    coi = (-4e12, B, 1e-3)
    lo = eta_spm_integral(coi, fb, config=QuadratureConfig(rel_tol=1e-4), load=grid251)
    hi = eta_spm_integral(coi, fb, config=QuadratureConfig(rel_tol=1e-8), load=grid251)
    assert abs(lo.eta - hi.eta) <= 1e-4 * hi.eta
    assert lo.error <= 1e-3 * lo.eta


def test_multi_span_link_is_incoherent_sum(fb):
    load = SpectralLoad([0.0, 100e9], B, 1e-3)
    one = eta_full_integral(0.0, load, fb, FAST).eta
    three = eta_full_integral(0.0, LinkKernel.homogeneous(fb, load, 3), config=FAST).eta
    assert three == pytest.approx(3 * one, rel=1e-12)
    with pytest.raises(ValueError):
        LinkKernel([fb], [])


def test_quadrature_errors(fb):
    with pytest.raises(ValueError):
        QuadratureConfig(rel_tol=0.5)
    with pytest.raises(ValueError):
        QuadratureConfig(z_nodes=16)
    assert QuadratureConfig(rel_tol=1e-4).order == 4
    with pytest.raises(QuadratureError):
        eta_full_integral(0.0, SpectralLoad.uniform(21, 50e9, B, 1e-3), fb, QuadratureConfig(max_subdivisions=10))
    ok = eta_spm_integral((0.0, B, 1e-3), fb, P_TOT, B_TOT, QuadratureConfig(rel_tol=1e-6, check_tolerance=True))
    assert ok.error <= 1e-6 * ok.eta
    with pytest.raises(ValueError):
        eta_spm_integral((0.0, B, 0.0), fb, P_TOT, B_TOT)


def test_pure_python_fallback_selected_by_env():
    env = {**os.environ, "ISRS_GN_PURE_PYTHON": "1"}
    out = subprocess.run([sys.executable, "-c", "from isrs_gn import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
