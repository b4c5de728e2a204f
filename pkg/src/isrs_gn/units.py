"""Unit conversions and fiber parameter containers.

Everything downstream works in strict SI (Hz, W, m, s).  Engineering units
(dB/km, ps/nm/km, dBm, 1/W/km/THz) only appear in :class:`FiberSpec`.
Frequencies are relative to the reference carrier at ``ref_wavelength_m``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

C_LIGHT = 2.99792458e8  # m/s
PLANCK = 6.62607015e-34  # J s
DB_PER_NEPER = 10.0 * math.log10(math.e)  # 4.342944819...


def to_linear_alpha(alpha_db_per_km: float) -> float:
    """Power attenuation in 1/m from dB/km, so that P(z) = P(0) exp(-alpha z)."""
    if not alpha_db_per_km > 0:
        raise ValueError(f"attenuation must be positive, got {alpha_db_per_km}")
    return alpha_db_per_km / DB_PER_NEPER / 1e3


def beta2_from_D(D_ps_nm_km: float, ref_wavelength_m: float) -> float:
    """Group velocity dispersion in s^2/m.  D > 0 maps to beta2 < 0."""
    if not ref_wavelength_m > 0:
        raise ValueError("reference wavelength must be positive")
    D = D_ps_nm_km * 1e-6  # s/m^2
    return -D * ref_wavelength_m**2 / (2 * math.pi * C_LIGHT)


def beta3_from_S(S_ps_nm2_km: float, D_ps_nm_km: float, ref_wavelength_m: float) -> float:
    """Dispersion slope in s^3/m."""
    if not ref_wavelength_m > 0:
        raise ValueError("reference wavelength must be positive")
    S = S_ps_nm2_km * 1e3  # s/m^3
    D = D_ps_nm_km * 1e-6
    lam = ref_wavelength_m
    return (lam**2 / (2 * math.pi * C_LIGHT)) ** 2 * (S + 2 * D / lam)


def db_to_linear(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def linear_to_db(x):
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("dB of a non-positive quantity")
    return 10.0 * np.log10(x)


def dbm_to_watt(p_dbm):
    out = 1e-3 * db_to_linear(p_dbm)
    return float(out) if out.ndim == 0 else out


def watt_to_dbm(p_w):
    out = linear_to_db(np.asarray(p_w, dtype=float) / 1e-3)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class FiberSpec:
    """Per-span fiber parameters in engineering units."""

    alpha_db_per_km: float = 0.2
    D_ps_nm_km: float = 17.0
    S_ps_nm2_km: float = 0.067
    gamma_per_W_km: float = 1.2
    Cr_per_W_km_THz: float = 0.028
    length_m: float = 100e3
    ref_wavelength_m: float = 1550e-9

    def __post_init__(self):
        if not self.alpha_db_per_km > 0:
            raise ValueError("alpha_db_per_km must be > 0")
        if not self.length_m > 0:
            raise ValueError("length_m must be > 0")
        if self.gamma_per_W_km < 0:
            raise ValueError("gamma_per_W_km must be >= 0")
        if self.Cr_per_W_km_THz < 0:
            raise ValueError("Cr_per_W_km_THz must be >= 0")
        if not 1.2e-6 < self.ref_wavelength_m < 1.7e-6:
            raise ValueError("ref_wavelength_m outside (1.2e-6, 1.7e-6)")

    def replace(self, **changes) -> "FiberSpec":
        from dataclasses import replace

        return replace(self, **changes)

    @property
    def ref_frequency_Hz(self) -> float:
        return C_LIGHT / self.ref_wavelength_m

    def derived(self) -> "DerivedFiberParams":
        alpha = to_linear_alpha(self.alpha_db_per_km)
        return DerivedFiberParams(
            alpha=alpha,
            beta2=beta2_from_D(self.D_ps_nm_km, self.ref_wavelength_m),
            beta3=beta3_from_S(self.S_ps_nm2_km, self.D_ps_nm_km, self.ref_wavelength_m),
            gamma=self.gamma_per_W_km * 1e-3,
            Cr=self.Cr_per_W_km_THz * 1e-3 * 1e-12,
            length=self.length_m,
            Leff_full=-math.expm1(-alpha * self.length_m) / alpha,
        )


@dataclass(frozen=True)
class DerivedFiberParams:
    """SI parameters consumed by the engines."""

    alpha: float  # 1/m, power
    beta2: float  # s^2/m
    beta3: float  # s^3/m
    gamma: float  # 1/(W m)
    Cr: float  # 1/(W m Hz)
    length: float  # m
    Leff_full: float  # m

    def replace(self, **changes) -> "DerivedFiberParams":
        from dataclasses import replace

        return replace(self, **changes)


def table1_fiber(**overrides) -> FiberSpec:
    """Standard single-mode fiber span used throughout the validation studies."""
    return FiberSpec(**overrides)
