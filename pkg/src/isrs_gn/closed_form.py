"""Closed-form NLI coefficients with ISRS.

SPM and XPM are evaluated per channel of interest (COI) against the span's
launch spectrum.  XPM is summed over every other occupied channel and adds up
incoherently over spans; SPM accumulates as ``n**(1 + eps)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, NamedTuple

import numpy as np

from .raman import SpectralLoad, taylor_T
from .units import DerivedFiberParams, FiberSpec


class Channel(NamedTuple):
    freq: float  # Hz, relative to the reference carrier
    bandwidth: float  # Hz
    power: float  # W


@dataclass(frozen=True)
class ClosedFormConfig:
    epsilon_mode: Literal["fixed", "auto", "incoherent"] = "auto"
    epsilon_value: float = 0.0
    phi_singularity_eps: float = 1e-6
    modulation_correction: float = 1.0

    def __post_init__(self):
        if self.epsilon_mode not in ("fixed", "auto", "incoherent"):
            raise ValueError(f"unknown epsilon_mode {self.epsilon_mode!r}")
        if self.epsilon_value < 0:
            raise ValueError("epsilon_value must be >= 0")
        if not self.phi_singularity_eps > 0:
            raise ValueError("phi_singularity_eps must be > 0")
        if not self.modulation_correction > 0:
            raise ValueError("modulation_correction must be > 0")


@dataclass
class EtaBreakdown:
    """Per-COI NLI coefficients (1/W^2).  ``eta_spm``/``eta_xpm`` are single-span."""

    eta_spm: float
    eta_xpm: float
    eta_xpm_per_interferer: dict[int, float] = field(default_factory=dict)
    n_spans: int = 1
    epsilon: float = 0.0

    @property
    def eta_total(self) -> float:
        return eta_total(self.eta_spm, self.eta_xpm, self.n_spans, self.epsilon)


def _fiber(fiber) -> DerivedFiberParams:
    return fiber.derived() if isinstance(fiber, FiberSpec) else fiber


def _asinhc(u, eps):
    """asinh(u)/u, series below ``eps``."""
    u = np.asarray(u, dtype=float)
    small = np.abs(u) < eps
    safe = np.where(small, 1.0, u)
    return np.where(small, 1.0 - u * u / 6.0, np.arcsinh(safe) / safe)


def _atanc(u, eps):
    u = np.asarray(u, dtype=float)
    small = np.abs(u) < eps
    safe = np.where(small, 1.0, u)
    return np.where(small, 1.0 - u * u / 3.0, np.arctan(safe) / safe)


def spm_phase(f_i, fiber: DerivedFiberParams):
    return 12 * math.pi**2 * (fiber.beta2 + 2 * math.pi * fiber.beta3 * np.asarray(f_i, dtype=float))


def xpm_phase(f_i, f_k, fiber: DerivedFiberParams):
    f_i = np.asarray(f_i, dtype=float)
    f_k = np.asarray(f_k, dtype=float)
    return 2 * math.pi**2 * (f_k - f_i) * (fiber.beta2 + math.pi * fiber.beta3 * (f_i + f_k))


def eta_spm_cf(f_i, B_i, fiber, P_tot: float, phi_eps: float = 1e-6):
    """SPM coefficient of a channel at ``f_i`` with bandwidth ``B_i`` (vectorized).

    ``phi_eps`` bounds the dimensionless asinh argument below which the
    zero-dispersion series limit is used.
    """
    fb = _fiber(fiber)
    B_i = np.asarray(B_i, dtype=float)
    if np.any(B_i <= 0):
        raise ValueError("channel bandwidth must be positive")
    a = fb.alpha
    phi = spm_phase(f_i, fb)
    T = taylor_T(f_i, P_tot, fb.Cr, a)
    scale = B_i**2 / (16 * a)
    # pi (T^2 - 4/9) / (a phi) * asinh(scale phi) == pi (T^2 - 4/9) scale / a * asinhc
    bracket = math.pi * (T**2 - 4 / 9) / a * scale * _asinhc(scale * phi, phi_eps) + B_i**2 / (9 * a**2)
    out = 16 / 27 * fb.gamma**2 / B_i**2 * bracket
    return float(out) if out.ndim == 0 else out


def eta_xpm_pair_cf(coi: Channel, interferer: Channel, fiber, P_tot: float, phi_eps: float = 1e-6):
    """XPM coefficient induced on ``coi`` by a single ``interferer``."""
    return float(_xpm_pair(coi.freq, coi.bandwidth, coi.power, interferer.freq,
                           interferer.bandwidth, interferer.power, _fiber(fiber), P_tot, phi_eps))


def _xpm_pair(f_i, B_i, P_i, f_k, B_k, P_k, fb: DerivedFiberParams, P_tot, phi_eps):
    P_i = np.asarray(P_i, dtype=float)
    if np.any(P_i <= 0):
        raise ValueError("channel of interest must carry power")
    a = fb.alpha
    phi = xpm_phase(f_i, f_k, fb)
    T = taylor_T(f_k, P_tot, fb.Cr, a)
    # atan(B phi / c) / phi == (B / c) atanc(B phi / c)
    s1 = B_i / a
    s2 = B_i / (2 * a)
    bracket = (T**2 - 1) / 3 * s1 * _atanc(s1 * phi, phi_eps) + (4 - T**2) / 6 * s2 * _atanc(s2 * phi, phi_eps)
    return 32 / 27 * fb.gamma**2 / a * (P_k / P_i) ** 2 / B_k * bracket


def xpm_matrix(load: SpectralLoad, fiber, P_tot: float | None = None, config: ClosedFormConfig | None = None,
               coi_idx=None) -> np.ndarray:
    """``M[r, k]``: XPM on COI ``coi_idx[r]`` from channel ``k`` (zero on the diagonal and for dark channels)."""
    cfg = config or ClosedFormConfig()
    fb = _fiber(fiber)
    P_tot = load.total_power if P_tot is None else P_tot
    idx = np.arange(len(load)) if coi_idx is None else np.atleast_1d(np.asarray(coi_idx))
    f, B, P = load.freqs, load.bandwidths, load.powers
    fi, Bi, Pi = f[idx, None], B[idx, None], P[idx, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        M = _xpm_pair(fi, Bi, np.where(Pi > 0, Pi, 1.0), f[None, :], B[None, :], P[None, :], fb, P_tot,
                      cfg.phi_singularity_eps)
    M = np.where(P[None, :] > 0, M, 0.0)
    M[np.arange(idx.size), idx] = 0.0
    return M * cfg.modulation_correction


def eta_xpm_total_cf(coi_index: int, load: SpectralLoad, fiber, P_tot: float | None = None,
                     config: ClosedFormConfig | None = None) -> tuple[float, dict[int, float]]:
    """Total XPM on one COI and its per-interferer breakdown."""
    if not 0 <= coi_index < len(load):
        raise IndexError(coi_index)
    if load.powers[coi_index] <= 0:
        raise ValueError("channel of interest must carry power")
    row = xpm_matrix(load, fiber, P_tot, config, [coi_index])[0]
    per = {int(k): float(row[k]) for k in np.flatnonzero(row)}
    return float(row.sum()), per


def coherence_epsilon(B_i, fiber, f_i=0.0):
    """Coherence factor of SPM accumulation over spans, defined on the channel bandwidth.

    ``eps = 3/10 ln(1 + 6/(alpha L) / asinh(pi^2/2 |beta2_eff| B_i^2 / alpha))``
    with ``beta2_eff = beta2 + 2 pi beta3 f_i``.  ISRS is assumed not to alter it.
    """
    fb = _fiber(fiber)
    B_i = np.asarray(B_i, dtype=float)
    if np.any(B_i <= 0):
        raise ValueError("channel bandwidth must be positive")
    a = fb.alpha
    b2 = np.abs(fb.beta2 + 2 * math.pi * fb.beta3 * np.asarray(f_i, dtype=float))
    out = 0.3 * np.log1p(6 / (a * fb.length) / np.arcsinh(math.pi**2 / 2 * b2 / a * B_i**2))
    return float(out) if out.ndim == 0 else out


def resolve_epsilon(config: ClosedFormConfig, B_i, fiber, f_i=0.0):
    if config.epsilon_mode == "incoherent":
        return 0.0 * np.asarray(B_i, dtype=float)
    if config.epsilon_mode == "fixed":
        return config.epsilon_value + 0.0 * np.asarray(B_i, dtype=float)
    return coherence_epsilon(B_i, fiber, f_i)


def eta_total(eta_spm, eta_xpm, n_spans: int, epsilon=0.0):
    """Multi-span coefficient: ``eta_spm n^(1+eps) + eta_xpm n``."""
    if n_spans < 1:
        raise ValueError("n_spans must be >= 1")
    if np.any(np.asarray(epsilon) < 0):
        raise ValueError("epsilon must be >= 0")
    return np.asarray(eta_spm) * n_spans ** (1 + np.asarray(epsilon)) + np.asarray(eta_xpm) * n_spans


def snr(P_i, P_ase, eta):
    """``P / (P_ase + eta P^3)``; +inf when both noise terms vanish."""
    P_i = np.asarray(P_i, dtype=float)
    den = np.asarray(P_ase, dtype=float) + np.asarray(eta, dtype=float) * P_i**3
    with np.errstate(divide="ignore"):
        out = np.where(den > 0, P_i / np.where(den > 0, den, 1.0), np.inf)
    return float(out) if out.ndim == 0 else out


@dataclass
class SpectrumResult:
    """Closed-form coefficients for every COI of one span load."""

    coi_idx: np.ndarray
    freqs: np.ndarray
    eta_spm: np.ndarray  # single span
    eta_xpm: np.ndarray  # single span
    xpm: np.ndarray  # per-interferer matrix, rows follow coi_idx
    epsilon: np.ndarray
    n_spans: int

    @property
    def eta_total(self) -> np.ndarray:
        return eta_total(self.eta_spm, self.eta_xpm, self.n_spans, self.epsilon)

    def breakdown(self, row: int) -> EtaBreakdown:
        per = {int(k): float(self.xpm[row, k]) for k in np.flatnonzero(self.xpm[row])}
        return EtaBreakdown(float(self.eta_spm[row]), float(self.eta_xpm[row]), per, self.n_spans,
                            float(self.epsilon[row]))


def closed_form_spectrum(load: SpectralLoad, fiber, n_spans: int = 1, config: ClosedFormConfig | None = None,
                         coi_idx=None, P_tot: float | None = None) -> SpectrumResult:
    """Evaluate SPM and XPM for the selected (default: all lit) channels of a homogeneous link."""
    cfg = config or ClosedFormConfig()
    fb = _fiber(fiber)
    P_tot = load.total_power if P_tot is None else P_tot
    if coi_idx is None:
        coi_idx = np.flatnonzero(load.powers > 0)
    coi_idx = np.atleast_1d(np.asarray(coi_idx, dtype=int))
    if np.any(load.powers[coi_idx] <= 0):
        raise ValueError("channels of interest must carry power")
    f = load.freqs[coi_idx]
    B = load.bandwidths[coi_idx]
    spm = np.atleast_1d(eta_spm_cf(f, B, fb, P_tot, cfg.phi_singularity_eps))
    M = xpm_matrix(load, fb, P_tot, cfg, coi_idx)
    eps = np.atleast_1d(resolve_epsilon(cfg, B, fb, f * 0.0))
    return SpectrumResult(coi_idx, f, spm, M.sum(axis=1), M, eps, n_spans)
