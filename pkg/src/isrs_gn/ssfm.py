"""Desk-scale split-step Fourier solver for the dual-polarization Manakov equation.

Convention: the simulated envelope multiplies ``exp(+j 2 pi f0 t)``, so FFT
bin ``f`` is the physical offset from the reference carrier and a component
accumulates phase ``-(beta2 w^2 / 2 + beta3 w^3 / 6) z`` (``w = 2 pi f``).  The
Kerr phase is ``-(8/9) gamma (|X|^2 + |Y|^2) dz`` in the same convention.

The transmitter builds each channel directly in the frequency domain: the
DFT of ``n_symbols`` symbols, periodically extended and shaped by a
root-raised-cosine response, placed on bins around the channel carrier.  The
receiver reverses this (bin folding modulo ``n_symbols`` is matched filtering
plus symbol-rate sampling).
"""
from __future__ import annotations

import dataclasses
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Sequence

import numpy as np
from scipy import fft as sfft

from .raman import PowerProfile, SpectralLoad
from .units import DerivedFiberParams, FiberSpec

MANAKOV = 8.0 / 9.0


class BudgetError(ValueError):
    """Requested run exceeds the configured compute budget."""


def _is_pow2(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


@dataclass(frozen=True)
class SsfmConfig:
    n_channels: int = 5
    symbol_rate_Hz: float = 10e9
    channel_spacing_Hz: float = 10.5e9
    rrc_rolloff: float = 1e-4
    n_symbols: int = 2**12
    samples_per_symbol: int = 16
    n_steps_per_span: int = 1000
    step_distribution: Literal["logarithmic", "uniform"] = "logarithmic"
    rng_seed: int = 0
    modulation: Literal["gaussian", "qam64"] = "gaussian"
    n_realizations: int = 4
    dual_polarization: bool = True
    gff: bool = True
    isrs: bool = True
    max_band_Hz: float = 1e12
    max_symbols: int = 2**14
    min_steps: int = 1000
    nyquist_guard: float = 0.2
    threads: int = 1
    keep_constellations: bool = False

    def __post_init__(self):
        if self.n_channels < 1:
            raise ValueError("n_channels must be >= 1")
        if not _is_pow2(self.n_symbols) or not _is_pow2(self.n_symbols * self.samples_per_symbol):
            raise ValueError("n_symbols and n_symbols*samples_per_symbol must be powers of two")
        if not 0 <= self.rrc_rolloff <= 1:
            raise ValueError("rrc_rolloff must lie in [0, 1]")
        if self.n_steps_per_span < self.min_steps:
            raise ValueError(f"n_steps_per_span must be >= {self.min_steps}")
        if self.step_distribution not in ("logarithmic", "uniform"):
            raise ValueError(f"unknown step_distribution {self.step_distribution!r}")
        if self.modulation not in ("gaussian", "qam64"):
            raise ValueError(f"unknown modulation {self.modulation!r}")
        if self.n_realizations < 1:
            raise ValueError("n_realizations must be >= 1")
        if self.channel_spacing_Hz < self.symbol_rate_Hz * (1 + self.rrc_rolloff):
            raise ValueError("channels overlap")
        if self.band_Hz > self.max_band_Hz or self.n_symbols > self.max_symbols:
            raise BudgetError(f"desk-scale cap exceeded: band {self.band_Hz:.3g} Hz "
                              f"(cap {self.max_band_Hz:.3g}), {self.n_symbols} symbols (cap {self.max_symbols})")
        if self.sample_rate_Hz < (1 + self.nyquist_guard) * self.band_Hz:
            raise ValueError("simulated band violates the sampling Nyquist limit with guard; "
                             "raise samples_per_symbol")

    @property
    def band_Hz(self) -> float:
        return (self.n_channels - 1) * self.channel_spacing_Hz + self.symbol_rate_Hz * (1 + self.rrc_rolloff)

    @property
    def sample_rate_Hz(self) -> float:
        return self.symbol_rate_Hz * self.samples_per_symbol

    @property
    def n_samples(self) -> int:
        return self.n_symbols * self.samples_per_symbol

    @property
    def bin_Hz(self) -> float:
        return self.symbol_rate_Hz / self.n_symbols

    def channel_bins(self) -> np.ndarray:
        """Carrier bins of the channels, centered on the reference carrier."""
        offs = (np.arange(self.n_channels) - (self.n_channels - 1) / 2) * self.channel_spacing_Hz
        return np.round(offs / self.bin_Hz).astype(int)

    def channel_freqs(self) -> np.ndarray:
        return self.channel_bins() * self.bin_Hz

    def spectral_load(self, powers) -> SpectralLoad:
        """Rectangular-channel description of the simulated launch spectrum."""
        return SpectralLoad(self.channel_freqs(), self.symbol_rate_Hz * (1 + self.rrc_rolloff), powers)

    def replace(self, **kw) -> "SsfmConfig":
        return dataclasses.replace(self, **kw)


@dataclass
class SimResult:
    freqs: np.ndarray
    powers: np.ndarray
    snr: np.ndarray
    eta: np.ndarray
    eta_per_realization: np.ndarray
    rx_power: np.ndarray
    step_sizes: np.ndarray
    tx_symbols: np.ndarray | None = None
    rx_symbols: np.ndarray | None = None

    @property
    def snr_db(self) -> np.ndarray:
        return 10 * np.log10(self.snr)

    @property
    def eta_db(self) -> np.ndarray:
        return 10 * np.log10(self.eta)

    def write_constellations(self, path) -> None:
        """Little-endian complex64, per channel, X/Y interleaved per symbol.

        Header: magic ``b"ISRSCST1"``, then uint32 n_channels, n_symbols.
        """
        if self.rx_symbols is None:
            raise ValueError("constellations were not kept; set keep_constellations")
        arr = np.ascontiguousarray(self.rx_symbols, dtype="<c8")  # (n_ch, n_sym, 2)
        with open(path, "wb") as fh:
            fh.write(b"ISRSCST1")
            fh.write(struct.pack("<II", arr.shape[0], arr.shape[1]))
            fh.write(arr.tobytes())

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("channel,f_rel_Hz,power_dbm,snr_db,eta_db_1_per_W2,rx_power_dbm\n")
            for k in range(self.freqs.size):
                fh.write(f"{k},{self.freqs[k]:.6f},{10 * math.log10(self.powers[k] * 1e3):.6f},"
                         f"{self.snr_db[k]:.6f},{self.eta_db[k]:.6f},{10 * math.log10(self.rx_power[k] * 1e3):.6f}\n")


def read_constellations(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:8] != b"ISRSCST1":
        raise ValueError("not a constellation dump")
    n_ch, n_sym = struct.unpack("<II", raw[8:16])
    return np.frombuffer(raw[16:], dtype="<c8").reshape(n_ch, n_sym, 2)


def step_boundaries(length: float, n_steps: int, alpha: float, distribution: str = "logarithmic") -> np.ndarray:
    """Step edges along a span; logarithmic steps keep the loss-weighted length per step constant."""
    if distribution == "uniform" or alpha == 0:
        return np.linspace(0.0, length, n_steps + 1)
    le = np.linspace(0.0, -math.expm1(-alpha * length) / alpha, n_steps + 1)
    z = -np.log1p(-alpha * le) / alpha
    z[0], z[-1] = 0.0, length
    return z


def rrc_response(f, symbol_rate: float, rolloff: float) -> np.ndarray:
    """Root-raised-cosine amplitude response, unit in the passband."""
    f = np.abs(np.asarray(f, dtype=float)) / symbol_rate
    lo, hi = (1 - rolloff) / 2, (1 + rolloff) / 2
    out = np.where(f <= lo, 1.0, 0.0)
    if rolloff > 0:
        mid = (f > lo) & (f <= hi)
        out = np.where(mid, np.sqrt(0.5 * (1 + np.cos(math.pi / rolloff * (f - lo)))), out)
    return out


def isrs_linear_step(spectrum: np.ndarray, freqs: np.ndarray, z: float, dz: float,
                     profile: PowerProfile | None, alpha: float) -> np.ndarray:
    """Apply the field transfer ``sqrt(rho(z + dz, f) / rho(z, f))`` in place and return it."""
    if dz <= 0:
        raise ValueError("dz must be positive")
    if profile is None or profile.Cr == 0 or profile.P_tot == 0:
        spectrum *= math.exp(-0.5 * alpha * dz)
        return spectrum
    x0, x1 = profile.x(z), profile.x(z + dz)
    ln0, ln1 = profile.log_norm(z), profile.log_norm(z + dz)
    g = np.exp(0.5 * (-alpha * dz + (ln1 - ln0) - (x1 - x0) * freqs))
    spectrum *= g
    return spectrum


def dispersion_phase(freqs: np.ndarray, fb: DerivedFiberParams, dz: float) -> np.ndarray:
    w = 2 * math.pi * freqs
    return -(fb.beta2 * w**2 / 2 + fb.beta3 * w**3 / 6) * dz


class _Grid:
    def __init__(self, cfg: SsfmConfig):
        self.cfg = cfg
        n = cfg.n_samples
        self.freqs = sfft.fftfreq(n, d=1.0 / cfg.sample_rate_Hz)
        ns = cfg.n_symbols
        m_max = int(math.ceil(ns * (1 + cfg.rrc_rolloff) / 2))
        m = np.arange(-m_max, m_max + 1)
        h = rrc_response(m * cfg.bin_Hz, cfg.symbol_rate_Hz, cfg.rrc_rolloff)
        keep = h > 0
        self.m = m[keep]
        self.h = h[keep]
        self.sym_idx = np.mod(self.m, ns)
        self.bins = [np.mod(c + self.m, n) for c in cfg.channel_bins()]


def _symbols(rng: np.random.Generator, shape, modulation: str) -> np.ndarray:
    if modulation == "gaussian":
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2)
    lv = np.arange(-7, 8, 2, dtype=float)
    pts = (lv[:, None] + 1j * lv[None, :]).ravel()
    pts /= math.sqrt(np.mean(np.abs(pts) ** 2))
    return pts[rng.integers(0, pts.size, size=shape)]


def transmit(grid: _Grid, symbols: np.ndarray, powers: np.ndarray, predispersion=None,
             fiber: DerivedFiberParams | None = None) -> np.ndarray:
    """Spectrum (n_pol, n_samples) for unit-power ``symbols`` of shape (n_ch, n_pol, n_symbols)."""
    cfg = grid.cfg
    n_pol = symbols.shape[1]
    spec = np.zeros((n_pol, cfg.n_samples), dtype=complex)
    sym_f = sfft.fft(symbols, axis=-1)
    for k, bins in enumerate(grid.bins):
        amp = math.sqrt(powers[k] / n_pol) * cfg.samples_per_symbol
        s = sym_f[k][:, grid.sym_idx] * grid.h * amp
        if predispersion is not None and predispersion[k] != 0:
            s = s * np.exp(1j * dispersion_phase(grid.freqs[bins], fiber, predispersion[k]))
        spec[:, bins] += s
    return spec


def receive(grid: _Grid, spectrum: np.ndarray, tx_symbols: np.ndarray, total_dispersion: Sequence[tuple]):
    """CDC, matched filtering, symbol sampling and LS scale per channel.

    ``total_dispersion`` lists ``(fiber, length)`` pairs traversed (including predispersion is
    the caller's responsibility).  Returns (snr, rx_symbols, rx_power).
    """
    cfg = grid.cfg
    phase = np.zeros(cfg.n_samples)
    for fb, length in total_dispersion:
        phase += dispersion_phase(grid.freqs, fb, length)
    spec = spectrum * np.exp(-1j * phase)
    n_ch = len(grid.bins)
    n_pol = spectrum.shape[0]
    snr = np.empty(n_ch)
    rxp = np.empty(n_ch)
    rx = np.empty((n_ch, n_pol, cfg.n_symbols), dtype=complex)
    for k, bins in enumerate(grid.bins):
        sel = spec[:, bins]
        rxp[k] = float(np.sum(np.abs(sel) ** 2)) / cfg.n_samples**2
        folded = np.zeros((n_pol, cfg.n_symbols), dtype=complex)
        for p in range(n_pol):
            folded[p] = np.bincount(grid.sym_idx, weights=(sel[p] * grid.h).real, minlength=cfg.n_symbols) \
                + 1j * np.bincount(grid.sym_idx, weights=(sel[p] * grid.h).imag, minlength=cfg.n_symbols)
        y = sfft.ifft(folded, axis=-1) / cfg.samples_per_symbol
        x = tx_symbols[k]
        # one complex scale for both polarizations
        h = np.vdot(y, x) / np.vdot(y, y)
        y = y * h
        rx[k] = y
        snr[k] = float(np.mean(np.abs(x) ** 2) / np.mean(np.abs(x - y) ** 2))
    return snr, rx, rxp


def _span(spec: np.ndarray, grid: _Grid, fb: DerivedFiberParams, cfg: SsfmConfig, profile: PowerProfile | None,
          workers: int) -> np.ndarray:
    gamma = MANAKOV * fb.gamma
    z = step_boundaries(fb.length, cfg.n_steps_per_span, fb.alpha, cfg.step_distribution)
    f = grid.freqs

    def linear(s, z0, dz):
        s *= np.exp(1j * dispersion_phase(f, fb, dz))
        return isrs_linear_step(s, f, z0, dz, profile, fb.alpha)

    if gamma == 0:
        return linear(spec, 0.0, fb.length)
    spec = linear(spec, 0.0, 0.5 * (z[1] - z[0]))
    for i in range(len(z) - 1):
        dz = z[i + 1] - z[i]
        t = sfft.ifft(spec, axis=-1, workers=workers)
        pw = np.sum(np.abs(t) ** 2, axis=0)
        t *= np.exp(-1j * gamma * dz * pw)
        spec = sfft.fft(t, axis=-1, workers=workers)
        zm = z[i] + 0.5 * dz
        if i + 1 < len(z) - 1:
            dz_next = z[i + 2] - z[i + 1]
            spec = linear(spec, zm, 0.5 * (dz + dz_next))
        else:
            spec = linear(spec, zm, fb.length - zm)
    return spec


def simulate(config: SsfmConfig, fibers: Sequence[FiberSpec | DerivedFiberParams], powers,
             noise_snr_db: float | None = None, predispersion_m=None) -> SimResult:
    """Propagate ``n_realizations`` independent data sets and estimate per-channel SNR and eta.

    ``powers`` are per-channel launch powers in W (scalar broadcasts).
    ``noise_snr_db`` adds white Gaussian noise at the receiver for calibration.
    """
    cfg = config
    fbs = [f.derived() if isinstance(f, FiberSpec) else f for f in fibers]
    powers = np.broadcast_to(np.asarray(powers, dtype=float), (cfg.n_channels,)).copy()
    if np.any(powers <= 0):
        raise ValueError("channel powers must be positive")
    grid = _Grid(cfg)
    load = cfg.spectral_load(powers)
    n_pol = 2 if cfg.dual_polarization else 1
    rng = np.random.default_rng(cfg.rng_seed)
    snr_all = np.empty((cfg.n_realizations, cfg.n_channels))
    rxp_all = np.empty_like(snr_all)
    predisp = None if predispersion_m is None else np.broadcast_to(predispersion_m, (cfg.n_channels,))
    steps = []
    tx_keep = rx_keep = None
    for r in range(cfg.n_realizations):
        sym = _symbols(rng, (cfg.n_channels, n_pol, cfg.n_symbols), cfg.modulation)
        spec = transmit(grid, sym, powers, predisp, fbs[0] if fbs else None)
        for fb in fbs:
            prof = PowerProfile.general(load, fb.Cr, fb.alpha) if cfg.isrs and fb.Cr > 0 else None
            spec = _span(spec, grid, fb, cfg, prof, cfg.threads)
            if r == 0:
                steps.append(np.diff(step_boundaries(fb.length, cfg.n_steps_per_span, fb.alpha,
                                                     cfg.step_distribution)))
            if cfg.gff:
                spec = _amplify(spec, grid, fb, prof)
        if noise_snr_db is not None:
            spec = spec + _awgn(rng, grid, powers, noise_snr_db, n_pol)
        disp = [(fb, fb.length) for fb in fbs]
        if predisp is not None:
            # channels carry their own predispersion; compensate it per channel
            spec = _undo_predispersion(spec, grid, fbs[0], predisp)
        snr, rx, rxp = receive(grid, spec, sym, disp)
        snr_all[r] = snr
        rxp_all[r] = rxp
        if cfg.keep_constellations and r == 0:
            tx_keep = np.moveaxis(sym, 1, 2)
            rx_keep = np.moveaxis(rx, 1, 2)
    eta_r = 1.0 / (snr_all * powers**2)
    snr_mean = 1.0 / np.mean(1.0 / snr_all, axis=0)
    return SimResult(cfg.channel_freqs(), powers, snr_mean, np.mean(eta_r, axis=0), eta_r,
                     np.mean(rxp_all, axis=0), np.concatenate(steps) if steps else np.empty(0),
                     tx_keep, rx_keep)


def _amplify(spec, grid: _Grid, fb: DerivedFiberParams, prof: PowerProfile | None):
    """Noiseless gain-flattened amplifier: undo span loss and the analytic ISRS tilt."""
    if prof is None:
        return spec * math.exp(0.5 * fb.alpha * fb.length)
    g = np.exp(-0.5 * (-fb.alpha * fb.length + prof.log_norm(fb.length) - prof.x(fb.length) * grid.freqs))
    return spec * g


def _awgn(rng, grid: _Grid, powers, snr_db, n_pol):
    cfg = grid.cfg
    # per-pol in-band noise variance after the receiver is sigma^2 / samples_per_symbol
    p_ref = float(np.mean(powers))
    sigma2 = p_ref / n_pol * cfg.samples_per_symbol / 10 ** (snr_db / 10)
    noise = (rng.standard_normal((n_pol, cfg.n_samples)) + 1j * rng.standard_normal((n_pol, cfg.n_samples)))
    noise *= math.sqrt(sigma2 / 2)
    return sfft.fft(noise, axis=-1)


def _undo_predispersion(spec, grid: _Grid, fb: DerivedFiberParams, predisp):
    spec = spec.copy()
    for k, bins in enumerate(grid.bins):
        if predisp[k] != 0:
            spec[:, bins] *= np.exp(-1j * dispersion_phase(grid.freqs[bins], fb, predisp[k]))
    return spec


__all__ = [
    "BudgetError",
    "SimResult",
    "SsfmConfig",
    "dispersion_phase",
    "isrs_linear_step",
    "read_constellations",
    "receive",
    "rrc_response",
    "simulate",
    "step_boundaries",
    "transmit",
]
