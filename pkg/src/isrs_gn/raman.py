"""Signal power profile under inter-channel stimulated Raman scattering.

The Raman gain is modelled by its linear regression slope ``Cr``.  Under that
model the normalized power of a component at frequency ``f`` after distance
``z`` is::

    rho(z, f) = exp(-alpha z) * norm(z) * exp(-x(z) f),   x(z) = P_tot Cr L_eff(z)

where ``norm`` enforces power conservation over the launched spectrum.  All
engines share this factorization.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .units import DB_PER_NEPER

VALIDITY_LIMIT_DB = 25.8
_SERIES_EPS = 1e-8


def effective_length(alpha: float, z):
    """``(1 - exp(-alpha z)) / alpha``; accepts scalars or arrays."""
    out = -np.expm1(-alpha * np.asarray(z, dtype=float)) / alpha
    return float(out) if out.ndim == 0 else out


def delta_rho_db(P_tot: float, Cr: float, L_eff: float, B_tot: float) -> float:
    """Net power transfer between the outermost channels, in dB."""
    if min(P_tot, Cr, L_eff, B_tot) < 0:
        raise ValueError("all arguments must be non-negative")
    return DB_PER_NEPER * P_tot * Cr * L_eff * B_tot


def sinhc(y):
    """sinh(y)/y with the removable singularity handled by series."""
    y = np.asarray(y, dtype=float)
    small = np.abs(y) < _SERIES_EPS
    safe = np.where(small, 1.0, y)
    out = np.where(small, 1.0 + y * y / 6.0, np.sinh(safe) / safe)
    return float(out) if out.ndim == 0 else out


def taylor_T(f_k, P_tot: float, Cr: float, alpha: float):
    """First-order ISRS coefficient, main-text normalization ``2 - f P_tot Cr / alpha``.

    The appendix convention is ``T_main - 2``.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    return 2.0 - np.asarray(f_k, dtype=float) * P_tot * Cr / alpha


@dataclass(frozen=True)
class IsrsDiagnostics:
    delta_rho_db: float
    validity_ratio: float
    warn: bool


def validity_check(delta_rho_db: float, threshold: float = 0.5) -> IsrsDiagnostics:
    """Flag power transfers where the first-order Raman expansion degrades."""
    if not 0 < threshold <= 1:
        raise ValueError("threshold must be in (0, 1]")
    ratio = delta_rho_db / VALIDITY_LIMIT_DB
    return IsrsDiagnostics(delta_rho_db, ratio, bool(delta_rho_db > threshold * VALIDITY_LIMIT_DB))


@dataclass(frozen=True)
class SpectralLoad:
    """Per-channel occupancy of a span input.

    ``freqs`` are channel centers relative to the reference carrier (Hz),
    ``bandwidths`` in Hz, ``powers`` in W.  Channels are kept sorted.
    """

    freqs: np.ndarray
    bandwidths: np.ndarray
    powers: np.ndarray
    total_power: float = field(init=False)
    total_bandwidth: float = field(init=False)

    def __post_init__(self):
        f = np.atleast_1d(np.asarray(self.freqs, dtype=float))
        b = np.broadcast_to(np.asarray(self.bandwidths, dtype=float), f.shape).copy()
        p = np.broadcast_to(np.asarray(self.powers, dtype=float), f.shape).copy()
        if f.size == 0:
            raise ValueError("spectral load has no channels")
        if np.any(b <= 0):
            raise ValueError("channel bandwidths must be positive")
        if np.any(p < 0):
            raise ValueError("channel powers must be non-negative")
        order = np.argsort(f, kind="stable")
        f, b, p = f[order], b[order], p[order]
        if f.size > 1:
            gap = (f[1:] - b[1:] / 2) - (f[:-1] + b[:-1] / 2)
            if np.any(gap < -1e-6 * b[1:]):
                raise ValueError("channels overlap")
        for name, arr in (("freqs", f), ("bandwidths", b), ("powers", p)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "total_power", float(p.sum()))
        object.__setattr__(
            self, "total_bandwidth", float((f[-1] + b[-1] / 2) - (f[0] - b[0] / 2))
        )

    @classmethod
    def uniform(cls, n_channels: int, spacing: float, bandwidth: float, power: float,
                center: float = 0.0) -> "SpectralLoad":
        idx = np.arange(n_channels) - (n_channels - 1) / 2
        return cls(center + idx * spacing, bandwidth, power)

    def __len__(self):
        return self.freqs.size

    @property
    def band_center(self) -> float:
        lo = self.freqs[0] - self.bandwidths[0] / 2
        hi = self.freqs[-1] + self.bandwidths[-1] / 2
        return 0.5 * (lo + hi)

    def active(self) -> "SpectralLoad":
        """Same load with zero-power channels removed."""
        keep = self.powers > 0
        return SpectralLoad(self.freqs[keep], self.bandwidths[keep], self.powers[keep])

    def index_of(self, freq: float) -> int:
        i = int(np.argmin(np.abs(self.freqs - freq)))
        if abs(self.freqs[i] - freq) > 0.5 * self.bandwidths[i]:
            raise KeyError(f"no channel at {freq} Hz")
        return i

    def psd(self, f):
        """Launch power spectral density in W/Hz (rectangular channels)."""
        f = np.asarray(f, dtype=float)
        out = np.zeros_like(f)
        for fk, bk, pk in zip(self.freqs, self.bandwidths, self.powers):
            out = np.where(np.abs(f - fk) <= bk / 2, pk / bk, out)
        return out


class PowerProfile:
    """Normalized ISRS power profile ``rho(z, f)`` including fiber loss.

    ``uniform`` assumes the total power is spread evenly over ``B_tot`` around
    ``center``; otherwise the normalization integrates the actual launch
    spectrum in closed form, channel slab by channel slab.
    """

    def __init__(self, P_tot: float, Cr: float, alpha: float, *, B_tot: float | None = None,
                 center: float = 0.0, load: SpectralLoad | None = None):
        if (B_tot is None) == (load is None):
            raise ValueError("give exactly one of B_tot or load")
        self.P_tot = float(P_tot)
        self.Cr = float(Cr)
        self.alpha = float(alpha)
        self.B_tot = B_tot
        self.center = center
        self.load = load

    @classmethod
    def uniform(cls, P_tot, B_tot, Cr, alpha, center=0.0) -> "PowerProfile":
        return cls(P_tot, Cr, alpha, B_tot=B_tot, center=center)

    @classmethod
    def general(cls, load: SpectralLoad, Cr, alpha) -> "PowerProfile":
        return cls(load.total_power, Cr, alpha, load=load)

    def x(self, z):
        return self.P_tot * self.Cr * effective_length(self.alpha, z)

    def log_norm(self, z):
        """``log(norm(z))`` so that rho = exp(-alpha z + log_norm - x f)."""
        x = np.asarray(self.x(z), dtype=float)
        if self.load is None:
            y = x * self.B_tot / 2
            return -np.log(sinhc(y)) + x * self.center
        ld = self.load
        w = ld.powers / self.P_tot
        xs = x[..., None]
        # sum_k w_k exp(-x f_k) sinhc(x B_k / 2), evaluated in log space
        a = -xs * ld.freqs + np.log(sinhc(xs * ld.bandwidths / 2))
        amax = a.max(axis=-1)
        s = np.log(np.sum(w * np.exp(a - amax[..., None]), axis=-1)) + amax
        return -s

    def __call__(self, f, z):
        f = np.asarray(f, dtype=float)
        z = np.asarray(z, dtype=float)
        out = np.exp(-self.alpha * z + self.log_norm(z) - self.x(z) * f)
        return float(out) if out.ndim == 0 else out

    def delta_rho_db(self, z: float) -> float:
        B = self.B_tot if self.load is None else self.load.total_bandwidth
        return delta_rho_db(self.P_tot, self.Cr, effective_length(self.alpha, z), B)


def profile_uniform(f, z, P_tot: float, B_tot: float, Cr: float, alpha: float, center: float = 0.0):
    """Loss factor ``rho(z, f)`` for power spread uniformly over ``B_tot``."""
    return PowerProfile.uniform(P_tot, B_tot, Cr, alpha, center)(f, z)


def profile_general(f, z, load: SpectralLoad, Cr: float, alpha: float):
    """Loss factor ``rho(z, f)`` for an arbitrary piecewise-constant launch spectrum."""
    if load is None or len(load) == 0:
        raise ValueError("empty spectral load")
    return PowerProfile.general(load, Cr, alpha)(f, z)


def first_order_profile(f, z, P_tot: float, Cr: float, alpha: float):
    """``(1 + t) e^{-alpha z} - t e^{-2 alpha z}`` with ``t = -f P_tot Cr / alpha``."""
    t = -np.asarray(f, dtype=float) * P_tot * Cr / alpha
    e = np.exp(-alpha * np.asarray(z, dtype=float))
    return (1 + t) * e - t * e * e


def channel_gains_db(load: SpectralLoad, Cr: float, alpha: float, z: float) -> np.ndarray:
    """Net ISRS gain of each channel relative to flat loss, in dB."""
    prof = PowerProfile.general(load, Cr, alpha)
    return DB_PER_NEPER * (prof.log_norm(z) - prof.x(z) * load.freqs)


__all__: Sequence[str] = [
    "VALIDITY_LIMIT_DB",
    "IsrsDiagnostics",
    "PowerProfile",
    "SpectralLoad",
    "channel_gains_db",
    "delta_rho_db",
    "effective_length",
    "first_order_profile",
    "profile_general",
    "profile_uniform",
    "sinhc",
    "taylor_T",
    "validity_check",
]
