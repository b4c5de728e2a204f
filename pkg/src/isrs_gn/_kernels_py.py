"""Pure NumPy implementation of the hot kernels.

Used when the compiled extension is unavailable, and as its reference.
"""
from __future__ import annotations

import numpy as np

_SERIES_Y = 1e-2
_CHUNK = 4096


def _phi12(y):
    """phi1 = (e^y - 1)/y and phi2 = (y e^y - e^y + 1)/y^2, stable near y = 0."""
    small = np.abs(y) < _SERIES_Y
    ys = np.where(small, 1.0, y)
    e = np.exp(ys)
    phi1 = (e - 1.0) / ys
    phi2 = (ys * e - e + 1.0) / (ys * ys)
    if np.any(small):
        y2 = y * y
        s1 = 1 + y / 2 + y2 / 6 + y2 * y / 24 + y2 * y2 / 120 + y2 * y2 * y / 720
        s2 = 0.5 + y / 3 + y2 / 8 + y2 * y / 30 + y2 * y2 / 144 + y2 * y2 * y / 840
        phi1 = np.where(small, s1, phi1)
        phi2 = np.where(small, s2, phi2)
    return phi1, phi2


def phasor_power(omega, fp, z, x, log_norm, alpha):
    """``|int_0^L exp(-alpha s) n(s) exp(-x(s) fp) exp(j omega s) ds|^2`` per point.

    The Raman factor ``n exp(-x fp)`` is linear between the nodes ``z``; the
    complex exponential is integrated exactly on every panel, so arbitrarily
    large ``omega`` needs no extra nodes.
    """
    omega = np.ascontiguousarray(omega, dtype=float).ravel()
    fp = np.ascontiguousarray(fp, dtype=float).ravel()
    z = np.asarray(z, dtype=float)
    x = np.asarray(x, dtype=float)
    log_norm = np.asarray(log_norm, dtype=float)
    h = np.diff(z)
    z0 = z[:-1]
    out = np.empty(omega.size)
    for start in range(0, omega.size, _CHUNK):
        sl = slice(start, start + _CHUNK)
        om = omega[sl, None]
        k = -alpha + 1j * om
        phi1, phi2 = _phi12(k * h)
        w1 = h * phi2
        w0 = h * phi1 - w1
        s = np.exp(log_norm - x * fp[sl, None])
        acc = np.exp(k * z0) * (s[:, :-1] * w0 + s[:, 1:] * w1)
        tot = acc.sum(axis=1)
        out[sl] = tot.real**2 + tot.imag**2
    return out
