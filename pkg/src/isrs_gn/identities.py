"""Definite integrals that appear when the frequency integrals are done by hand.

``quartic_inverse``   int_0^X dx / (A + B x^2 + x^4)
``quartic_ratio``     int_0^X x^2 dx / (A + B x^2 + x^4)
``lorentz_ratio``     int_0^X (1 + a^2 f^2) / (1 + b^2 f^2) df
``atan_over_x``       int_0^x atan(D t) / t dt, approximated by (pi/2) asinh(D x / 2)
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import spence


def _roots(A: float, B: float):
    disc = B * B - 4 * A
    if disc < 0:
        raise ValueError("B^2 < 4A: complex roots are not supported")
    C = math.sqrt(disc)
    if not (B - C > 0 and A > 0):
        raise ValueError("need A > 0 and B > 0")
    return C, B - C, B + C


def quartic_inverse(A: float, B: float, X):
    """``int_0^X dx / (A + B x^2 + x^4)`` for ``B^2 > 4A``, ``A, B > 0``."""
    C, m, p = _roots(A, B)
    X = np.asarray(X, dtype=float)
    s2 = math.sqrt(2.0)
    out = (s2 / (C * math.sqrt(m)) * np.arctan(s2 * X / math.sqrt(m))
           - s2 / (C * math.sqrt(p)) * np.arctan(s2 * X / math.sqrt(p)))
    return float(out) if out.ndim == 0 else out


def quartic_ratio(A: float, B: float, X):
    """``int_0^X x^2 dx / (A + B x^2 + x^4)`` for ``B^2 > 4A``, ``A, B > 0``."""
    C, m, p = _roots(A, B)
    X = np.asarray(X, dtype=float)
    s2 = math.sqrt(2.0)
    out = (math.sqrt(p) / (s2 * C) * np.arctan(s2 * X / math.sqrt(p))
           - math.sqrt(m) / (s2 * C) * np.arctan(s2 * X / math.sqrt(m)))
    return float(out) if out.ndim == 0 else out


def lorentz_ratio(a: float, b: float, X):
    """``int_0^X (1 + a^2 f^2) / (1 + b^2 f^2) df`` for ``b != 0``."""
    if b == 0:
        raise ValueError("b must be non-zero")
    X = np.asarray(X, dtype=float)
    out = ((b * b - a * a) * np.arctan(b * X) + a * a * b * X) / b**3
    return float(out) if out.ndim == 0 else out


def atan_over_x_approx(D: float, x):
    """``(pi/2) asinh(D x / 2)``: log-accurate for ``|D x| >> 1``, 21% low as ``D x -> 0``."""
    return math.pi / 2 * np.arcsinh(np.asarray(D * x, dtype=float) / 2)


def atan_over_x_exact(D: float, x):
    """``int_0^x atan(D t)/t dt = Im Li2(j D x)`` (inverse tangent integral)."""
    y = np.asarray(D * x, dtype=complex)
    # Li2(w) = spence(1 - w)
    out = np.imag(spence(1 - 1j * y))
    out = np.asarray(out, dtype=float)
    return float(out) if out.ndim == 0 else out
