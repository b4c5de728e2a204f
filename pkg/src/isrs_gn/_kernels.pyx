# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels.  Mirrors :mod:`isrs_gn._kernels_py` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, cos, sin, hypot, fabs

cnp.import_array()

cdef double SERIES_Y = 1e-2


cdef inline void _phi12(double yr, double yi, double* p1r, double* p1i,
                        double* p2r, double* p2i) noexcept nogil:
    cdef double er, ei, m, nr, ni, d, y2r, y2i, y3r, y3i, y4r, y4i, y5r, y5i
    if hypot(yr, yi) < SERIES_Y:
        y2r = yr * yr - yi * yi
        y2i = 2 * yr * yi
        y3r = y2r * yr - y2i * yi
        y3i = y2r * yi + y2i * yr
        y4r = y2r * y2r - y2i * y2i
        y4i = 2 * y2r * y2i
        y5r = y4r * yr - y4i * yi
        y5i = y4r * yi + y4i * yr
        p1r[0] = 1 + yr / 2 + y2r / 6 + y3r / 24 + y4r / 120 + y5r / 720
        p1i[0] = yi / 2 + y2i / 6 + y3i / 24 + y4i / 120 + y5i / 720
        p2r[0] = 0.5 + yr / 3 + y2r / 8 + y3r / 30 + y4r / 144 + y5r / 840
        p2i[0] = yi / 3 + y2i / 8 + y3i / 30 + y4i / 144 + y5i / 840
        return
    m = exp(yr)
    er = m * cos(yi)
    ei = m * sin(yi)
    d = yr * yr + yi * yi
    # phi1 = (E - 1) / y
    nr = er - 1.0
    ni = ei
    p1r[0] = (nr * yr + ni * yi) / d
    p1i[0] = (ni * yr - nr * yi) / d
    # phi2 = (y E - E + 1) / y^2
    nr = yr * er - yi * ei - er + 1.0
    ni = yr * ei + yi * er - ei
    y2r = yr * yr - yi * yi
    y2i = 2 * yr * yi
    d = y2r * y2r + y2i * y2i
    p2r[0] = (nr * y2r + ni * y2i) / d
    p2i[0] = (ni * y2r - nr * y2i) / d


cdef void _phasor_power(const double* omega, const double* fp, Py_ssize_t npts,
                        const double* z, const double* x, const double* log_norm,
                        Py_ssize_t nz, double alpha, double* out) noexcept nogil:
    # Panels of equal width share their weights; exp(k z) advances by recurrence.
    cdef Py_ssize_t p, n
    cdef double om, f, h, hprev, ar, ai, s0, s1, w0r, w0i, w1r, w1i
    cdef double p1r, p1i, p2r, p2i, m, cr, ci, tr, ti, er, ei, tmp
    for p in range(npts):
        om = omega[p]
        f = fp[p]
        ar = 0.0
        ai = 0.0
        m = exp(-alpha * z[0])
        cr = m * cos(om * z[0])
        ci = m * sin(om * z[0])
        s0 = exp(log_norm[0] - x[0] * f)
        hprev = -1.0
        for n in range(nz - 1):
            h = z[n + 1] - z[n]
            if fabs(h - hprev) > 1e-9 * h:
                # new block: re-anchor the phase to avoid drift
                m = exp(-alpha * z[n])
                cr = m * cos(om * z[n])
                ci = m * sin(om * z[n])
                _phi12(-alpha * h, om * h, &p1r, &p1i, &p2r, &p2i)
                w1r = h * p2r
                w1i = h * p2i
                w0r = h * p1r - w1r
                w0i = h * p1i - w1i
                m = exp(-alpha * h)
                er = m * cos(om * h)
                ei = m * sin(om * h)
                hprev = h
            s1 = exp(log_norm[n + 1] - x[n + 1] * f)
            tr = s0 * w0r + s1 * w1r
            ti = s0 * w0i + s1 * w1i
            ar += cr * tr - ci * ti
            ai += cr * ti + ci * tr
            tmp = cr * er - ci * ei
            ci = cr * ei + ci * er
            cr = tmp
            s0 = s1
        out[p] = ar * ar + ai * ai


def phasor_power(omega, fp, z, x, log_norm, double alpha):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] om = np.ascontiguousarray(omega, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ff = np.ascontiguousarray(fp, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] zz = np.ascontiguousarray(z, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xx = np.ascontiguousarray(x, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ln = np.ascontiguousarray(log_norm, dtype=np.float64)
    if om.shape[0] != ff.shape[0]:
        raise ValueError("omega and fp differ in length")
    if not (zz.shape[0] == xx.shape[0] == ln.shape[0]) or zz.shape[0] < 2:
        raise ValueError("node arrays must share a length >= 2")
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(om.shape[0])
    with nogil:
        _phasor_power(&om[0] if om.shape[0] else NULL, &ff[0] if ff.shape[0] else NULL,
                      om.shape[0], &zz[0], &xx[0], &ln[0], zz.shape[0], alpha,
                      &out[0] if out.shape[0] else NULL)
    return out
