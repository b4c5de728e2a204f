"""Numerical ISRS GN model: the general-spectrum double integral and the
two-channel XPM integral, used as the reference for the closed form.

Frequency integrals use composite Gauss-Legendre rules on segments whose
breakpoints contain every channel edge (the launch spectrum is piecewise
constant there) plus a geometric grading toward the zero phase-mismatch lines,
where the integrand forms ridges of width ~ alpha / (beta2 * offset).  The
distance integral is done by :func:`isrs_gn.kernels.phasor_power`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import kernels
from .raman import PowerProfile, SpectralLoad
from .units import DerivedFiberParams, FiberSpec


class QuadratureError(RuntimeError):
    def __init__(self, message: str, achieved_rel_tol: float):
        super().__init__(f"{message} (achieved relative tolerance {achieved_rel_tol:.3g})")
        self.achieved_rel_tol = achieved_rel_tol


@dataclass(frozen=True)
class QuadratureConfig:
    rel_tol: float = 1e-4
    max_subdivisions: int = 2000
    z_nodes: int = 128
    grade_ratio: float = 2.0
    grade_min_Hz: float = 1e4
    estimate_error: bool = True
    check_tolerance: bool = False

    def __post_init__(self):
        if not 1e-12 < self.rel_tol < 1e-1:
            raise ValueError("rel_tol must lie in (1e-12, 1e-1)")
        if self.z_nodes < 64:
            raise ValueError("z_nodes must be >= 64")
        if self.grade_ratio <= 1:
            raise ValueError("grade_ratio must exceed 1")

    @property
    def order(self) -> int:
        """Gauss-Legendre nodes per segment implied by ``rel_tol``."""
        return int(min(10, max(3, math.ceil(-math.log10(self.rel_tol)))))


@dataclass
class IntegralResult:
    eta: float
    error: float
    n_points: int

    def __float__(self):
        return self.eta


@lru_cache(maxsize=32)
def _gauss(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def distance_grid(fiber: DerivedFiberParams, z_nodes: int = 128, block: int = 8) -> np.ndarray:
    """Nodes along the span: uniform blocks whose boundaries are uniform in effective length."""
    a, L = fiber.alpha, fiber.length
    n_blocks = max(1, z_nodes // block)
    le = np.linspace(0.0, -math.expm1(-a * L) / a, n_blocks + 1)
    zb = -np.log1p(-a * le) / a
    zb[0], zb[-1] = 0.0, L
    parts = [zb[b] + (zb[b + 1] - zb[b]) * np.arange(block) / block for b in range(n_blocks)]
    return np.concatenate(parts + [[L]])


class _Weight:
    """Distance-integral evaluator bound to one span and power profile."""

    def __init__(self, fiber: DerivedFiberParams, profile: PowerProfile, z_nodes: int):
        self.fiber = fiber
        self.z = distance_grid(fiber, z_nodes)
        self.x = np.asarray(profile.x(self.z), dtype=float)
        self.log_norm = np.asarray(profile.log_norm(self.z), dtype=float)

    def __call__(self, omega, fp):
        return kernels.phasor_power(omega, fp, self.z, self.x, self.log_norm, self.fiber.alpha)


def inner_link_integral(f1, f2, f_coi, fiber, load: SpectralLoad | None = None, *, profile: PowerProfile | None = None,
                        z_nodes: int = 128):
    """``|int_0^L rho(s, f1 + f2 - f) exp(j phi(f1, f2, f, s)) ds|^2``.

    ``rho`` is the general-spectrum profile of ``load`` unless ``profile`` is given.
    """
    fb = fiber.derived() if isinstance(fiber, FiberSpec) else fiber
    if profile is None:
        profile = PowerProfile.general(load, fb.Cr, fb.alpha)
    f1, f2 = np.broadcast_arrays(np.asarray(f1, dtype=float), np.asarray(f2, dtype=float))
    om = _omega(f1 - f_coi, f2 - f_coi, f_coi, fb)
    out = _Weight(fb, profile, z_nodes)(om.ravel(), (f1 + f2 - f_coi).ravel()).reshape(f1.shape)
    return float(out) if out.ndim == 0 else out


def _omega(u, v, f_coi, fb: DerivedFiberParams):
    """Phase-mismatch rate (rad/m) for offsets ``u, v`` from the COI center."""
    return -4 * math.pi**2 * u * v * (fb.beta2 + math.pi * fb.beta3 * (2 * f_coi + u + v))


def _graded(center: float, lo: float, hi: float, wmin: float, ratio: float) -> np.ndarray:
    if not lo < center < hi:
        return np.empty(0)
    span = max(hi - center, center - lo)
    k = np.arange(int(math.ceil(math.log(span / wmin) / math.log(ratio))) + 1)
    d = wmin * ratio**k
    pts = np.concatenate([[center], center + d, center - d])
    return pts[(pts > lo) & (pts < hi)]


def _segments(breaks: np.ndarray, lo: float, hi: float, max_len: float | None = None):
    b = np.unique(np.clip(breaks, lo, hi))
    b = b[(b >= lo) & (b <= hi)]
    a, c = b[:-1], b[1:]
    keep = c > a
    a, c = a[keep], c[keep]
    if max_len is not None and a.size:
        n = np.maximum(1, np.ceil((c - a) / max_len)).astype(int)
        if np.any(n > 1):
            starts = np.repeat(a, n)
            lens = np.repeat((c - a) / n, n)
            offs = np.concatenate([np.arange(k) for k in n])
            a = starts + offs * lens
            c = a + lens
    return a, c


def _nodes(a, c, order):
    x, w = _gauss(order)
    half = 0.5 * (c - a)
    mid = 0.5 * (c + a)
    return (mid[:, None] + half[:, None] * x).ravel(), (half[:, None] * w).ravel()


class _Psd:
    """Piecewise-constant launch PSD with fast lookup."""

    def __init__(self, load: SpectralLoad):
        lit = load.powers > 0
        self.lo = load.freqs[lit] - load.bandwidths[lit] / 2
        self.hi = load.freqs[lit] + load.bandwidths[lit] / 2
        self.val = load.powers[lit] / load.bandwidths[lit]
        self.edges = np.concatenate([self.lo, self.hi])

    def __call__(self, f):
        f = np.asarray(f, dtype=float)
        idx = np.searchsorted(self.lo, f, side="right") - 1
        ok = idx >= 0
        idx = np.where(ok, idx, 0)
        ok &= f <= self.hi[idx]
        return np.where(ok, self.val[idx], 0.0)


def _check(total: float, err: float, cfg: QuadratureConfig, what: str):
    if cfg.check_tolerance and total > 0 and err > cfg.rel_tol * total:
        raise QuadratureError(f"{what} did not converge", err / total)


def _full_integral_once(i: int, load: SpectralLoad, fb: DerivedFiberParams, weight: _Weight, order: int,
                        cfg: QuadratureConfig, max_segments: int):
    psd = _Psd(load)
    fi = load.freqs[i]
    band_lo, band_hi = psd.lo.min() - fi, psd.hi.max() - fi
    grade = _graded(0.0, band_lo, band_hi, cfg.grade_min_Hz, cfg.grade_ratio)
    ua, uc = _segments(np.concatenate([psd.edges - fi, grade]), band_lo, band_hi)
    mid = 0.5 * (ua + uc)
    g1 = psd(fi + mid)
    ua, uc, g1 = ua[g1 > 0], uc[g1 > 0], g1[g1 > 0]
    if ua.size > max_segments:
        raise QuadratureError("outer segment count exceeds max_subdivisions", float("nan"))
    un, uw = _nodes(ua, uc, order)
    uw = uw * np.repeat(g1, order)
    base = np.concatenate([psd.edges - fi, grade])
    total = 0.0
    n_pts = 0
    oms, fps, ws = [], [], []
    pending = 0

    def flush():
        nonlocal total, pending
        if not oms:
            return
        om = np.concatenate(oms)
        fp = np.concatenate(fps)
        w = np.concatenate(ws)
        total += float(np.dot(w, weight(om, fp)))
        oms.clear(), fps.clear(), ws.clear()
        pending = 0

    for u, wu in zip(un, uw):
        va, vc = _segments(np.concatenate([base, psd.edges - fi - u]), band_lo, band_hi)
        vm = 0.5 * (va + vc)
        g = psd(fi + vm) * psd(fi + u + vm)
        sel = g > 0
        va, vc, g = va[sel], vc[sel], g[sel]
        vn, vw = _nodes(va, vc, order)
        vw = vw * np.repeat(g, order) * wu
        oms.append(_omega(u, vn, fi, fb))
        fps.append(fi + u + vn)
        ws.append(vw)
        pending += vn.size
        n_pts += vn.size
        if pending > 400_000:
            flush()
    flush()
    return total, n_pts


@dataclass
class LinkKernel:
    """Spans of a link with each span's own launch spectrum."""

    fibers: Sequence[FiberSpec | DerivedFiberParams]
    loads: Sequence[SpectralLoad]

    def __post_init__(self):
        if len(self.fibers) == 0 or len(self.fibers) != len(self.loads):
            raise ValueError("need one load per span and at least one span")

    @classmethod
    def homogeneous(cls, fiber, load: SpectralLoad, n_spans: int = 1) -> "LinkKernel":
        return cls([fiber] * n_spans, [load] * n_spans)

    @property
    def n_spans(self) -> int:
        return len(self.fibers)


def eta_full_integral(coi_freq: float, link: LinkKernel | SpectralLoad, fiber=None,
                      config: QuadratureConfig | None = None) -> IntegralResult:
    """NLI coefficient of the COI at ``coi_freq`` from the general-spectrum integral.

    Includes the terms generated jointly by two interferers.  Multi-span
    links are accumulated incoherently, each span with its own spectrum;
    identical consecutive spans are evaluated once.
    """
    cfg = config or QuadratureConfig()
    if isinstance(link, SpectralLoad):
        if fiber is None:
            raise ValueError("fiber required with a bare SpectralLoad")
        link = LinkKernel.homogeneous(fiber, link)
    total = err = 0.0
    n_pts = 0
    cache: dict[tuple, tuple[float, float, int]] = {}
    for fib, load in zip(link.fibers, link.loads):
        fb = fib.derived() if isinstance(fib, FiberSpec) else fib
        key = (id(load), fb)
        if key not in cache:
            cache[key] = _span_full(coi_freq, load, fb, cfg)
        e, de, n = cache[key]
        total += e
        err += de
        n_pts += n
    _check(total, err, cfg, "general-spectrum integral")
    return IntegralResult(total, err, n_pts)


def _span_full(coi_freq, load: SpectralLoad, fb: DerivedFiberParams, cfg: QuadratureConfig):
    i = load.index_of(coi_freq)
    P_i, B_i = load.powers[i], load.bandwidths[i]
    if P_i <= 0:
        raise ValueError("channel of interest must carry power")
    profile = PowerProfile.general(load.active(), fb.Cr, fb.alpha)
    weight = _Weight(fb, profile, cfg.z_nodes)
    pref = 16 / 27 * fb.gamma**2 * B_i / P_i**3
    val, n = _full_integral_once(i, load, fb, weight, cfg.order, cfg, cfg.max_subdivisions)
    err = 0.0
    if cfg.estimate_error:
        lo, _ = _full_integral_once(i, load, fb, weight, cfg.order - 1, cfg, cfg.max_subdivisions)
        err = abs(val - lo) * pref
    return val * pref, err, n


def eta_xpm_pair_integral(coi, interferer, fiber, P_tot: float | None = None, B_tot: float | None = None,
                          config: QuadratureConfig | None = None, center: float = 0.0,
                          load: SpectralLoad | None = None) -> IntegralResult:
    """Two-channel XPM coefficient.

    ``coi`` and ``interferer`` are ``(freq, bandwidth, power)`` triples.  The
    ISRS profile is the uniform one set by ``P_tot``/``B_tot`` (centered on
    ``center``) or, if ``load`` is given, the general profile of that spectrum.
    """
    cfg = config or QuadratureConfig()
    fb = fiber.derived() if isinstance(fiber, FiberSpec) else fiber
    f_i, B_i, P_i = coi
    f_k, B_k, P_k = interferer
    if P_i <= 0:
        raise ValueError("channel of interest must carry power")
    if load is not None:
        profile = PowerProfile.general(load.active(), fb.Cr, fb.alpha)
    elif P_tot is None or B_tot is None:
        raise ValueError("give P_tot and B_tot, or a load")
    else:
        profile = PowerProfile.uniform(P_tot, B_tot, fb.Cr, fb.alpha, center)
    weight = _Weight(fb, profile, cfg.z_nodes)
    df = f_k - f_i
    val, n = _pair_once(f_i, B_i, df, B_k, fb, weight, cfg.order, cfg)
    err = 0.0
    if cfg.estimate_error:
        lo, _ = _pair_once(f_i, B_i, df, B_k, fb, weight, cfg.order - 1, cfg)
        err = abs(val - lo)
    pref = 32 / 27 * fb.gamma**2 / B_k**2 * (P_k / P_i) ** 2
    res = IntegralResult(val * pref, err * pref, n)
    _check(res.eta, res.error, cfg, "XPM pair integral")
    return res


def _pair_once(f_i, B_i, df, B_k, fb, weight: _Weight, order: int, cfg: QuadratureConfig):
    lo, hi = -B_i / 2, B_i / 2
    ua, uc = _segments(np.concatenate([[lo, hi], _graded(0.0, lo, hi, cfg.grade_min_Hz, cfg.grade_ratio)]), lo, hi,
                       max_len=B_i / 8)
    un, uw = _nodes(ua, uc, order)
    oms, fps, ws = [], [], []
    for u, wu in zip(un, uw):
        vlo = max(-B_k / 2, -B_k / 2 - u)
        vhi = min(B_k / 2, B_k / 2 - u)
        if vhi <= vlo:
            continue
        br = np.concatenate([[vlo, vhi], _graded(-df, vlo, vhi, cfg.grade_min_Hz, cfg.grade_ratio)])
        va, vc = _segments(br, vlo, vhi, max_len=B_k / 8)
        vn, vw = _nodes(va, vc, order)
        oms.append(-4 * math.pi**2 * u * (vn + df) * (fb.beta2 + math.pi * fb.beta3 * (u + vn + 2 * f_i + df)))
        fps.append(u + vn + f_i + df)
        ws.append(vw * wu)
    om, fp, w = np.concatenate(oms), np.concatenate(fps), np.concatenate(ws)
    return float(np.dot(w, weight(om, fp))), om.size


def eta_spm_integral(coi, fiber, P_tot: float | None = None, B_tot: float | None = None,
                     config: QuadratureConfig | None = None, center: float = 0.0,
                     load: SpectralLoad | None = None) -> IntegralResult:
    """SPM coefficient: half of the pair integral of the COI with itself."""
    r = eta_xpm_pair_integral(coi, coi, fiber, P_tot, B_tot, config, center, load)
    return IntegralResult(0.5 * r.eta, 0.5 * r.error, r.n_points)


def cw_interferer_limit(coi, interferer, fiber, P_tot: float, B_tot: float, z_nodes: int = 128,
                        center: float = 0.0) -> float:
    """Narrow-interferer limit of :func:`eta_xpm_pair_integral` (``B_k -> 0`` at fixed ``P_k``)."""
    fb = fiber.derived() if isinstance(fiber, FiberSpec) else fiber
    profile = PowerProfile.uniform(P_tot, B_tot, fb.Cr, fb.alpha, center)
    k = _Weight(fb, profile, z_nodes)(np.zeros(1), np.array([interferer[0]]))[0]
    return 32 / 27 * fb.gamma**2 * (interferer[2] / coi[2]) ** 2 * k

