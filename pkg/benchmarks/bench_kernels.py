"""Compare the compiled distance-integral kernel with the NumPy fallback.

    python benchmarks/bench_kernels.py --points 200000 --repeat 3
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from isrs_gn import _kernels_py
from isrs_gn.integral import distance_grid
from isrs_gn.raman import PowerProfile, SpectralLoad
from isrs_gn.units import table1_fiber


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=200_000)
    ap.add_argument("--z-nodes", type=int, default=128)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    fb = table1_fiber().derived()
    load = SpectralLoad.uniform(251, 40.005e9, 40.004e9, 1e-3)
    prof = PowerProfile.general(load, fb.Cr, fb.alpha)
    z = distance_grid(fb, args.z_nodes)
    rng = np.random.default_rng(args.seed)
    om = rng.normal(0.0, 3e-4, args.points)
    fp = rng.uniform(-5e12, 5e12, args.points)
    inputs = (om, fp, z, prof.x(z), prof.log_norm(z), fb.alpha)
    panels = args.points * (z.size - 1)

    t_py, ref = best_of(lambda: _kernels_py.phasor_power(*inputs), args.repeat)
    print(f"numpy   : {t_py:8.3f} s  {t_py / panels * 1e9:7.2f} ns/panel")
    try:
        from isrs_gn import _kernels
    except ImportError:
        print("compiled: not built (pip install -e . --no-build-isolation)")
        return
    t_c, got = best_of(lambda: _kernels.phasor_power(*inputs), args.repeat)
    err = float(np.max(np.abs(got - ref) / np.maximum(ref, 1e-300)))
    print(f"compiled: {t_c:8.3f} s  {t_c / panels * 1e9:7.2f} ns/panel  speedup {t_py / t_c:5.1f}x  "
          f"max rel diff {err:.1e}")


if __name__ == "__main__":
    main()
