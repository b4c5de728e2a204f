"""Command-line front end.

    isrs-gn --preset fig3 --out results/
    isrs-gn --config run.json --engine integral --threads 4 --out results/

Every run writes its data files plus ``manifest.json`` (resolved config, its
SHA-256, seed, package versions and output checksums).  Passing a manifest back
as ``--config`` repeats the run.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__, config as cfgmod, kernels
from .closed_form import ClosedFormConfig, closed_form_spectrum, eta_spm_cf, eta_xpm_pair_cf, Channel
from .integral import LinkKernel, eta_full_integral, eta_spm_integral, eta_xpm_pair_integral
from .network import (ChannelPlan, NliReport, NoiseConfig, Topology, ase_power, evaluate_lightpath,
                      example_lightpath, generate_scenario, sweep_launch_power)
from .raman import SpectralLoad, delta_rho_db, effective_length, validity_check
from .ssfm import BudgetError, simulate
from .units import dbm_to_watt, linear_to_db

EXIT_VALIDATION = 2
EXIT_BUDGET = 3


def _db(x):
    return float(linear_to_db(x)) if x > 0 else float("nan")


class Run:
    def __init__(self, doc: dict, out: Path, threads: int):
        self.doc = doc
        self.out = out
        self.threads = threads
        self.seed = int(doc.get("seed", 0))
        self.files: list[Path] = []

    def csv(self, name: str, header, rows) -> None:
        path = self.out / name
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([_cell(v) for v in r])
        self.files.append(path)

    def json(self, name: str, obj) -> None:
        path = self.out / name
        obj = dict(obj)
        obj["config_sha256"] = cfgmod.canonical_hash(self.doc)
        path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")
        self.files.append(path)

    def binary(self, name: str, writer) -> None:
        path = self.out / name
        writer(path)
        self.files.append(path)


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _noise(doc) -> NoiseConfig:
    if "noise_figure_db" in doc:
        return NoiseConfig(doc["noise_figure_db"], True)
    return NoiseConfig(enabled=False)


def _p2p_report(doc, load: SpectralLoad, fiber, idx, engine: str, threads: int) -> NliReport:
    n = doc.get("n_spans", 1)
    fb = fiber.derived()
    P = load.powers[idx]
    f = load.freqs[idx]
    if engine == "integral":
        _budget(doc, idx.size)
        quad = cfgmod.quad_config_from(doc)
        link = LinkKernel.homogeneous(fiber, load, n)
        tot = np.array([eta_full_integral(load.freqs[i], link, config=quad).eta for i in idx])
        spm = np.array([n * eta_spm_integral((load.freqs[i], load.bandwidths[i], load.powers[i]), fiber,
                                             config=quad, load=load).eta for i in idx])
        xpm, eps = tot - spm, 0.0
    else:
        cf = cfgmod.cf_config_from(doc)
        res = closed_form_spectrum(load, fiber, n, cf, idx)
        spm = res.eta_spm * n ** (1 + res.epsilon)
        xpm = res.eta_xpm * n
        eps = float(np.mean(res.epsilon))
    noise = _noise(doc)
    p_ase = np.zeros(idx.size)
    if noise.enabled:
        g = fiber.alpha_db_per_km * fiber.length_m / 1e3
        p_ase = n * ase_power(noise.noise_figure_db, g, fiber.ref_frequency_Hz + f, load.bandwidths[idx])
    drho = delta_rho_db(load.total_power, fb.Cr, effective_length(fb.alpha, fb.length), load.active().total_bandwidth)
    per_edge = (spm + xpm)[:, None]
    return NliReport(engine, idx, f, P, spm + xpm, spm, xpm, per_edge, p_ase, np.array([drho]),
                     validity_check(drho).warn, eps)


def _budget(doc, n_eval):
    cap = doc.get("quadrature", {}).get("max_integral_evals", 500)
    if n_eval > cap:
        raise BudgetError(f"integral engine needs {n_eval} evaluations (budget {cap}); "
                          "sample fewer channels via coi_indices")


def cmd_closed_form(run: Run):
    doc = run.doc
    load = cfgmod.load_from(doc)
    fiber = cfgmod.fiber_from(doc)
    idx = cfgmod.coi_indices(doc, load)
    rep = _p2p_report(doc, load, fiber, idx, "integral" if doc.get("engine") == "integral" else "closed_form",
                      run.threads)
    run.csv("nli.csv", NliReport.COLUMNS, [[r[c] for c in NliReport.COLUMNS] for r in rep.rows()])
    run.json("nli.json", rep.to_dict())


def cmd_spectrum(run: Run):
    doc = run.doc
    fiber = cfgmod.fiber_from(doc)
    cf = cfgmod.cf_config_from(doc)
    quad = cfgmod.quad_config_from(doc)
    n = doc.get("n_spans", 1)
    rows, summary = [], {}
    use_int = doc.get("engine") == "integral"
    for p in doc.get("power_dbm_list", [doc.get("channels", {}).get("power_dbm", 0.0)]):
        load = cfgmod.load_from(doc, p)
        all_idx = np.flatnonzero(load.powers > 0)
        res = closed_form_spectrum(load, fiber, n, cf, all_idx)
        sample = cfgmod.coi_indices(doc, load) if "coi_indices" in doc else all_idx
        integ = {}
        if use_int:
            _budget(doc, sample.size)
            link = LinkKernel.homogeneous(fiber, load, n)
            integ = {int(i): eta_full_integral(load.freqs[i], link, config=quad).eta for i in sample}
        diffs = []
        for r, i in enumerate(all_idx):
            e_cf = float(res.eta_total[r])
            e_in = integ.get(int(i), float("nan"))
            d = _db(e_cf) - _db(e_in) if int(i) in integ else float("nan")
            if int(i) in integ:
                diffs.append(d)
            rows.append([p, int(i), load.freqs[i], _db(e_cf), _db(e_in), d])
        fb = fiber.derived()
        summary[f"{p:g}"] = {
            "delta_rho_db": delta_rho_db(load.total_power, fb.Cr, fb.Leff_full, load.total_bandwidth),
            "mean_abs_diff_db": float(np.mean(np.abs(diffs))) if diffs else None,
        }
    run.csv("spectrum.csv", ["power_dbm", "coi_index", "f_rel_Hz", "eta_cf_db", "eta_integral_db", "diff_db"], rows)
    run.json("spectrum.json", {"summary": summary})


def cmd_pair_scan(run: Run):
    doc = run.doc
    ps = doc.get("pair_scan", {})
    load = cfgmod.load_from(doc)
    quad = cfgmod.quad_config_from(doc)
    fi = ps.get("coi_f_rel_Hz", -4e12)
    i = load.index_of(fi)
    coi = Channel(load.freqs[i], load.bandwidths[i], load.powers[i])
    P_tot, B_tot = load.total_power, load.total_bandwidth
    offsets = ps.get("offsets_Hz", [k * 40.005e9 for k in range(0, 11)])
    base = cfgmod.fiber_from(doc)
    variants = [("", base), ("_no_isrs", base.replace(Cr_per_W_km_THz=0.0))]
    rows = []
    for off in offsets:
        row = [off]
        for _, fib in variants:
            if off == 0:
                c = eta_spm_cf(coi.freq, coi.bandwidth, fib, P_tot)
                v = eta_spm_integral(tuple(coi), fib, P_tot, B_tot, quad).eta
            else:
                inf = Channel(coi.freq + off, coi.bandwidth, coi.power)
                c = eta_xpm_pair_cf(coi, inf, fib, P_tot)
                v = eta_xpm_pair_integral(tuple(coi), tuple(inf), fib, P_tot, B_tot, quad).eta
            row += [_db(c), _db(v), _db(c) - _db(v)]
        rows.append(row)
    hdr = ["offset_Hz", "cf_db", "integral_db", "diff_db", "cf_no_isrs_db", "integral_no_isrs_db", "diff_no_isrs_db"]
    run.csv("pair_scan.csv", hdr, rows)
    run.json("pair_scan.json", {"coi_f_rel_Hz": float(coi.freq), "rows": rows})


def cmd_coherence(run: Run):
    doc = run.doc
    load = cfgmod.load_from(doc)
    fiber = cfgmod.fiber_from(doc)
    n = doc.get("n_spans", 6)
    idx = np.flatnonzero(load.powers > 0)
    eps_list = doc.get("coherence", {}).get("epsilon_values", [0.0])
    cols, data = [], []
    for eps in eps_list:
        res = closed_form_spectrum(load, fiber, n, ClosedFormConfig("fixed", eps), idx)
        cols.append(f"eta_cf_eps{eps:g}_db")
        data.append(linear_to_db(res.eta_total))
    auto = closed_form_spectrum(load, fiber, n, ClosedFormConfig("auto"), idx)
    cols.append("eta_cf_auto_db")
    data.append(linear_to_db(auto.eta_total))
    integ = np.full(idx.size, np.nan)
    if doc.get("engine") == "integral":
        quad = cfgmod.quad_config_from(doc)
        sample = cfgmod.coi_indices(doc, load) if "coi_indices" in doc else idx
        _budget(doc, sample.size)
        link = LinkKernel.homogeneous(fiber, load, n)
        for i in sample:
            integ[int(np.searchsorted(idx, i))] = _db(eta_full_integral(load.freqs[i], link, config=quad).eta)
    cols.append("eta_integral_db")
    data.append(integ)
    rows = [[int(i), load.freqs[i]] + [float(d[r]) for d in data] for r, i in enumerate(idx)]
    run.csv("coherence.csv", ["coi_index", "f_rel_Hz"] + cols, rows)
    ref = data[0]
    run.json("coherence.json", {
        "epsilon_auto": float(np.mean(auto.epsilon)),
        "mean_gain_vs_first_db": {c: float(np.mean(d - ref)) for c, d in zip(cols[1:-1], data[1:-1])},
        "n_spans": n,
    })


def cmd_network(run: Run):
    doc = run.doc
    net = doc.get("network", {})
    fiber = cfgmod.fiber_from(doc)
    if "topology" in net:
        topo = Topology.from_dict(net["topology"])
        path = net.get("path") or list(topo.edges)
    else:
        topo, path = example_lightpath(fiber)
    ch = doc.get("channels", {})
    if "explicit" in ch:
        raise cfgmod.ConfigError("network runs need a uniform slot grid", "channels")
    plan = ChannelPlan(ch.get("n", 251), ch.get("spacing_Hz", 40.005e9), ch.get("bandwidth_Hz", 40.004e9),
                       ch.get("power_dbm", 0.0))
    cf = cfgmod.cf_config_from(doc)
    noise = _noise(doc) if "noise_figure_db" in doc else NoiseConfig()
    summary = {}
    for u in net.get("utilizations", [0.8, 0.9]):
        sc = generate_scenario(topo, path, u, net.get("drop_fraction", 0.8), net.get("jitter_db", 1.0), run.seed,
                               plan, net.get("coi_every", 5))
        tag = f"u{round(u * 100):d}"
        on = evaluate_lightpath(sc, topo, "closed_form", noise, cf)
        off = evaluate_lightpath(sc, topo, "closed_form", noise, cf, isrs=False)
        for rep, name in ((on, f"network_{tag}"), (off, f"network_{tag}_no_isrs")):
            run.csv(f"{name}.csv", NliReport.COLUMNS, [[r[c] for c in NliReport.COLUMNS] for r in rep.rows()])
            run.json(f"{name}.json", rep.to_dict())
        change = linear_to_db(on.eta_total) - linear_to_db(off.eta_total)
        s = {"isrs_change_db_min": float(change.min()), "isrs_change_db_max": float(change.max()),
             "isrs_change_lowest_coi_db": float(change[0]), "isrs_change_highest_coi_db": float(change[-1]),
             "eta_fluctuation_var_db2": eta_fluctuation(on), "delta_rho_db_max": on.delta_rho_db_max}
        if doc.get("engine") == "integral":
            stride = net.get("integral_coi_stride", 5)
            sub = sc.coi_slots[::stride]
            quad = cfgmod.quad_config_from(doc)
            cap = doc.get("quadrature", {}).get("max_integral_evals", 500)
            integ = evaluate_lightpath(sc, topo, "integral", noise, quad=quad, coi_subset=sub,
                                       max_integral_evals=cap, threads=run.threads)
            inc = evaluate_lightpath(sc, topo, "closed_form", noise, ClosedFormConfig("incoherent"), coi_subset=sub)
            run.csv(f"network_{tag}_integral.csv", NliReport.COLUMNS,
                    [[r[c] for c in NliReport.COLUMNS] for r in integ.rows()])
            d = linear_to_db(inc.eta_total) - linear_to_db(integ.eta_total)
            s["engine_mean_abs_diff_db"] = float(np.mean(np.abs(d)))
        summary[tag] = s
        run.json(f"scenario_{tag}.json", sc.to_dict())
    run.json("network_summary.json", summary)


def eta_fluctuation(rep: NliReport) -> float:
    """Variance (dB^2) of the COI NLI coefficients about a quadratic trend in frequency."""
    y = linear_to_db(rep.eta_total)
    x = rep.freqs / 1e12
    c = np.polyfit(x, y, 2)
    return float(np.var(y - np.polyval(c, x)))


def cmd_sweep(run: Run):
    doc = run.doc
    fiber = cfgmod.fiber_from(doc)
    ch = doc.get("channels", {})
    plan = ChannelPlan(ch.get("n", 251), ch.get("spacing_Hz", 40.005e9), ch.get("bandwidth_Hz", 40.004e9))
    grid = doc.get("power_dbm_list", list(np.arange(-6.0, 6.01, 0.1)))
    noise = NoiseConfig(doc.get("noise_figure_db", 5.0))
    idx = np.asarray(doc["coi_indices"]) if "coi_indices" in doc else None
    res = sweep_launch_power(fiber, doc.get("n_spans", 6), grid, plan, noise, cfgmod.cf_config_from(doc), idx)
    ids = np.arange(plan.n_slots) if idx is None else idx
    rows = [[float(p), int(i), float(res.freqs[r]), float(res.snr_db[k, r]), _db(res.eta[k, r])]
            for k, p in enumerate(res.power_dbm) for r, i in enumerate(ids)]
    run.csv("sweep.csv", ["power_dbm", "coi_index", "f_rel_Hz", "snr_db", "eta_db_1_per_W2"], rows)
    run.csv("sweep_optimum.csv", ["coi_index", "f_rel_Hz", "p_opt_dbm", "snr_opt_db"],
            [[int(i), float(res.freqs[r]), float(res.optimum_dbm[r]), float(res.optimum_snr_db[r])]
             for r, i in enumerate(ids)])


def cmd_slope(run: Run):
    doc = run.doc
    fiber = cfgmod.fiber_from(doc)
    base = cfgmod.load_from(doc)
    quad = cfgmod.quad_config_from(doc)
    sl = doc.get("slope", {})
    idx = np.arange(0, len(base), sl.get("coi_stride", 25))
    _budget(doc, 2 * idx.size * len(sl.get("tilts_db", [-2, 2])))
    ref = {int(i): eta_spm_integral((base.freqs[i], base.bandwidths[i], base.powers[i]), fiber, config=quad,
                                    load=base).eta for i in idx}
    rows, summary = [], {}
    for tilt in sl.get("tilts_db", [-2.0, 2.0]):
        ld = sloped_load(base, tilt)
        devs = []
        for i in idx:
            e = eta_spm_integral((ld.freqs[i], ld.bandwidths[i], ld.powers[i]), fiber, config=quad, load=ld).eta
            d = _db(ref[int(i)]) - _db(e)
            devs.append(d)
            rows.append([tilt, int(i), ld.freqs[i], _db(ref[int(i)]), _db(e), d])
        summary[f"{tilt:g}"] = {"mean_db": float(np.mean(devs)), "min_db": float(np.min(devs)),
                                "max_db": float(np.max(devs))}
    run.csv("slope.csv", ["tilt_db", "coi_index", "f_rel_Hz", "eta_spm_uniform_db", "eta_spm_sloped_db",
                          "deviation_db"], rows)
    run.json("slope.json", {"deviation_uniform_minus_sloped": summary})


def sloped_load(load: SpectralLoad, tilt_db: float) -> SpectralLoad:
    """Linear-in-dB power tilt across the band (positive: high frequencies louder), same total power."""
    f = load.freqs
    span = f[-1] - f[0] if f.size > 1 else 1.0
    pdb = tilt_db * ((f - f[0]) / span - 0.5)
    p = load.powers * 10 ** (pdb / 10)
    p *= load.total_power / p.sum()
    return SpectralLoad(f, load.bandwidths, p)


def cmd_ssfm(run: Run):
    doc = run.doc
    cfg, extra = cfgmod.ssfm_config_from(doc, run.seed, run.threads)
    fiber = cfgmod.fiber_from(doc)
    p = dbm_to_watt(extra.get("power_dbm", 0.0))
    res = simulate(cfg, [fiber] * doc.get("n_spans", 1), p, extra.get("noise_snr_db"))
    run.binary("ssfm.csv", res.write_csv)
    if extra.get("dump_constellations"):
        run.binary("constellations.bin", res.write_constellations)
    out = {"snr_db": res.snr_db.tolist(), "eta_db": res.eta_db.tolist(), "freqs_Hz": res.freqs.tolist(),
           "eta_db_per_realization": linear_to_db(res.eta_per_realization).tolist(),
           "n_steps": int(res.step_sizes.size), "min_step_m": float(res.step_sizes.min()),
           "max_step_m": float(res.step_sizes.max())}
    run.json("ssfm.json", out)


COMMAND_FUNCS = {
    "closed_form": cmd_closed_form,
    "spectrum": cmd_spectrum,
    "pair_scan": cmd_pair_scan,
    "coherence": cmd_coherence,
    "network": cmd_network,
    "sweep": cmd_sweep,
    "slope": cmd_slope,
    "ssfm": cmd_ssfm,
}


def _versions() -> dict:
    import scipy
    return {"isrs_gn": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version(), "kernel_backend": kernels.BACKEND}


def _sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def resolve_threads(arg: int | None) -> int:
    if arg is not None:
        return max(1, arg)
    env = os.environ.get("ISRS_GN_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise cfgmod.ConfigError(f"ISRS_GN_THREADS must be an integer, got {env!r}", "ISRS_GN_THREADS")
    return 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="isrs-gn", description="NLI/SNR estimation with inter-channel Raman scattering")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--config", type=Path, help="JSON run configuration (or a manifest.json to repeat a run)")
    src.add_argument("--preset", choices=cfgmod.PRESETS, help="shipped example configuration")
    p.add_argument("--engine", choices=cfgmod.ENGINES, help="override the configured engine")
    p.add_argument("--out", type=Path, default=Path("isrs_gn_out"), help="output directory")
    p.add_argument("--seed", type=int, help="override the RNG seed (u64)")
    p.add_argument("--threads", type=int, help="worker threads (default: $ISRS_GN_THREADS or 1)")
    p.add_argument("--print-schema", action="store_true", help="print the config JSON schema and exit")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.print_schema:
        print(json.dumps(cfgmod.SCHEMA, indent=1))
        return 0
    try:
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise cfgmod.ConfigError("seed must be an unsigned 64-bit integer", "seed")
        if args.config is not None:
            doc = cfgmod.load(args.config)
        elif args.preset is not None:
            doc = cfgmod.load_preset(args.preset)
        else:
            raise cfgmod.ConfigError("one of --config or --preset is required")
        doc = cfgmod.with_overrides(doc, args.engine, args.seed)
        if doc.get("engine") == "ssfm":
            doc = dict(doc, command="ssfm")
        threads = resolve_threads(args.threads)
        args.out.mkdir(parents=True, exist_ok=True)
        run = Run(doc, args.out, threads)
        COMMAND_FUNCS[doc["command"]](run)
    except cfgmod.ConfigError as exc:
        print(json.dumps(exc.to_dict()), file=sys.stderr)
        return EXIT_VALIDATION
    except BudgetError as exc:
        print(json.dumps({"error": "budget", "message": str(exc)}), file=sys.stderr)
        return EXIT_BUDGET
    except (ValueError, KeyError) as exc:
        print(json.dumps({"error": "invalid", "message": str(exc)}), file=sys.stderr)
        return EXIT_VALIDATION
    manifest = {
        "manifest_version": 1,
        "config": doc,
        "config_sha256": cfgmod.canonical_hash(doc),
        "seed": run.seed,
        "versions": _versions(),
        "outputs": {p.name: _sha(p) for p in run.files},
    }
    (args.out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
