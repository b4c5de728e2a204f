"""Lightpath evaluation in a mesh network with add/drop at every ROADM.

Channel slots sit on a fixed grid.  Channels of interest (COIs) travel the
whole path; interferers are dropped and added at each ROADM, so every edge has
its own launch spectrum.  Gain flattening after every span restores the
launch spectrum, hence all spans of an edge share one load.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .closed_form import ClosedFormConfig, closed_form_spectrum, coherence_epsilon
from .integral import QuadratureConfig, eta_full_integral, eta_spm_integral
from .ssfm import BudgetError
from .raman import SpectralLoad, delta_rho_db, effective_length, validity_check
from .units import PLANCK, FiberSpec, db_to_linear, dbm_to_watt, linear_to_db


@dataclass(frozen=True)
class ChannelPlan:
    n_slots: int = 251
    spacing_Hz: float = 40.005e9
    bandwidth_Hz: float = 40.004e9
    power_dbm: float = 0.0

    @property
    def freqs(self) -> np.ndarray:
        return (np.arange(self.n_slots) - (self.n_slots - 1) / 2) * self.spacing_Hz


@dataclass(frozen=True)
class Edge:
    a: str
    b: str
    spans: tuple[FiberSpec, ...]

    def __post_init__(self):
        if len(self.spans) == 0:
            raise ValueError(f"edge {self.a}-{self.b} has no spans")


@dataclass
class Topology:
    nodes: list[str]
    edges: dict[str, Edge]
    directed: bool = False

    def __post_init__(self):
        known = set(self.nodes)
        for name, e in self.edges.items():
            if e.a not in known or e.b not in known:
                raise ValueError(f"edge {name} references an unknown node")

    def path_edges(self, path: Sequence[str]) -> list[Edge]:
        out = []
        for name in path:
            if name not in self.edges:
                raise KeyError(f"unknown edge {name}")
            out.append(self.edges[name])
        for e1, e2 in zip(out, out[1:]):
            ends1 = {e1.b} if self.directed else {e1.a, e1.b}
            ends2 = {e2.a} if self.directed else {e2.a, e2.b}
            if not ends1 & ends2:
                raise ValueError("path edges are not contiguous")
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "Topology":
        edges = {}
        for e in doc["edges"]:
            spans = tuple(FiberSpec(**s) for s in e["spans"])
            edges[e.get("name", f"{e['a']}-{e['b']}")] = Edge(e["a"], e["b"], spans)
        return cls(list(doc["nodes"]), edges, bool(doc.get("directed", False)))


def example_lightpath(fiber: FiberSpec | None = None) -> tuple[Topology, list[str]]:
    """Six-span test lightpath: 197 km and 203 km edges split into two spans, then two 100 km edges."""
    fiber = fiber or FiberSpec()
    def spans(total_km, n):
        return tuple(fiber.replace(length_m=total_km * 1e3 / n) for _ in range(n))
    edges = {
        "A-R1": Edge("A", "R1", spans(197, 2)),
        "R1-R2": Edge("R1", "R2", spans(203, 2)),
        "R2-R3": Edge("R2", "R3", spans(100, 1)),
        "R3-B": Edge("R3", "B", spans(100, 1)),
    }
    return Topology(["A", "R1", "R2", "R3", "B"], edges), list(edges)


@dataclass
class LightpathScenario:
    """Per-edge slot occupancy along a path.

    ``occupancy[e, s]`` is True where slot ``s`` is lit on edge ``e``;
    ``power_offset_db`` and ``predispersion_m`` belong to the interferer
    currently in a slot (zero for COIs).
    """

    path: list[str]
    plan: ChannelPlan
    coi_slots: np.ndarray
    occupancy: np.ndarray
    power_offset_db: np.ndarray
    predispersion_m: np.ndarray
    utilization: float
    drop_fraction: float
    jitter_db: float
    seed: int
    events: list[dict] = field(default_factory=list)

    def edge_load(self, e: int) -> SpectralLoad:
        occ = self.occupancy[e]
        p = dbm_to_watt(self.plan.power_dbm) * db_to_linear(self.power_offset_db[e])
        p = np.where(occ, p, 0.0)
        return SpectralLoad(self.plan.freqs, self.plan.bandwidth_Hz, p)

    def to_dict(self) -> dict:
        return {
            "path": self.path,
            "plan": self.plan.__dict__,
            "coi_slots": self.coi_slots.tolist(),
            "occupancy": self.occupancy.astype(int).tolist(),
            "power_offset_db": self.power_offset_db.tolist(),
            "predispersion_m": self.predispersion_m.tolist(),
            "utilization": self.utilization,
            "drop_fraction": self.drop_fraction,
            "jitter_db": self.jitter_db,
            "seed": self.seed,
            "events": self.events,
        }


def generate_scenario(topology: Topology, path: Sequence[str], utilization: float, drop_fraction: float = 0.8,
                      jitter_db: float = 1.0, seed: int = 0, plan: ChannelPlan | None = None,
                      coi_every: int = 5, max_predispersion_m: float = 1000e3) -> LightpathScenario:
    """Random add/drop pattern along ``path``; deterministic for a given ``seed``."""
    plan = plan or ChannelPlan()
    edges = topology.path_edges(path)
    if not 0 < utilization <= 1:
        raise ValueError("utilization must lie in (0, 1]")
    if not 0 <= drop_fraction <= 1:
        raise ValueError("drop_fraction must lie in [0, 1]")
    if jitter_db < 0:
        raise ValueError("jitter_db must be >= 0")
    rng = np.random.default_rng(seed)
    n = plan.n_slots
    coi = np.arange(0, n, coi_every)
    target = int(round(utilization * n))
    if target < coi.size:
        raise ValueError(f"utilization {utilization} is below the COI occupancy {coi.size / n:.3f}")
    lit = np.zeros(n, dtype=bool)
    lit[coi] = True
    offs = np.zeros(n)
    pred = np.zeros(n)
    occ, off_hist, pred_hist, events = [], [], [], []
    for e in range(len(edges)):
        dropped = np.empty(0, dtype=int)
        if e > 0:
            interferers = np.flatnonzero(lit & ~np.isin(np.arange(n), coi))
            n_drop = int(round(drop_fraction * interferers.size))
            dropped = np.sort(rng.choice(interferers, size=n_drop, replace=False))
            lit[dropped] = False
            offs[dropped] = 0.0
            pred[dropped] = 0.0
        empty = np.flatnonzero(~lit)
        n_add = max(0, target - int(lit.sum()))
        added = np.sort(rng.choice(empty, size=n_add, replace=False))
        lit[added] = True
        offs[added] = rng.uniform(-jitter_db, jitter_db, size=n_add)
        pred[added] = rng.uniform(0.0, max_predispersion_m, size=n_add)
        occ.append(lit.copy())
        off_hist.append(offs.copy())
        pred_hist.append(pred.copy())
        events.append({"edge": path[e], "dropped": dropped.tolist(), "added": added.tolist()})
    return LightpathScenario(list(path), plan, coi, np.array(occ), np.array(off_hist), np.array(pred_hist),
                             utilization, drop_fraction, jitter_db, seed, events)


def ase_power(noise_figure_db: float, gain_db: float, center_freq_abs_Hz: float, ref_bandwidth_Hz: float) -> float:
    """ASE power of one amplifier in ``ref_bandwidth_Hz``, both polarizations: ``NF (G - 1) h f B``."""
    if gain_db <= 0:
        raise ValueError("gain_db must be positive")
    nf = db_to_linear(noise_figure_db)
    return 2 * (nf / 2) * (db_to_linear(gain_db) - 1) * PLANCK * center_freq_abs_Hz * ref_bandwidth_Hz


@dataclass(frozen=True)
class NoiseConfig:
    noise_figure_db: float = 5.0
    enabled: bool = True


@dataclass
class NliReport:
    engine: str
    coi_slots: np.ndarray
    freqs: np.ndarray
    powers: np.ndarray
    eta_total: np.ndarray
    eta_spm: np.ndarray
    eta_xpm: np.ndarray
    eta_per_edge: np.ndarray  # (n_coi, n_edges), incoherent per-edge sums
    p_ase: np.ndarray
    delta_rho_db_spans: np.ndarray
    validity_warn: bool
    epsilon: float = 0.0

    @property
    def p_nli(self) -> np.ndarray:
        return self.eta_total * self.powers**3

    @property
    def snr(self) -> np.ndarray:
        return self.powers / (self.p_ase + self.p_nli)

    @property
    def snr_db(self) -> np.ndarray:
        return 10 * np.log10(self.snr)

    @property
    def delta_rho_db_max(self) -> float:
        return float(np.max(self.delta_rho_db_spans))

    COLUMNS = ("coi_index", "f_rel_Hz", "eta_db_1_per_W2", "eta_spm_db", "eta_xpm_db", "p_nli_dbm",
               "p_ase_dbm", "snr_db", "delta_rho_db_max", "validity_warn")

    def rows(self) -> list[dict]:
        def dbm(w):
            return 10 * math.log10(w * 1e3) if w > 0 else float("-inf")
        out = []
        for r in range(self.coi_slots.size):
            out.append({
                "coi_index": int(self.coi_slots[r]),
                "f_rel_Hz": float(self.freqs[r]),
                "eta_db_1_per_W2": float(linear_to_db(self.eta_total[r])),
                "eta_spm_db": float(linear_to_db(self.eta_spm[r])),
                "eta_xpm_db": float(linear_to_db(self.eta_xpm[r])) if self.eta_xpm[r] > 0 else float("-inf"),
                "p_nli_dbm": dbm(float(self.p_nli[r])),
                "p_ase_dbm": dbm(float(self.p_ase[r])),
                "snr_db": float(self.snr_db[r]),
                "delta_rho_db_max": self.delta_rho_db_max,
                "validity_warn": bool(self.validity_warn),
            })
        return out

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(",".join(self.COLUMNS) + "\n")
            for row in self.rows():
                fh.write(",".join(_fmt(row[c]) for c in self.COLUMNS) + "\n")

    def to_dict(self) -> dict:
        return {"engine": self.engine, "epsilon": self.epsilon,
                "eta_per_edge": self.eta_per_edge.tolist(), "rows": self.rows()}

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1, allow_nan=True)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, int):
        return str(v)
    return repr(float(v))


def evaluate_lightpath(scenario: LightpathScenario, topology: Topology, engine: str = "closed_form",
                       noise: NoiseConfig | None = None, cf_config: ClosedFormConfig | None = None,
                       quad: QuadratureConfig | None = None, coi_subset: Sequence[int] | None = None,
                       isrs: bool = True, max_integral_evals: int = 500, threads: int = 1,
                       validity_threshold: float = 0.5) -> NliReport:
    """NLI, ASE and SNR of the COIs after the whole lightpath.

    ``coi_subset`` selects COIs by slot index.  The integral engine accumulates
    every span incoherently; the closed form uses ``n^(1+eps)`` for SPM over all
    spans of the path with the span-averaged SPM coefficient.
    """
    if engine not in ("closed_form", "integral"):
        raise ValueError(f"unknown engine {engine!r}")
    noise = noise or NoiseConfig()
    cf_config = cf_config or ClosedFormConfig()
    edges = topology.path_edges(scenario.path)
    coi = np.asarray(scenario.coi_slots if coi_subset is None else coi_subset, dtype=int)
    if not np.all(np.isin(coi, scenario.coi_slots)):
        raise ValueError("coi_subset must contain channel-of-interest slots only")
    plan = scenario.plan
    freqs = plan.freqs[coi]
    P = np.full(coi.size, dbm_to_watt(plan.power_dbm))

    loads = [scenario.edge_load(e) for e in range(len(edges))]
    spans = [(e, s if isrs else s.replace(Cr_per_W_km_THz=0.0)) for e, edge in enumerate(edges) for s in edge.spans]
    n_spans = len(spans)
    f0 = spans[0][1].ref_frequency_Hz

    drho = np.array([delta_rho_db(loads[e].total_power, s.derived().Cr, effective_length(s.derived().alpha, s.length_m),
                                  loads[e].active().total_bandwidth) for e, s in spans])
    warn = any(validity_check(d, validity_threshold).warn for d in drho)

    p_ase = np.zeros(coi.size)
    if noise.enabled:
        for _, s in spans:
            g = s.alpha_db_per_km * s.length_m / 1e3
            p_ase += ase_power(noise.noise_figure_db, g, f0 + freqs, plan.bandwidth_Hz)

    spm_spans = np.zeros((coi.size, n_spans))
    xpm_spans = np.zeros((coi.size, n_spans))
    if engine == "closed_form":
        cache = {}
        for j, (e, s) in enumerate(spans):
            key = (e, s)
            if key not in cache:
                cache[key] = closed_form_spectrum(loads[e], s, 1, cf_config, coi)
            res = cache[key]
            spm_spans[:, j] = res.eta_spm
            xpm_spans[:, j] = res.eta_xpm
        B = np.full(coi.size, plan.bandwidth_Hz)
        if cf_config.epsilon_mode == "auto":
            eps = float(np.mean(coherence_epsilon(B, spans[0][1])))
        elif cf_config.epsilon_mode == "fixed":
            eps = cf_config.epsilon_value
        else:
            eps = 0.0
        spm = spm_spans.mean(axis=1) * n_spans ** (1 + eps)
        xpm = xpm_spans.sum(axis=1)
    else:
        distinct = sorted({(e, s) for e, s in spans}, key=lambda k: (k[0], k[1].length_m))
        n_eval = coi.size * len(distinct)
        if n_eval > max_integral_evals:
            raise BudgetError(f"integral engine needs {n_eval} evaluations (budget {max_integral_evals}); "
                              "sample fewer COIs with coi_subset")
        quad = quad or QuadratureConfig(estimate_error=False)
        tasks = [(r, e, s) for e, s in distinct for r in range(coi.size)]

        def run(task):
            r, e, s = task
            tot = eta_full_integral(freqs[r], loads[e], s, quad).eta
            i = loads[e].index_of(freqs[r])
            spm_ = eta_spm_integral((freqs[r], plan.bandwidth_Hz, loads[e].powers[i]), s, config=quad,
                                    load=loads[e]).eta
            return task, tot, spm_

        with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
            results = {(t[1], t[2], t[0]): (tot, sp) for t, tot, sp in pool.map(run, tasks)}
        for j, (e, s) in enumerate(spans):
            for r in range(coi.size):
                tot, sp = results[(e, s, r)]
                spm_spans[r, j] = sp
                xpm_spans[r, j] = tot - sp
        eps = 0.0
        spm = spm_spans.sum(axis=1)
        xpm = xpm_spans.sum(axis=1)

    per_edge = np.zeros((coi.size, len(edges)))
    for j, (e, _) in enumerate(spans):
        per_edge[:, e] += spm_spans[:, j] + xpm_spans[:, j]
    return NliReport(engine, coi, freqs, P, spm + xpm, spm, xpm, per_edge, p_ase, drho, warn, eps)


@dataclass
class SweepResult:
    power_dbm: np.ndarray
    freqs: np.ndarray
    snr_db: np.ndarray  # (n_power, n_channel)
    eta: np.ndarray  # (n_power, n_channel)

    @property
    def optimum_dbm(self) -> np.ndarray:
        return self.power_dbm[np.argmax(self.snr_db, axis=0)]

    @property
    def optimum_snr_db(self) -> np.ndarray:
        return np.max(self.snr_db, axis=0)


def sweep_launch_power(fiber: FiberSpec, n_spans: int, power_grid_dbm, plan: ChannelPlan | None = None,
                       noise: NoiseConfig | None = None, cf_config: ClosedFormConfig | None = None,
                       coi_idx=None, p_ase_scale: float = 1.0) -> SweepResult:
    """SNR versus uniform per-channel launch power on a homogeneous, fully loaded link.

    ``eta`` is recomputed at every power because ISRS ties it to the total power.
    """
    plan = plan or ChannelPlan()
    noise = noise or NoiseConfig()
    grid = np.asarray(power_grid_dbm, dtype=float)
    if grid.size < 2 or np.ptp(grid) < 8 - 1e-9:
        raise ValueError("power grid must span at least 8 dB")
    idx = np.arange(plan.n_slots) if coi_idx is None else np.atleast_1d(np.asarray(coi_idx))
    f = plan.freqs[idx]
    g = fiber.alpha_db_per_km * fiber.length_m / 1e3
    p_ase = n_spans * ase_power(noise.noise_figure_db, g, fiber.ref_frequency_Hz + f, plan.bandwidth_Hz) * p_ase_scale
    if not noise.enabled:
        p_ase = np.zeros_like(f)
    snr = np.empty((grid.size, idx.size))
    eta = np.empty_like(snr)
    for k, pdbm in enumerate(grid):
        load = SpectralLoad.uniform(plan.n_slots, plan.spacing_Hz, plan.bandwidth_Hz, dbm_to_watt(pdbm))
        res = closed_form_spectrum(load, fiber, n_spans, cf_config, idx)
        eta[k] = res.eta_total
        P = dbm_to_watt(pdbm)
        snr[k] = 10 * np.log10(P / (p_ase + res.eta_total * P**3))
    return SweepResult(grid, f, snr, eta)
