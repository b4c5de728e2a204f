"""Run configuration: JSON schema, loading and conversion to engine objects."""
from __future__ import annotations

import copy
import hashlib
import json
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .closed_form import ClosedFormConfig
from .integral import QuadratureConfig
from .raman import SpectralLoad
from .ssfm import SsfmConfig
from .units import FiberSpec, dbm_to_watt

SCHEMA_VERSION = 1
PRESETS = ("fig2", "fig3", "fig4", "fig6", "fig7")
COMMANDS = ("closed_form", "pair_scan", "spectrum", "coherence", "network", "sweep", "ssfm", "slope")
ENGINES = ("cf", "integral", "ssfm")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_int = {"type": "integer"}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


FIBER_SCHEMA = _obj({
    "alpha_db_per_km": _pos, "D_ps_nm_km": _num, "S_ps_nm2_km": _num, "gamma_per_W_km": {"type": "number", "minimum": 0},
    "Cr_per_W_km_THz": {"type": "number", "minimum": 0}, "length_m": _pos, "ref_wavelength_m": _pos,
})

CHANNELS_SCHEMA = {
    "oneOf": [
        _obj({"n": {"type": "integer", "minimum": 1}, "spacing_Hz": _pos, "bandwidth_Hz": _pos, "power_dbm": _num},
             ["n"]),
        _obj({"explicit": {"type": "array", "minItems": 1, "items": _obj(
            {"f_rel_Hz": _num, "bandwidth_Hz": _pos, "power_dbm": _num}, ["f_rel_Hz", "bandwidth_Hz", "power_dbm"])}},
            ["explicit"]),
    ]
}

SCHEMA = _obj({
    "schema_version": {"const": SCHEMA_VERSION},
    "command": {"enum": list(COMMANDS)},
    "engine": {"enum": list(ENGINES)},
    "seed": {"type": "integer", "minimum": 0},
    "isrs": {"type": "boolean"},
    "fiber": FIBER_SCHEMA,
    "channels": CHANNELS_SCHEMA,
    "n_spans": {"type": "integer", "minimum": 1},
    "coi_indices": {"type": "array", "items": {"type": "integer", "minimum": 0}},
    "power_dbm_list": {"type": "array", "items": _num, "minItems": 1},
    "noise_figure_db": _num,
    "closed_form": _obj({"epsilon_mode": {"enum": ["fixed", "auto", "incoherent"]},
                         "epsilon_value": {"type": "number", "minimum": 0},
                         "phi_singularity_eps": _pos, "modulation_correction": _pos}),
    "quadrature": _obj({"rel_tol": _pos, "max_subdivisions": {"type": "integer", "minimum": 1},
                        "z_nodes": {"type": "integer", "minimum": 64}, "estimate_error": {"type": "boolean"},
                        "max_integral_evals": {"type": "integer", "minimum": 1}}),
    "pair_scan": _obj({"coi_f_rel_Hz": _num, "offsets_Hz": {"type": "array", "items": _num, "minItems": 1}}),
    "coherence": _obj({"epsilon_values": {"type": "array", "items": {"type": "number", "minimum": 0}}}),
    "network": _obj({
        "utilizations": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                         "minItems": 1},
        "drop_fraction": {"type": "number", "minimum": 0, "maximum": 1},
        "jitter_db": {"type": "number", "minimum": 0},
        "coi_every": {"type": "integer", "minimum": 1},
        "integral_coi_stride": {"type": "integer", "minimum": 1},
        "topology": _obj({
            "nodes": {"type": "array", "items": {"type": "string"}, "minItems": 2},
            "edges": {"type": "array", "minItems": 1, "items": _obj({
                "name": {"type": "string"}, "a": {"type": "string"}, "b": {"type": "string"},
                "spans": {"type": "array", "minItems": 1, "items": FIBER_SCHEMA}}, ["a", "b", "spans"])},
            "directed": {"type": "boolean"},
        }, ["nodes", "edges"]),
        "path": {"type": "array", "items": {"type": "string"}, "minItems": 1},
    }),
    "slope": _obj({"tilts_db": {"type": "array", "items": _num, "minItems": 1},
                   "coi_stride": {"type": "integer", "minimum": 1}}),
    "ssfm": _obj({
        "n_channels": {"type": "integer", "minimum": 1}, "symbol_rate_Hz": _pos, "channel_spacing_Hz": _pos,
        "rrc_rolloff": {"type": "number", "minimum": 0, "maximum": 1}, "n_symbols": {"type": "integer", "minimum": 2},
        "samples_per_symbol": {"type": "integer", "minimum": 2}, "n_steps_per_span": {"type": "integer", "minimum": 1},
        "step_distribution": {"enum": ["logarithmic", "uniform"]}, "modulation": {"enum": ["gaussian", "qam64"]},
        "n_realizations": {"type": "integer", "minimum": 1}, "dual_polarization": {"type": "boolean"},
        "gff": {"type": "boolean"}, "power_dbm": _num, "dump_constellations": {"type": "boolean"},
        "noise_snr_db": _num,
    }),
}, ["schema_version", "command"])


class ConfigError(ValueError):
    def __init__(self, message: str, path: str = ""):
        super().__init__(message)
        self.path = path

    def to_dict(self) -> dict:
        return {"error": "validation", "path": self.path, "message": str(self)}


def validate(doc: dict) -> dict:
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path)
        raise ConfigError(exc.message, path) from None
    ch = doc.get("channels")
    if ch is not None and "n" in ch and ch["n"] < 1:
        raise ConfigError("empty channel list", "channels")
    return doc


def load(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    if isinstance(doc, dict) and "manifest_version" in doc:
        doc = doc["config"]
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return validate(doc)


def load_preset(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}", "preset")
    text = resources.files("isrs_gn").joinpath("presets", f"{name}.json").read_text()
    return validate(json.loads(text))


def canonical_hash(doc: dict) -> str:
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def with_overrides(doc: dict, engine: str | None = None, seed: int | None = None) -> dict:
    out = copy.deepcopy(doc)
    if engine is not None:
        out["engine"] = engine
    if seed is not None:
        out["seed"] = seed
    return validate(out)


def fiber_from(doc: dict) -> FiberSpec:
    fiber = FiberSpec(**doc.get("fiber", {}))
    if not doc.get("isrs", True):
        fiber = fiber.replace(Cr_per_W_km_THz=0.0)
    return fiber


def load_from(doc: dict, power_dbm: float | None = None) -> SpectralLoad:
    ch = doc.get("channels", {"n": 251})
    if "explicit" in ch:
        items = ch["explicit"]
        return SpectralLoad([c["f_rel_Hz"] for c in items], [c["bandwidth_Hz"] for c in items],
                            [dbm_to_watt(c["power_dbm"] if power_dbm is None else power_dbm) for c in items])
    p = ch.get("power_dbm", 0.0) if power_dbm is None else power_dbm
    return SpectralLoad.uniform(ch["n"], ch.get("spacing_Hz", 40.005e9), ch.get("bandwidth_Hz", 40.004e9),
                                dbm_to_watt(p))


def cf_config_from(doc: dict) -> ClosedFormConfig:
    return ClosedFormConfig(**doc.get("closed_form", {}))


def quad_config_from(doc: dict) -> QuadratureConfig:
    q = dict(doc.get("quadrature", {}))
    q.pop("max_integral_evals", None)
    q.setdefault("estimate_error", False)
    return QuadratureConfig(**q)


def ssfm_config_from(doc: dict, seed: int, threads: int) -> tuple[SsfmConfig, dict]:
    s = dict(doc.get("ssfm", {}))
    extra = {k: s.pop(k) for k in ("power_dbm", "dump_constellations", "noise_snr_db") if k in s}
    cfg = SsfmConfig(**s, rng_seed=seed, threads=threads, keep_constellations=bool(extra.get("dump_constellations")))
    return cfg, extra


def coi_indices(doc: dict, load: SpectralLoad) -> np.ndarray:
    if "coi_indices" in doc:
        idx = np.asarray(doc["coi_indices"], dtype=int)
        if np.any(idx >= len(load)):
            raise ConfigError("coi index outside the channel list", "coi_indices")
        return idx
    return np.flatnonzero(load.powers > 0)
