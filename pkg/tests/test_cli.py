import csv
import json

import numpy as np
import pytest

from isrs_gn import cli, config

BASE = {"schema_version": 1, "command": "closed_form", "coi_indices": [0, 125, 250]}
SSFM = {"schema_version": 1, "command": "ssfm", "seed": 5, "fiber": {"length_m": 20e3}, "ssfm": {
    "n_channels": 3, "n_symbols": 256, "samples_per_symbol": 16, "n_realizations": 1, "dump_constellations": True}}


def run(tmp_path, doc, *extra, name="cfg.json", out="out"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return cli.main(["--config", str(p), "--out", str(tmp_path / out), *extra])


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


@pytest.mark.parametrize("name", config.PRESETS)
def test_presets_validate(name):
    doc = config.load_preset(name)
    assert doc["schema_version"] == config.SCHEMA_VERSION


@pytest.mark.parametrize("doc,path", [
    ({"command": "closed_form"}, ""),
    ({"schema_version": 2, "command": "closed_form"}, "schema_version"),
    ({"schema_version": 1, "command": "closed_form", "bogus": 1}, ""),
    ({"schema_version": 1, "command": "closed_form", "fiber": {"alpha": 0.2}}, "fiber"),
    ({"schema_version": 1, "command": "closed_form", "channels": {"n": 0}}, "channels"),
    ({"schema_version": 1, "command": "closed_form", "channels": {"explicit": []}}, "channels"),
    ({"schema_version": 1, "command": "teleport"}, "command"),
])
def test_validation_errors(tmp_path, capsys, doc, path):
    assert run(tmp_path, doc) == cli.EXIT_VALIDATION
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "validation" and err["path"].startswith(path)


def test_invalid_json_and_missing_source(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert cli.main(["--config", str(p)]) == cli.EXIT_VALIDATION
    assert cli.main([]) == cli.EXIT_VALIDATION
    assert cli.main(["--preset", "fig4", "--seed", "-1", "--out", str(tmp_path / "o")]) == cli.EXIT_VALIDATION


def test_threads_resolution(monkeypatch):
    monkeypatch.delenv("ISRS_GN_THREADS", raising=False)
    assert cli.resolve_threads(None) == 1
    monkeypatch.setenv("ISRS_GN_THREADS", "3")
    assert cli.resolve_threads(None) == 3
    assert cli.resolve_threads(2) == 2
    monkeypatch.setenv("ISRS_GN_THREADS", "many")
    with pytest.raises(config.ConfigError):
        cli.resolve_threads(None)


def test_closed_form_run_and_manifest(tmp_path):
    assert run(tmp_path, BASE) == 0
    out = tmp_path / "out"
    rows = read_csv(out / "nli.csv")
    assert list(rows[0]) == list(cli.NliReport.COLUMNS) and len(rows) == 3
    man = json.loads((out / "manifest.json").read_text())
    assert man["config_sha256"] == config.canonical_hash(man["config"])
    assert set(man["versions"]) >= {"isrs_gn", "numpy", "scipy", "python"}
    assert man["outputs"]["nli.csv"] == cli._sha(out / "nli.csv")
    # repeating from the manifest reproduces every output
    assert cli.main(["--config", str(out / "manifest.json"), "--out", str(tmp_path / "again")]) == 0
    again = json.loads((tmp_path / "again" / "manifest.json").read_text())
    assert again["outputs"] == man["outputs"]


def test_isrs_flag_matches_zero_raman_fiber(tmp_path):
    assert run(tmp_path, dict(BASE, isrs=False), out="a") == 0
    assert run(tmp_path, dict(BASE, fiber={"Cr_per_W_km_THz": 0.0}), out="b") == 0
    assert (tmp_path / "a" / "nli.csv").read_bytes() == (tmp_path / "b" / "nli.csv").read_bytes()


def test_spectrum_run(tmp_path):
    doc = {"schema_version": 1, "command": "spectrum", "engine": "cf", "closed_form": {"epsilon_mode": "incoherent"}}
    assert run(tmp_path, doc) == 0
    rows = read_csv(tmp_path / "out" / "spectrum.csv")
    assert len(rows) == 251
    assert float(rows[0]["eta_cf_db"]) > float(rows[-1]["eta_cf_db"])


def test_budget_guard(tmp_path, capsys):
    doc = {"schema_version": 1, "command": "spectrum", "engine": "integral", "quadrature": {"max_integral_evals": 5}}
    assert run(tmp_path, doc) == cli.EXIT_BUDGET
    assert json.loads(capsys.readouterr().err)["error"] == "budget"
    big = dict(SSFM, ssfm={"n_symbols": 2**15})
    assert run(tmp_path, big) == cli.EXIT_BUDGET


def test_ssfm_run_is_reproducible(tmp_path):
    assert run(tmp_path, SSFM) == 0
    out = tmp_path / "out"
    rows = read_csv(out / "ssfm.csv")
    assert len(rows) == 3 and "snr_db" in rows[0]
    raw = (out / "constellations.bin").read_bytes()
    assert raw[:8] == b"ISRSCST1" and len(raw) == 16 + 3 * 256 * 2 * 8
    assert cli.main(["--config", str(out / "manifest.json"), "--out", str(tmp_path / "again")]) == 0
    for f in ("ssfm.csv", "constellations.bin", "ssfm.json"):
        assert (out / f).read_bytes() == (tmp_path / "again" / f).read_bytes()


def test_engine_override_selects_ssfm(tmp_path):
    doc = dict(SSFM, command="closed_form")
    assert run(tmp_path, doc, "--engine", "ssfm") == 0
    assert (tmp_path / "out" / "ssfm.csv").exists()


def test_seed_override(tmp_path):
    assert run(tmp_path, SSFM, "--seed", "9") == 0
    man = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert man["seed"] == 9 and man["config"]["seed"] == 9


def test_coherence_preset(tmp_path):
    assert cli.main(["--preset", "fig4", "--out", str(tmp_path)]) == 0
    res = json.loads((tmp_path / "coherence.json").read_text())
    assert res["epsilon_auto"] == pytest.approx(0.15, abs=0.03)
    assert res["mean_gain_vs_first_db"]["eta_cf_eps0.15_db"] == pytest.approx(0.2, abs=0.1)


def test_sweep_command(tmp_path):
    doc = {"schema_version": 1, "command": "sweep", "n_spans": 2, "coi_indices": [125],
           "power_dbm_list": list(np.arange(-5.0, 5.01, 0.5))}
    assert run(tmp_path, doc) == 0
    opt = read_csv(tmp_path / "out" / "sweep_optimum.csv")
    assert abs(float(opt[0]["p_opt_dbm"])) <= 1.0


def test_print_schema(capsys):
    assert cli.main(["--print-schema"]) == 0
    assert json.loads(capsys.readouterr().out)["required"] == ["schema_version", "command"]


def test_config_helpers():
    doc = config.validate({"schema_version": 1, "command": "closed_form",
                           "channels": {"explicit": [{"f_rel_Hz": 0.0, "bandwidth_Hz": 32e9, "power_dbm": 1.0}]}})
    load = config.load_from(doc)
    assert len(load) == 1 and load.powers[0] == pytest.approx(10**0.1 * 1e-3)
    assert config.canonical_hash(doc) == config.canonical_hash(json.loads(json.dumps(doc)))
    with pytest.raises(config.ConfigError):
        config.coi_indices({"coi_indices": [5]}, load)
    with pytest.raises(config.ConfigError):
        config.load_preset("fig9")
