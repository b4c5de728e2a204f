import math

import numpy as np
import pytest

from isrs_gn.closed_form import ClosedFormConfig, eta_spm_cf
from isrs_gn.network import (ChannelPlan, NliReport, NoiseConfig, Topology, ase_power, evaluate_lightpath,
                             example_lightpath, generate_scenario, sweep_launch_power)
from isrs_gn.ssfm import BudgetError
from isrs_gn.units import PLANCK

INC = ClosedFormConfig("incoherent")


@pytest.fixture(scope="module")
def lightpath():
    return example_lightpath()


def test_example_topology(lightpath):
    topo, path = lightpath
    spans = [len(topo.edges[e].spans) for e in path]
    assert spans == [2, 2, 1, 1]
    assert sum(s.length_m for e in path for s in topo.edges[e].spans) == pytest.approx(600e3)
    with pytest.raises(ValueError):
        topo.path_edges(["A-R1", "R2-R3"])
    with pytest.raises(KeyError):
        topo.path_edges(["nope"])


def test_topology_from_dict():
    doc = {"nodes": ["X", "Y"], "edges": [{"a": "X", "b": "Y", "spans": [{"length_m": 50e3}]}]}
    t = Topology.from_dict(doc)
    assert list(t.edges) == ["X-Y"] and t.edges["X-Y"].spans[0].length_m == 50e3


def test_scenario_determinism(lightpath):
    topo, path = lightpath
    a = generate_scenario(topo, path, 0.8, seed=3)
    b = generate_scenario(topo, path, 0.8, seed=3)
    c = generate_scenario(topo, path, 0.8, seed=4)
    assert np.array_equal(a.occupancy, b.occupancy) and np.array_equal(a.power_offset_db, b.power_offset_db)
    assert not np.array_equal(a.occupancy, c.occupancy)
    for e in range(len(path)):
        la, lb = a.edge_load(e), b.edge_load(e)
        assert np.array_equal(la.powers, lb.powers)


def test_scenario_structure(lightpath):
    topo, path = lightpath
    sc = generate_scenario(topo, path, 0.8, seed=0)
    assert sc.coi_slots.size == 51
    assert np.all(sc.occupancy[:, sc.coi_slots])
    assert np.all(sc.occupancy.sum(axis=1) == round(0.8 * 251))
    assert np.all(np.abs(sc.power_offset_db) <= 1.0) and np.all(sc.power_offset_db[:, sc.coi_slots] == 0)
    assert np.all((sc.predispersion_m >= 0) & (sc.predispersion_m <= 1000e3))
    # 80 % of the interferers are replaced at each ROADM
    for e in range(1, len(path)):
        n_int = sc.occupancy[e - 1].sum() - 51
        assert len(sc.events[e]["dropped"]) == round(0.8 * n_int)


def test_utilization_ratio_over_seeds(lightpath):
    topo, path = lightpath
    lo = np.mean([generate_scenario(topo, path, 0.8, seed=s).occupancy.sum(axis=1).mean() for s in range(100)])
    hi = np.mean([generate_scenario(topo, path, 0.9, seed=s).occupancy.sum(axis=1).mean() for s in range(100)])
    assert hi / lo == pytest.approx(0.9 / 0.8, rel=0.02)


def test_coi_only_scenario_has_no_interferers(lightpath):
    topo, path = lightpath
    sc = generate_scenario(topo, path, 51 / 251, drop_fraction=0.3, seed=1)
    assert np.all(sc.occupancy.sum(axis=1) == 51)
    with pytest.raises(ValueError):
        generate_scenario(topo, path, 0.1)


def test_lone_channel_reduces_to_spm(lightpath):
    topo, path = lightpath
    plan = ChannelPlan()
    sc = generate_scenario(topo, path, 1 / 251, seed=0, coi_every=300)
    rep = evaluate_lightpath(sc, topo, cf_config=INC, noise=NoiseConfig(enabled=False))
    assert rep.eta_xpm[0] == 0.0
    spans = [s for e in path for s in topo.edges[e].spans]
    ref = sum(eta_spm_cf(plan.freqs[0], plan.bandwidth_Hz, s, 1e-3) for s in spans)
    assert rep.eta_total[0] == pytest.approx(ref, rel=1e-12)
    assert rep.snr[0] == pytest.approx(1.0 / (ref * 1e-6), rel=1e-12)


def test_report_consistency(lightpath, tmp_path):
    topo, path = lightpath
    sc = generate_scenario(topo, path, 0.8, seed=2)
    rep = evaluate_lightpath(sc, topo, cf_config=INC)
    assert rep.eta_per_edge.sum(axis=1) == pytest.approx(rep.eta_total, rel=1e-12)
    assert rep.p_nli == pytest.approx(rep.eta_total * 1e-9)
    assert 4.0 < rep.delta_rho_db_max < 7.0 and not rep.validity_warn
    rep.write_csv(tmp_path / "n.csv")
    lines = (tmp_path / "n.csv").read_text().splitlines()
    assert lines[0].split(",") == list(NliReport.COLUMNS) and len(lines) == 52
    off = evaluate_lightpath(sc, topo, cf_config=INC, isrs=False)
    change = 10 * np.log10(rep.eta_total / off.eta_total)
    assert change[0] > 0 > change[-1]


def test_more_load_more_nli(lightpath):
    topo, path = lightpath
    a = evaluate_lightpath(generate_scenario(topo, path, 0.5, seed=0), topo, cf_config=INC)
    b = evaluate_lightpath(generate_scenario(topo, path, 0.95, seed=0), topo, cf_config=INC)
    assert np.mean(b.eta_total) > np.mean(a.eta_total)


def test_integral_engine_guards(lightpath):
    topo, path = lightpath
    sc = generate_scenario(topo, path, 0.8, seed=0)
    with pytest.raises(BudgetError):
        evaluate_lightpath(sc, topo, engine="integral", max_integral_evals=10)
    with pytest.raises(ValueError):
        evaluate_lightpath(sc, topo, coi_subset=[1])
    with pytest.raises(ValueError):
        evaluate_lightpath(sc, topo, engine="ssfm")


def test_ase_power():
    hand = 10**0.5 * (100 - 1) * 6.62607015e-34 * 193.4e12 * 40.004e9
    assert ase_power(5.0, 20.0, 193.4e12, 40.004e9) == pytest.approx(hand, rel=1e-12)
    assert ase_power(5.0, 1e-12, 193.4e12, 40e9) == pytest.approx(0.0, abs=1e-20)
    assert ase_power(5.0, 20.0, 193.4e12, 80e9) == pytest.approx(2 * ase_power(5.0, 20.0, 193.4e12, 40e9))
    assert PLANCK == 6.62607015e-34


def test_sweep_cube_root_law(fiber):
    fib = fiber.replace(Cr_per_W_km_THz=0.0)
    grid = np.arange(-6.0, 6.0001, 0.01)
    a = sweep_launch_power(fib, 3, grid, cf_config=INC, coi_idx=[125])
    b = sweep_launch_power(fib, 3, grid, cf_config=INC, coi_idx=[125], p_ase_scale=2.0)
    eta = a.eta[0, 0]
    g = fiber.alpha_db_per_km * fiber.length_m / 1e3
    p_ase = 3 * ase_power(5.0, g, fiber.ref_frequency_Hz + a.freqs[0], 40.004e9)
    p_opt = 10 * math.log10((p_ase / (2 * eta)) ** (1 / 3) * 1e3)
    assert a.optimum_dbm[0] == pytest.approx(p_opt, abs=0.011)
    assert b.optimum_dbm[0] - a.optimum_dbm[0] == pytest.approx(10 * math.log10(2) / 3, abs=0.021)
    with pytest.raises(ValueError):
        sweep_launch_power(fib, 1, [0.0, 1.0])


def test_central_channel_optimum(fiber):
    res = sweep_launch_power(fiber, 6, np.linspace(-4, 4, 161), coi_idx=[125])
    assert res.optimum_dbm[0] == pytest.approx(0.0, abs=0.5)
