import numpy as np
import pytest

from semeplan.propagation import (DbMeta, FieldGrid, MapDatabase,
                                  fields_to_power_watts,
                                  MissingEntryError, build_database,
                                  database_fingerprint, load_database,
                                  power_map_dbm, power_map_watts,
                                  received_power, reference_field,
                                  point_power_dbm, save_database,
                                  sector_gain, see_contribution)
from semeplan.scenario import BtsSector, scenario_from_dict
from semeplan.units import FREE_SPACE_IMPEDANCE, watts_to_dbm

SECTOR = BtsSector(azimuth_deg=30.0, downtilt_deg=5.0, tx_power_w=20.0,
                   max_gain_dbi=16.3, az_beamwidth_deg=65.0,
                   el_beamwidth_deg=10.0)


def _direction(az_deg, el_deg):
    az, el = np.radians(az_deg), np.radians(el_deg)
    return np.array([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az),
                     np.sin(el)])


def open_field(nx=12, ny=12, sectors=None, buildings=(), sites=(),
               catalog=(), tx=20.0):
    sectors = sectors or [{"azimuth_deg": 0.0, "downtilt_deg": 0.0,
                           "tx_power_w": tx, "max_gain_dbi": 16.3,
                           "az_beamwidth_deg": 65.0, "el_beamwidth_deg": 10.0}]
    return scenario_from_dict({
        "frequency_hz": 3.5e9,
        "grid": {"origin": [0.0, 0.0], "spacing_m": 5.0, "nx": nx, "ny": ny,
                 "height_m": 1.5},
        "bts": {"position": [0.0, 0.0, 1.5],
                "time_instants": [{"sectors": sectors}]},
        "buildings": list(buildings),
        "catalog": list(catalog),
        "sites": list(sites),
    })


def test_sector_gain_boresight_exact():
    boresight = _direction(30.0, -5.0)
    assert sector_gain(SECTOR, boresight) == pytest.approx(16.3, abs=1e-12)


def test_sector_gain_half_power_at_half_beamwidth():
    direction = _direction(30.0 + 65.0 / 2.0, -5.0)
    assert sector_gain(SECTOR, direction) == pytest.approx(16.3 - 3.0, abs=1e-9)


def test_sector_gain_backlobe_floor():
    assert sector_gain(SECTOR, -_direction(30.0, -5.0)) \
        == pytest.approx(16.3 - 30.0, abs=1e-9)


def test_free_space_follows_friis():
    # Along boresight the engine must match the Friis formula to 0.01 dB
    # from 10 m to 10 km.
    sc = open_field()
    distances = np.logspace(1, 4, 25)
    points = np.column_stack([distances, np.zeros(25), np.full(25, 1.5)])
    got = point_power_dbm(sc, points)[0]
    eirp_dbm = watts_to_dbm(20.0) + 16.3
    friis = eirp_dbm - 20.0 * np.log10(4.0 * np.pi * distances / sc.wavelength)
    assert np.abs(got - friis).max() < 0.01


def test_doubling_distance_costs_6db():
    sc = open_field()
    pts = np.array([[100.0, 0.0, 1.5], [200.0, 0.0, 1.5]])
    p = point_power_dbm(sc, pts)[0]
    assert p[0] - p[1] == pytest.approx(6.0206, abs=1e-3)


def test_single_wall_costs_exactly_wall_loss():
    slab = {"footprint": [[40.0, -10.0], [44.0, -10.0], [44.0, 10.0],
                          [40.0, 10.0]], "height_m": 50.0}
    free = open_field()
    walled = open_field(buildings=[slab])
    pts = np.array([[100.0, 0.0, 1.5]])
    p_free = point_power_dbm(free, pts)[0, 0]
    p_wall = point_power_dbm(walled, pts)[0, 0]
    assert p_free - p_wall == pytest.approx(20.0, abs=1e-9)


def test_reference_field_finite_and_shaped():
    sc = open_field(nx=8, ny=6)
    ref = reference_field(sc)
    assert ref.values.shape == (1, 3, 6, 8)
    assert np.isfinite(ref.values).all()


def _db_for(sc, assignments, mode="coherent"):
    return build_database(sc, assignments, mode=mode)


def _targets(sc, point):
    return np.tile(np.asarray(point, float), (sc.time_instants, 1))


def test_all_zero_chromosome_reproduces_reference():
    sc = open_field(catalog=[{"kind": "SR", "install_cost": 3000.0,
                              "energy_w": 20.0, "tx_power_dbm": 24.0,
                              "gain_dbi": 12.0, "sensitivity_dbm": -60.0}],
                    sites=[{"position": [20.0, 20.0, 6.0], "mount": "pole"}])
    assignments = {(0, 1): _targets(sc, [50.0, 50.0, 1.5])}
    for mode in ("coherent", "incoherent"):
        db = _db_for(sc, assignments, mode)
        zero = power_map_watts(db, [0], 0)
        direct = (np.abs(db.reference.values[0]) ** 2).sum(axis=0) \
            * sc.wavelength ** 2 / (8.0 * np.pi * FREE_SPACE_IMPEDANCE)
        np.testing.assert_allclose(zero, direct, rtol=1e-12)


def test_incoherent_mode_is_monotone():
    sc = open_field(
        catalog=[{"kind": "IAB", "install_cost": 7500.0, "energy_w": 350.0,
                  "tx_power_dbm": 33.0, "gain_dbi": 12.0,
                  "sensitivity_dbm": -80.0}],
        sites=[{"position": [20.0, 20.0, 6.0], "mount": "pole"},
               {"position": [40.0, 10.0, 6.0], "mount": "pole"}])
    assignments = {(0, 1): _targets(sc, [50.0, 50.0, 1.5]),
                   (1, 1): _targets(sc, [30.0, 50.0, 1.5])}
    db = _db_for(sc, assignments, "incoherent")
    base = power_map_watts(db, [1, 0], 0)
    more = power_map_watts(db, [1, 1], 0)
    assert (more >= base).all()


def test_ems_peak_power_matches_aperture_gain_budget():
    # Peak re-radiated power = incident power + 10 log10(4 pi A / lambda^2)
    # minus the free-space spreading to the target (efficiency 1).
    catalog = [{"kind": "SP-EMS", "install_cost": 500.0, "energy_w": 0.0,
                "reflection_efficiency": 1.0, "aperture_m2": 4.58}]
    site = {"position": [25.0, 0.0, 1.5], "mount": "pole",
            "admissible_kinds": ["SP-EMS"]}
    sc = open_field(catalog=catalog, sites=[site])
    target = np.array([25.0, 30.0, 1.5])  # grid cell (iy=6, ix=5)
    grid_cell = (6, 5)
    contribution = see_contribution(sc, sc.sites[0], sc.catalog[0],
                                    _targets(sc, target))
    peak_w = (np.abs(contribution.values[0][:, grid_cell[0], grid_cell[1]]) ** 2
              ).sum() * sc.wavelength ** 2 / (8 * np.pi * FREE_SPACE_IMPEDANCE)
    incident = point_power_dbm(sc, np.array(site["position"]))[0, 0]
    gain_db = 10.0 * np.log10(4.0 * np.pi * 4.58 / sc.wavelength ** 2)
    spreading = 20.0 * np.log10(4.0 * np.pi * 30.0 / sc.wavelength)
    expected = incident + gain_db - spreading
    assert watts_to_dbm(peak_w) == pytest.approx(expected, abs=1e-9)


def test_repeater_below_sensitivity_is_silent():
    catalog = [{"kind": "SR", "install_cost": 3000.0, "energy_w": 20.0,
                "tx_power_dbm": 24.0, "gain_dbi": 12.0,
                "sensitivity_dbm": 30.0}]  # unreachable threshold
    site = {"position": [25.0, 0.0, 6.0], "mount": "pole"}
    sc = open_field(catalog=catalog, sites=[site])
    contribution = see_contribution(sc, sc.sites[0], sc.catalog[0],
                                    _targets(sc, [40.0, 40.0, 1.5]))
    assert np.all(contribution.values == 0.0)


def test_reconfigurable_skin_same_target_same_field():
    catalog = [{"kind": "RP-EMS", "install_cost": 750.0, "energy_w": 2.0,
                "reflection_efficiency": 0.8, "aperture_m2": 4.58}]
    doc = {
        "frequency_hz": 3.5e9,
        "grid": {"origin": [0.0, 0.0], "spacing_m": 5.0, "nx": 10, "ny": 10,
                 "height_m": 1.5},
        "bts": {"position": [0.0, 0.0, 10.0], "time_instants": [
            {"sectors": [{"azimuth_deg": 0.0, "downtilt_deg": 2.0,
                          "tx_power_w": 20.0, "max_gain_dbi": 16.3}]},
            {"sectors": [{"azimuth_deg": 0.0, "downtilt_deg": 2.0,
                          "tx_power_w": 20.0, "max_gain_dbi": 16.3}]},
        ]},
        "catalog": catalog,
        "sites": [{"position": [20.0, 5.0, 6.0], "mount": "pole",
                   "admissible_kinds": ["RP-EMS"]}],
    }
    sc = scenario_from_dict(doc)
    target = [40.0, 25.0, 1.5]
    contribution = see_contribution(sc, sc.sites[0], sc.catalog[0],
                                    np.array([target, target]))
    np.testing.assert_array_equal(contribution.values[0],
                                  contribution.values[1])


def test_database_entry_counting(coverable):
    # 2 sites x 4 kinds feasible in the coverable toy
    db = coverable["dbs"]["coherent"]
    assert len(db.entries) == 8
    assert sorted(db.entries) == [(n, s) for n in range(2) for s in (1, 2, 3, 4)]


def test_database_determinism_and_roundtrip(tmp_path, coverable):
    c = coverable
    assignments = c["plan"].db_assignments(c["rois"], c["scenario"].grid.height)
    db1 = build_database(c["scenario"], assignments, mode="coherent")
    db2 = build_database(c["scenario"], assignments, mode="coherent")
    assert database_fingerprint(db1) == database_fingerprint(db2)
    p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
    save_database(db1, p1)
    save_database(db2, p2)
    assert p1.read_bytes() == p2.read_bytes()

    loaded = load_database(p1)
    assert loaded.meta == db1.meta
    assert sorted(loaded.entries) == sorted(db1.entries)
    np.testing.assert_allclose(loaded.reference.values, db1.reference.values,
                               rtol=1e-6)
    key = sorted(db1.entries)[0]
    np.testing.assert_allclose(loaded.entries[key].values,
                               db1.entries[key].values, rtol=1e-5, atol=1e-12)


def test_missing_entry_raises(coverable):
    db = coverable["dbs"]["coherent"]
    with pytest.raises(MissingEntryError, match="site 1"):
        received_power(db, [0, 9], (0, 0), 0)


def test_database_with_no_feasible_pairs_keeps_reference():
    sc = open_field(nx=6, ny=6)
    db = build_database(sc, {})
    assert db.entries == {}
    assert db.reference.values.shape == (1, 3, 6, 6)
    np.testing.assert_allclose(power_map_watts(db, [], 0),
                               fields_to_power_watts(db.reference.values[0],
                                                     sc.wavelength))


def test_load_database_rejects_foreign_files(tmp_path):
    from semeplan.propagation import DatabaseError
    bogus = tmp_path / "bogus.bin"
    bogus.write_bytes(b"definitely not a database")
    with pytest.raises(DatabaseError, match="not a map database"):
        load_database(bogus)
    with pytest.raises(DatabaseError, match="cannot read"):
        load_database(tmp_path / "missing.bin")


def test_destructive_interference_cancels_exactly():
    sc = open_field(nx=4, ny=4)
    ref = reference_field(sc)
    anti = FieldGrid(grid=sc.grid, values=-ref.values.copy())
    db = MapDatabase(grid=sc.grid, wavelength=sc.wavelength, reference=ref,
                     entries={(0, 1): anti},
                     meta=DbMeta(scenario_hash="x", mode="coherent"))
    assert power_map_watts(db, [1], 0).max() == 0.0
    assert received_power(db, [1], (2, 2), 0) == -np.inf


def test_power_map_dbm_matches_watts(coverable):
    db = coverable["dbs"]["coherent"]
    genes = [1, 0]
    w = power_map_watts(db, genes, 0)
    d = power_map_dbm(db, genes, 0)
    np.testing.assert_allclose(d, watts_to_dbm(w), rtol=1e-12)
    iy, ix = 3, 7
    assert received_power(db, genes, (iy, ix), 0) == pytest.approx(d[iy, ix])
