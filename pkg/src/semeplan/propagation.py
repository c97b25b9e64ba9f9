"""Simplified propagation engine and the precomputed field database.

The engine models every radiator as a directive spherical-wave source:
free-space spreading, a quadratic gain rolloff with a 30 dB front-to-back
floor, and a fixed per-building penetration loss when the plan-view path
crosses a footprint below its height.  Device contributions are stored per
(site, kind) so that any deployment evaluates as a field superposition
over the reference map.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .geometry import count_blocking_footprints
from .scenario import BtsSector, CandidateSite, GridSpec, Scenario, SeeType
from .units import FREE_SPACE_IMPEDANCE, dbm_to_watts, watts_to_dbm

DEFAULT_WALL_LOSS_DB = 20.0
BACKLOBE_FLOOR_DB = 30.0
COMBINING_MODES = ("coherent", "incoherent")

_DB_MAGIC = b"SEMEDB01"


class DatabaseError(RuntimeError):
    """Database file problems or database/chromosome mismatches."""


class MissingEntryError(DatabaseError):
    """A chromosome references a (site, kind) pair absent from the database."""


# ---------------------------------------------------------------------------
# Antenna patterns


def _wrap_deg(angle):
    return (np.asarray(angle, dtype=float) + 180.0) % 360.0 - 180.0


@dataclass(frozen=True)
class SectorPattern:
    """Sectorized panel: independent quadratic rolloff in azimuth and elevation."""
    azimuth_deg: float
    downtilt_deg: float
    max_gain_dbi: float
    az_beamwidth_deg: float
    el_beamwidth_deg: float

    def gain_dbi(self, directions: np.ndarray) -> np.ndarray:
        d = np.atleast_2d(directions)
        az = np.degrees(np.arctan2(d[:, 1], d[:, 0]))
        el = np.degrees(np.arcsin(np.clip(d[:, 2], -1.0, 1.0)))
        d_az = _wrap_deg(az - self.azimuth_deg)
        d_el = el - (-self.downtilt_deg)
        att = 12.0 * (d_az / self.az_beamwidth_deg) ** 2 \
            + 12.0 * (d_el / self.el_beamwidth_deg) ** 2
        return self.max_gain_dbi - np.minimum(att, BACKLOBE_FLOOR_DB)


@dataclass(frozen=True)
class PencilBeam:
    """Symmetric beam whose width follows from the directive gain."""
    boresight: tuple[float, float, float]
    max_gain_dbi: float

    @property
    def beamwidth_deg(self) -> float:
        # Classic aperture estimate: G ~ 41253 / (bw_az * bw_el) in degrees.
        g_lin = 10.0 ** (self.max_gain_dbi / 10.0)
        return float(np.sqrt(41253.0 / max(g_lin, 1.0)))

    def gain_dbi(self, directions: np.ndarray) -> np.ndarray:
        d = np.atleast_2d(directions)
        b = np.asarray(self.boresight, dtype=float)
        b = b / np.linalg.norm(b)
        cos_psi = np.clip(d @ b, -1.0, 1.0)
        psi = np.degrees(np.arccos(cos_psi))
        att = 12.0 * (psi / self.beamwidth_deg) ** 2
        return self.max_gain_dbi - np.minimum(att, BACKLOBE_FLOOR_DB)


def sector_pattern(sector: BtsSector) -> SectorPattern:
    return SectorPattern(
        azimuth_deg=sector.azimuth_deg,
        downtilt_deg=sector.downtilt_deg,
        max_gain_dbi=sector.max_gain_dbi,
        az_beamwidth_deg=sector.az_beamwidth_deg,
        el_beamwidth_deg=sector.el_beamwidth_deg,
    )


def sector_gain(sector: BtsSector, direction) -> float:
    """Gain of a BTS sector toward a normalized direction, in dBi."""
    return float(sector_pattern(sector).gain_dbi(np.asarray(direction, float))[0])


# ---------------------------------------------------------------------------
# Spherical-wave sources


@dataclass(frozen=True)
class _Source:
    position: np.ndarray       # (3,)
    power_w: float             # power fed into the pattern
    pattern: SectorPattern | PencilBeam
    extra_path_m: float = 0.0  # pre-travelled path, adds phase only


def _polarization(directions: np.ndarray) -> np.ndarray:
    """Vertical transverse unit vectors, (M, 3)."""
    z = np.array([0.0, 0.0, 1.0])
    p = z - directions * directions[:, 2:3]
    norms = np.linalg.norm(p, axis=1)
    degenerate = norms < 1e-9
    if degenerate.any():
        x = np.array([1.0, 0.0, 0.0])
        alt = x - directions[degenerate] * directions[degenerate, 0:1]
        alt /= np.linalg.norm(alt, axis=1, keepdims=True)
        p[degenerate] = alt
        norms[degenerate] = 1.0
    return p / norms[:, None]


def _radiate(sources: Sequence[_Source], points: np.ndarray, wavelength: float,
             footprints, wall_loss_db: float) -> np.ndarray:
    """Complex field components (3, M) radiated by the sources at the points."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    total = np.zeros((3, len(points)), dtype=np.complex128)
    for src in sources:
        if src.power_w <= 0.0:
            continue
        delta = points - src.position
        dist = np.linalg.norm(delta, axis=1)
        dist = np.maximum(dist, 1e-6)
        directions = delta / dist[:, None]
        gain_db = src.pattern.gain_dbi(directions)
        eirp = src.power_w * 10.0 ** (gain_db / 10.0)
        walls = count_blocking_footprints(src.position, points, footprints)
        loss = 10.0 ** (-wall_loss_db * walls / 20.0)
        amplitude = np.sqrt(2.0 * FREE_SPACE_IMPEDANCE * eirp / (4.0 * np.pi)) \
            / dist * loss
        phase = np.exp(-2j * np.pi * (dist + src.extra_path_m) / wavelength)
        total += (amplitude * phase) * _polarization(directions).T
    return total


def _bts_sources(scenario: Scenario, t: int) -> list[_Source]:
    pos = np.asarray(scenario.bts.position, dtype=float)
    return [
        _Source(position=pos, power_w=sector.tx_power_w,
                pattern=sector_pattern(sector))
        for sector in scenario.bts.sectors[t]
    ]


# ---------------------------------------------------------------------------
# Field grids


@dataclass(eq=False)
class FieldGrid:
    """Complex field samples, indexed [t][component xyz][iy][ix]."""
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        expected = (None, 3, self.grid.ny, self.grid.nx)
        shape = self.values.shape
        if len(shape) != 4 or shape[1:] != expected[1:]:
            raise ValueError(f"field grid shape {shape} does not match the grid spec")
        if not np.isfinite(self.values).all():
            raise ValueError("field grid contains non-finite values")

    @property
    def time_instants(self) -> int:
        return self.values.shape[0]


def fields_to_power_watts(values: np.ndarray, wavelength: float,
                          rx_gain_lin: float = 1.0) -> np.ndarray:
    """Received power for an isotropic receiver from complex field components.

    `values` has the component axis first; the result drops that axis.
    """
    intensity = np.abs(values) ** 2
    return intensity.sum(axis=0) * wavelength ** 2 * rx_gain_lin \
        / (8.0 * np.pi * FREE_SPACE_IMPEDANCE)


def reference_field(scenario: Scenario, *,
                    wall_loss_db: float = DEFAULT_WALL_LOSS_DB) -> FieldGrid:
    """Field of the BTS alone over the grid, one slab per time instant."""
    grid = scenario.grid
    points = grid.centers()
    footprints = scenario.footprints()
    values = np.empty((scenario.time_instants, 3, grid.ny, grid.nx),
                      dtype=np.complex128)
    for t in range(scenario.time_instants):
        flat = _radiate(_bts_sources(scenario, t), points, scenario.wavelength,
                        footprints, wall_loss_db)
        values[t] = flat.reshape(3, grid.ny, grid.nx)
    return FieldGrid(grid=grid, values=values)


def point_power_dbm(scenario: Scenario, points, *,
                    wall_loss_db: float = DEFAULT_WALL_LOSS_DB) -> np.ndarray:
    """BTS-only received power at arbitrary 3D points, shape (T, M) in dBm."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    footprints = scenario.footprints()
    out = np.empty((scenario.time_instants, len(points)))
    for t in range(scenario.time_instants):
        flat = _radiate(_bts_sources(scenario, t), points, scenario.wavelength,
                        footprints, wall_loss_db)
        out[t] = watts_to_dbm(fields_to_power_watts(flat, scenario.wavelength))
    return out


def see_contribution(scenario: Scenario, site: CandidateSite, kind: SeeType,
                     roi_targets: Sequence, *,
                     wall_loss_db: float = DEFAULT_WALL_LOSS_DB) -> FieldGrid:
    """Field radiated by one device at one site, one slab per time instant.

    `roi_targets` gives the aim point for each time instant (the covered
    region's barycenter at receiver height).  Passive skins re-radiate the
    incident BTS power through an aperture-gain beam; the static variant
    keeps a single pointing at the time-averaged target, the
    reconfigurable one re-aims per instant.  Repeaters forward with their
    own power when the backhaul power clears the sensitivity threshold;
    access-backhaul nodes radiate regardless, as regenerative micro cells.
    """
    targets = np.asarray(roi_targets, dtype=float)
    if targets.ndim != 2 or targets.shape[0] != scenario.time_instants:
        raise ValueError("roi_targets must provide one 3D point per time instant")
    grid = scenario.grid
    points = grid.centers()
    footprints = scenario.footprints()
    wavelength = scenario.wavelength
    position = np.asarray(site.position, dtype=float)
    bts_pos = np.asarray(scenario.bts.position, dtype=float)
    backhaul_m = float(np.linalg.norm(position - bts_pos))
    incident_dbm = point_power_dbm(scenario, position[None, :],
                                   wall_loss_db=wall_loss_db)[:, 0]

    values = np.zeros((scenario.time_instants, 3, grid.ny, grid.nx),
                      dtype=np.complex128)
    for t in range(scenario.time_instants):
        if kind.is_passive:
            aim = targets.mean(axis=0) if kind.kind == "SP-EMS" else targets[t]
            gain = 4.0 * np.pi * kind.aperture_m2 / wavelength ** 2 \
                * kind.reflection_efficiency
            power_w = float(dbm_to_watts(incident_dbm[t]))
            extra = backhaul_m
        elif kind.kind == "SR":
            if incident_dbm[t] < kind.sensitivity_dbm:
                continue
            aim = targets[t]
            gain = 10.0 ** (kind.gain_dbi / 10.0)
            power_w = float(dbm_to_watts(kind.tx_power_dbm))
            extra = backhaul_m
        else:  # IAB: regenerative, phase independent of the backhaul path
            aim = targets[t]
            gain = 10.0 ** (kind.gain_dbi / 10.0)
            power_w = float(dbm_to_watts(kind.tx_power_dbm))
            extra = 0.0
        boresight = aim - position
        norm = np.linalg.norm(boresight)
        if norm < 1e-9:
            boresight = np.array([1.0, 0.0, 0.0])
            norm = 1.0
        beam = PencilBeam(boresight=tuple(boresight / norm),
                          max_gain_dbi=float(10.0 * np.log10(gain)))
        src = _Source(position=position, power_w=power_w, pattern=beam,
                      extra_path_m=extra)
        values[t] = _radiate([src], points, wavelength, footprints,
                             wall_loss_db).reshape(3, grid.ny, grid.nx)
    return FieldGrid(grid=grid, values=values)


# ---------------------------------------------------------------------------
# Map database


@dataclass(frozen=True)
class DbMeta:
    scenario_hash: str
    mode: str
    params: tuple[tuple[str, float], ...] = ()

    def params_dict(self) -> dict:
        return dict(self.params)


@dataclass(eq=False)
class MapDatabase:
    """Reference field plus one field grid per feasible (site, kind) pair.

    Entry keys are (site index 0-based, catalog gene value 1-based).
    """
    grid: GridSpec
    wavelength: float
    reference: FieldGrid
    entries: dict[tuple[int, int], FieldGrid]
    meta: DbMeta
    plan_blob: dict = field(default_factory=dict)  # serialized site plan, opaque here

    @property
    def mode(self) -> str:
        return self.meta.mode

    @property
    def time_instants(self) -> int:
        return self.reference.time_instants


def build_database(scenario: Scenario, assignments: Mapping[tuple[int, int], Sequence],
                   *, mode: str = "coherent",
                   wall_loss_db: float = DEFAULT_WALL_LOSS_DB,
                   params: Mapping[str, float] | None = None,
                   plan_blob: dict | None = None) -> MapDatabase:
    """Precompute the reference field and every assigned device contribution.

    `assignments` maps (site index, gene value) to the per-instant aim
    points for that pair, as produced by the site planner.
    """
    if mode not in COMBINING_MODES:
        raise ValueError(f"mode must be one of {COMBINING_MODES}, got {mode!r}")
    reference = reference_field(scenario, wall_loss_db=wall_loss_db)
    entries: dict[tuple[int, int], FieldGrid] = {}
    for (n, s) in sorted(assignments):
        site = scenario.sites[n]
        kind = scenario.catalog[s - 1]
        entries[(n, s)] = see_contribution(scenario, site, kind,
                                           assignments[(n, s)],
                                           wall_loss_db=wall_loss_db)
    all_params = {"wall_loss_db": wall_loss_db}
    all_params.update(params or {})
    meta = DbMeta(scenario_hash=scenario.content_hash(), mode=mode,
                  params=tuple(sorted((k, float(v)) for k, v in all_params.items())))
    return MapDatabase(grid=scenario.grid, wavelength=scenario.wavelength,
                       reference=reference, entries=entries, meta=meta,
                       plan_blob=dict(plan_blob or {}))


def _selected_entries(db: MapDatabase, genes) -> list[FieldGrid]:
    genes = np.asarray(genes, dtype=int)
    selected = []
    for n, s in enumerate(genes):
        if s == 0:
            continue
        try:
            selected.append(db.entries[(n, int(s))])
        except KeyError:
            raise MissingEntryError(
                f"no database entry for site {n}, kind value {s}; "
                "the database is stale for this chromosome")
    return selected


def power_map_watts(db: MapDatabase, genes, t: int) -> np.ndarray:
    """Received power (W) over the whole grid for one deployment and instant."""
    selected = _selected_entries(db, genes)
    if db.mode == "coherent":
        total = db.reference.values[t].copy()
        for entry in selected:
            total += entry.values[t]
        return fields_to_power_watts(total, db.wavelength)
    power = fields_to_power_watts(db.reference.values[t], db.wavelength)
    for entry in selected:
        power = power + fields_to_power_watts(entry.values[t], db.wavelength)
    return power


def power_map_dbm(db: MapDatabase, genes, t: int) -> np.ndarray:
    return watts_to_dbm(power_map_watts(db, genes, t))


def received_power(db: MapDatabase, genes, cell: tuple[int, int], t: int) -> float:
    """Received power in dBm at one grid cell (iy, ix) for one deployment."""
    iy, ix = cell
    selected = _selected_entries(db, genes)
    if db.mode == "coherent":
        total = db.reference.values[t][:, iy, ix].copy()
        for entry in selected:
            total += entry.values[t][:, iy, ix]
        watts = fields_to_power_watts(total, db.wavelength)
    else:
        watts = fields_to_power_watts(db.reference.values[t][:, iy, ix],
                                      db.wavelength)
        for entry in selected:
            watts += fields_to_power_watts(entry.values[t][:, iy, ix],
                                           db.wavelength)
    return float(watts_to_dbm(watts))


# ---------------------------------------------------------------------------
# Persistence: JSON header plus raw little-endian complex64 grids


def _header_dict(db: MapDatabase) -> dict:
    return {
        "metadata": {
            "scenario_hash": db.meta.scenario_hash,
            "mode": db.meta.mode,
            "params": {k: v for k, v in db.meta.params},
        },
        "grid": {
            "origin": list(db.grid.origin),
            "spacing_m": db.grid.spacing,
            "nx": db.grid.nx,
            "ny": db.grid.ny,
            "height_m": db.grid.height,
        },
        "wavelength_m": db.wavelength,
        "time_instants": db.time_instants,
        "entries": sorted([int(n), int(s)] for (n, s) in db.entries),
        "plan": db.plan_blob,
    }


def save_database(db: MapDatabase, path) -> None:
    header = json.dumps(_header_dict(db), sort_keys=True,
                        separators=(",", ":")).encode()
    try:
        with open(path, "wb") as fh:
            fh.write(_DB_MAGIC)
            fh.write(np.array(len(header), dtype="<u4").tobytes())
            fh.write(header)
            fh.write(np.ascontiguousarray(db.reference.values).astype("<c8").tobytes())
            for key in sorted(db.entries):
                fh.write(np.ascontiguousarray(db.entries[key].values)
                         .astype("<c8").tobytes())
    except OSError as exc:
        raise DatabaseError(f"cannot write database {path}: {exc}")


def load_database(path) -> MapDatabase:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise DatabaseError(f"cannot read database {path}: {exc}")
    if blob[:len(_DB_MAGIC)] != _DB_MAGIC:
        raise DatabaseError(f"{path} is not a map database file")
    offset = len(_DB_MAGIC)
    header_len = int(np.frombuffer(blob, dtype="<u4", count=1, offset=offset)[0])
    offset += 4
    header = json.loads(blob[offset:offset + header_len].decode())
    offset += header_len
    g = header["grid"]
    grid = GridSpec(origin=tuple(g["origin"]), spacing=g["spacing_m"],
                    nx=g["nx"], ny=g["ny"], height=g["height_m"])
    t = header["time_instants"]
    shape = (t, 3, grid.ny, grid.nx)
    count = int(np.prod(shape))

    def read_grid():
        nonlocal offset
        raw = np.frombuffer(blob, dtype="<c8", count=count, offset=offset)
        offset += raw.nbytes
        return FieldGrid(grid=grid,
                         values=raw.reshape(shape).astype(np.complex128))

    reference = read_grid()
    entries = {}
    for n, s in header["entries"]:
        entries[(int(n), int(s))] = read_grid()
    meta = DbMeta(scenario_hash=header["metadata"]["scenario_hash"],
                  mode=header["metadata"]["mode"],
                  params=tuple(sorted((k, float(v)) for k, v
                               in header["metadata"]["params"].items())))
    return MapDatabase(grid=grid, wavelength=header["wavelength_m"],
                       reference=reference, entries=entries, meta=meta,
                       plan_blob=header.get("plan", {}))


def export_power_csv(db: MapDatabase, genes, t: int, path,
                     header_lines: Sequence[str] = ()) -> None:
    """Write one (x, y, power dBm) row per grid cell, row-major order."""
    power = power_map_dbm(db, genes, t)
    iy, ix = np.mgrid[0:db.grid.ny, 0:db.grid.nx]
    x, y = db.grid.cell_xy(iy.ravel(), ix.ravel())
    with open(path, "w", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write("x_m,y_m,power_dbm\n")
        for xi, yi, p in zip(x, y, power.ravel()):
            fh.write(f"{xi!r},{yi!r},{p!r}\n")


def database_fingerprint(db: MapDatabase) -> str:
    """Hash of header plus grids; equal fingerprints mean equal databases."""
    digest = hashlib.sha256()
    digest.update(json.dumps(_header_dict(db), sort_keys=True).encode())
    digest.update(np.ascontiguousarray(db.reference.values).astype("<c8").tobytes())
    for key in sorted(db.entries):
        digest.update(np.ascontiguousarray(db.entries[key].values)
                      .astype("<c8").tobytes())
    return digest.hexdigest()
