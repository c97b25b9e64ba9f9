"""Deployment objectives: coverage deficit, install cost, energy use.

All three are minimized.  Cost and energy normalize against the most
expensive feasible deployment, so they live in [0, 1]; the coverage
deficit is the blind-spot area-weighted shortfall below the power
threshold, averaged over time instants, in dBm-domain units.
"""
from __future__ import annotations

import warnings
from typing import NamedTuple, Sequence

import numpy as np

from .propagation import MapDatabase, fields_to_power_watts, power_map_dbm
from .scenario import SeeType
from .siteplanner import SitePlan
from .units import POWER_FLOOR_DBM, watts_to_dbm


class ObjectiveVector(NamedTuple):
    coverage: float
    cost: float
    energy: float


def repair(genes, plan: SitePlan) -> np.ndarray:
    """Zero out genes selecting a kind that is not feasible at their site."""
    out = np.asarray(genes, dtype=int).copy()
    for n in range(plan.n_sites):
        if out[n] != 0 and out[n] not in plan.kind_values(n):
            out[n] = 0
    return out


def max_cost(catalog: Sequence[SeeType], plan: SitePlan) -> float:
    return sum(max((catalog[s - 1].install_cost for s in plan.kind_values(n)),
                   default=0.0) for n in range(plan.n_sites))


def max_energy(catalog: Sequence[SeeType], plan: SitePlan) -> float:
    return sum(max((catalog[s - 1].energy_w for s in plan.kind_values(n)),
                   default=0.0) for n in range(plan.n_sites))


def installed_cost(genes, catalog: Sequence[SeeType]) -> float:
    return sum(catalog[s - 1].install_cost for s in np.asarray(genes, int) if s > 0)


def installed_energy(genes, catalog: Sequence[SeeType]) -> float:
    return sum(catalog[s - 1].energy_w for s in np.asarray(genes, int) if s > 0)


def cost_fraction(genes, catalog: Sequence[SeeType], plan: SitePlan) -> float:
    """Installed cost over the cost of the dearest feasible deployment."""
    denom = max_cost(catalog, plan)
    return installed_cost(genes, catalog) / denom if denom > 0 else 0.0


def energy_fraction(genes, catalog: Sequence[SeeType], plan: SitePlan) -> float:
    denom = max_energy(catalog, plan)
    return installed_energy(genes, catalog) / denom if denom > 0 else 0.0


def _deficit(power_dbm: np.ndarray, pth_dbm: float) -> np.ndarray:
    power_dbm = np.maximum(power_dbm, POWER_FLOOR_DBM)
    short = pth_dbm - power_dbm
    return np.where(short > 0.0, short / abs(pth_dbm), 0.0)


def coverage_deficit(db: MapDatabase, genes, cells_per_t: Sequence[np.ndarray],
                     pth_dbm: float, *, normalized: bool = False) -> float:
    """Area-weighted shortfall below the threshold over the blind spot.

    `cells_per_t` lists the blind-spot cells (iy, ix) of the reference
    scenario at each instant.  With `normalized` the per-instant sum is
    divided by the blind-spot area instead of carrying m^2 units.
    """
    t_count = db.time_instants
    if all(len(c) == 0 for c in cells_per_t):
        warnings.warn("blind spot is empty at every instant; deficit is 0")
        return 0.0
    cell_area = db.grid.cell_area
    total = 0.0
    for t in range(t_count):
        cells = np.asarray(cells_per_t[t], dtype=int)
        if cells.size == 0:
            continue
        power = power_map_dbm(db, genes, t)[cells[:, 0], cells[:, 1]]
        deficit = _deficit(power, pth_dbm).sum() * cell_area
        if normalized:
            deficit /= len(cells) * cell_area
        total += deficit
    return total / t_count


def evaluate(db: MapDatabase, genes, cells_per_t, pth_dbm: float,
             catalog: Sequence[SeeType], plan: SitePlan,
             *, normalized: bool = False) -> tuple[np.ndarray, ObjectiveVector]:
    """Repair the chromosome and score all three objectives."""
    repaired = repair(genes, plan)
    vec = ObjectiveVector(
        coverage=coverage_deficit(db, repaired, cells_per_t, pth_dbm,
                                  normalized=normalized),
        cost=cost_fraction(repaired, catalog, plan),
        energy=energy_fraction(repaired, catalog, plan),
    )
    return repaired, vec


class Evaluator:
    """Fast chromosome scorer over a fixed database and blind spot.

    Precomputes every entry's complex field (and per-entry power, for the
    incoherent mode) restricted to the blind-spot cells, so one call is a
    handful of small array sums.  Pure: identical inputs give identical
    outputs, safe to share read-only across workers.
    """

    def __init__(self, db: MapDatabase, cells_per_t, pth_dbm: float,
                 catalog: Sequence[SeeType], plan: SitePlan,
                 *, normalized: bool = False):
        self.db = db
        self.pth_dbm = float(pth_dbm)
        self.catalog = tuple(catalog)
        self.plan = plan
        self.normalized = normalized
        self.cells_per_t = [np.asarray(c, dtype=int).reshape(-1, 2)
                            for c in cells_per_t]
        if all(len(c) == 0 for c in self.cells_per_t):
            warnings.warn("blind spot is empty at every instant; deficit is 0")
        self._coherent = db.mode == "coherent"
        self._cell_area = db.grid.cell_area
        lam = db.wavelength
        t_count = db.time_instants

        def restrict(grid_values):
            return [grid_values[t][:, c[:, 0], c[:, 1]]
                    for t, c in zip(range(t_count), self.cells_per_t)]

        self._ref_fields = restrict(db.reference.values)
        self._ref_power = [fields_to_power_watts(f, lam) for f in self._ref_fields]
        self._entry_fields = {key: restrict(entry.values)
                              for key, entry in db.entries.items()}
        self._entry_power = {
            key: [fields_to_power_watts(f, lam) for f in fields]
            for key, fields in self._entry_fields.items()}
        self._max_cost = max_cost(self.catalog, plan)
        self._max_energy = max_energy(self.catalog, plan)

    def _coverage(self, genes: np.ndarray) -> float:
        selected = [(n, int(s)) for n, s in enumerate(genes) if s != 0]
        lam = self.db.wavelength
        total = 0.0
        for t, cells in enumerate(self.cells_per_t):
            if len(cells) == 0:
                continue
            if self._coherent:
                fields = self._ref_fields[t].copy()
                for key in selected:
                    fields += self._entry_fields[key][t]
                power_w = fields_to_power_watts(fields, lam)
            else:
                power_w = self._ref_power[t].copy()
                for key in selected:
                    power_w = power_w + self._entry_power[key][t]
            deficit = _deficit(watts_to_dbm(power_w), self.pth_dbm).sum() \
                * self._cell_area
            if self.normalized:
                deficit /= len(cells) * self._cell_area
            total += deficit
        return total / self.db.time_instants

    def __call__(self, genes) -> tuple[np.ndarray, ObjectiveVector]:
        repaired = repair(genes, self.plan)
        cost = installed_cost(repaired, self.catalog)
        energy = installed_energy(repaired, self.catalog)
        vec = ObjectiveVector(
            coverage=self._coverage(repaired),
            cost=cost / self._max_cost if self._max_cost > 0 else 0.0,
            energy=energy / self._max_energy if self._max_energy > 0 else 0.0,
        )
        return repaired, vec
