"""Post-processing: blind-spot extraction, CDFs, representative solutions,
difference-map statistics, and the CSV tables built from them."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import ndimage

from .nsga2 import ArchiveEntry, ParetoArchive
from .propagation import MapDatabase, power_map_dbm
from .scenario import SeeType
from .siteplanner import Roi

_EIGHT_CONNECTED = np.ones((3, 3), dtype=int)

REPRESENTATIVE_NAMES = ("best_coverage", "best_compromise",
                        "coverage_cost", "coverage_energy")


@dataclass(eq=False)
class BlindSpot:
    """Cells below the power threshold, per instant, with their regions.

    `masks[t]` flags every failing cell; `components[t]` partitions the
    mask into 8-connected regions of at least `min_cells` cells, labeled
    in row-major order of their first cell.
    """
    masks: np.ndarray  # (T, ny, nx) bool
    components: tuple[tuple[tuple[tuple[int, int], ...], ...], ...]
    min_cells: int

    @property
    def time_instants(self) -> int:
        return self.masks.shape[0]

    def region_cells(self, t: int) -> np.ndarray:
        """Union of the filtered regions at t, as an (k, 2) array of (iy, ix)."""
        cells = [c for comp in self.components[t] for c in comp]
        return np.asarray(cells, dtype=int).reshape(-1, 2)

    def cells_per_t(self) -> list[np.ndarray]:
        return [self.region_cells(t) for t in range(self.time_instants)]


def _label_components(mask: np.ndarray, min_cells: int):
    labels, count = ndimage.label(mask, structure=_EIGHT_CONNECTED)
    comps = []
    for lbl in range(1, count + 1):
        ys, xs = np.nonzero(labels == lbl)
        if len(ys) < min_cells:
            continue
        cells = sorted(zip(ys.tolist(), xs.tolist()))
        comps.append((min(cells), tuple(cells)))
    comps.sort(key=lambda item: item[0])  # row-major order of first cell
    return tuple(cells for _, cells in comps)


def extract_blindspot(power_dbm: np.ndarray, pth_dbm: float,
                      min_cells: int = 4) -> BlindSpot:
    """Blind spot of a (T, ny, nx) power map: cells strictly below threshold."""
    power_dbm = np.asarray(power_dbm, dtype=float)
    if power_dbm.ndim != 3:
        raise ValueError("power map must have shape (T, ny, nx)")
    masks = power_dbm < pth_dbm
    components = tuple(_label_components(masks[t], min_cells)
                       for t in range(power_dbm.shape[0]))
    return BlindSpot(masks=masks, components=components, min_cells=min_cells)


def empirical_cdf(values: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    """Fraction of values <= each threshold."""
    values = np.sort(np.asarray(values, dtype=float))
    if len(values) == 0:
        raise ValueError("empirical_cdf needs at least one value")
    idx = np.searchsorted(values, np.asarray(thresholds, dtype=float),
                          side="right")
    return idx / len(values)


def coverage_cdf(db: MapDatabase, genes, blindspot: BlindSpot, t: int,
                 thresholds) -> np.ndarray:
    """CDF of received power over the reference blind spot at instant t.

    The region is fixed to the reference blind spot so curves for
    different deployments share a domain.
    """
    cells = blindspot.region_cells(t)
    if len(cells) == 0:
        raise ValueError(f"blind spot is empty at instant {t}")
    power = power_map_dbm(db, genes, t)[cells[:, 0], cells[:, 1]]
    return empirical_cdf(power, thresholds)


# ---------------------------------------------------------------------------
# Representative front members


def _argmin_entry(archive: ParetoArchive, score) -> ArchiveEntry:
    best = None
    best_key = None
    for i, entry in enumerate(archive):
        cv, cs, _ = entry.objectives
        key = (score(entry.objectives), cv, cs, i)
        if best_key is None or key < best_key:
            best = entry
            best_key = key
    return best


def select_representatives(archive: ParetoArchive) -> dict[str, ArchiveEntry]:
    """Flag the four standard trade-off picks from the front.

    best_coverage minimizes the coverage deficit alone; best_compromise
    minimizes the Manhattan sum of all three objectives; coverage_cost
    and coverage_energy drop the energy and cost terms respectively.
    Ties break on lowest coverage deficit, then lowest cost, then archive
    order.
    """
    if len(archive) == 0:
        raise ValueError("archive is empty")
    return {
        "best_coverage": _argmin_entry(archive, lambda o: o[0]),
        "best_compromise": _argmin_entry(
            archive, lambda o: abs(o[0]) + abs(o[1]) + abs(o[2])),
        "coverage_cost": _argmin_entry(archive, lambda o: abs(o[0]) + abs(o[1])),
        "coverage_energy": _argmin_entry(archive, lambda o: abs(o[0]) + abs(o[2])),
    }


# ---------------------------------------------------------------------------
# Reduction statistics


@dataclass(frozen=True)
class RoiReduction:
    roi: int
    t: int
    area_ref_m2: float
    area_m2: float          # reference cells still uncovered under the deployment
    reduction_pct: float
    gain_min_db: float      # improvement = P(deployment) - P(reference)
    gain_max_db: float
    gain_avg_db: float

    @property
    def drop_min_db(self) -> float:
        """Reference-minus-deployment orientation of the difference map."""
        return -self.gain_max_db

    @property
    def drop_max_db(self) -> float:
        return -self.gain_min_db

    @property
    def drop_avg_db(self) -> float:
        return -self.gain_avg_db


def reduction_stats(ref_power: np.ndarray, new_power: np.ndarray,
                    rois: Sequence[Roi], pth_dbm: float) -> list[RoiReduction]:
    """Per-(region, instant) area reduction and difference-map statistics.

    Area under the deployment counts the reference-region cells still
    below threshold, so the reduction lies in [0, 100] percent.
    """
    out = []
    for roi in rois:
        for t, cells in enumerate(roi.cells):
            if not cells:
                continue
            idx = np.asarray(cells, dtype=int)
            ref = ref_power[t][idx[:, 0], idx[:, 1]]
            new = new_power[t][idx[:, 0], idx[:, 1]]
            area_ref = len(cells) * roi.cell_area
            still_blind = int((new < pth_dbm).sum())
            area_new = still_blind * roi.cell_area
            gain = new - ref
            out.append(RoiReduction(
                roi=roi.index, t=t,
                area_ref_m2=area_ref, area_m2=area_new,
                reduction_pct=100.0 * (area_ref - area_new) / area_ref,
                gain_min_db=float(gain.min()),
                gain_max_db=float(gain.max()),
                gain_avg_db=float(gain.mean()),
            ))
    return out


# ---------------------------------------------------------------------------
# Report tables


@dataclass(frozen=True)
class SolutionSummary:
    name: str
    genes: tuple[int, ...]
    objectives: tuple[float, float, float]
    device_counts: tuple[tuple[str, int], ...]
    total_cost: float
    total_energy_w: float

    @property
    def n_devices(self) -> int:
        return sum(c for _, c in self.device_counts)


def summarize_solution(name: str, entry: ArchiveEntry,
                       catalog: Sequence[SeeType]) -> SolutionSummary:
    counts: dict[str, int] = {k.kind: 0 for k in catalog}
    cost = 0.0
    energy = 0.0
    for s in entry.genes:
        if s == 0:
            continue
        kind = catalog[s - 1]
        counts[kind.kind] += 1
        cost += kind.install_cost
        energy += kind.energy_w
    return SolutionSummary(name=name, genes=entry.genes,
                           objectives=entry.objectives,
                           device_counts=tuple(counts.items()),
                           total_cost=cost, total_energy_w=energy)


def _write_csv(path, header_lines, columns, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_solution_table(summaries: Sequence[SolutionSummary], path,
                         header_lines: Sequence[str] = (),
                         coverage_units: str = "m2") -> None:
    kinds = [k for k, _ in summaries[0].device_counts] if summaries else []
    columns = (["solution", "coverage_deficit", "coverage_units",
                "cost_fraction", "energy_fraction", "n_devices"]
               + [f"n_{k}" for k in kinds] + ["total_cost", "total_energy_w",
                                              "genes"])
    rows = []
    for s in summaries:
        counts = dict(s.device_counts)
        rows.append([s.name, _fmt(s.objectives[0]), coverage_units,
                     _fmt(s.objectives[1]), _fmt(s.objectives[2]),
                     str(s.n_devices)]
                    + [str(counts[k]) for k in kinds]
                    + [_fmt(s.total_cost), _fmt(s.total_energy_w),
                       ";".join(str(g) for g in s.genes)])
    _write_csv(path, header_lines, columns, rows)


def write_reduction_table(stats_by_solution: Mapping[str, Sequence[RoiReduction]],
                          path, header_lines: Sequence[str] = ()) -> None:
    """Difference-map table; gain columns are positive for improvements,
    drop columns carry the opposite (reference minus deployment) sign."""
    columns = ["solution", "roi", "t", "area_ref_m2", "area_m2",
               "reduction_pct", "gain_min_db", "gain_max_db", "gain_avg_db",
               "drop_min_db", "drop_max_db", "drop_avg_db"]
    rows = []
    for name, stats in stats_by_solution.items():
        for r in stats:
            rows.append([name, str(r.roi), str(r.t + 1), _fmt(r.area_ref_m2),
                         _fmt(r.area_m2), _fmt(r.reduction_pct),
                         _fmt(r.gain_min_db), _fmt(r.gain_max_db),
                         _fmt(r.gain_avg_db), _fmt(r.drop_min_db),
                         _fmt(r.drop_max_db), _fmt(r.drop_avg_db)])
    _write_csv(path, header_lines, columns, rows)


def write_cdf_csv(thresholds: np.ndarray, probabilities: np.ndarray, path,
                  header_lines: Sequence[str] = ()) -> None:
    rows = [[_fmt(float(p)), _fmt(float(c))]
            for p, c in zip(thresholds, probabilities)]
    _write_csv(path, header_lines, ["power_dbm", "cdf"], rows)


def write_archive_csv(archive: ParetoArchive, path,
                      header_lines: Sequence[str] = ()) -> None:
    columns = ["coverage_deficit", "cost_fraction", "energy_fraction", "genes"]
    rows = [[_fmt(e.objectives[0]), _fmt(e.objectives[1]), _fmt(e.objectives[2]),
             ";".join(str(g) for g in e.genes)] for e in archive]
    _write_csv(path, header_lines, columns, rows)


def read_archive_csv(path) -> ParetoArchive:
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        rows = [line.strip() for line in fh
                if line.strip() and not line.startswith("#")]
    for line in rows[1:]:
        cv, cs, ec, genes = line.split(",")
        entries.append(ArchiveEntry(
            genes=tuple(int(g) for g in genes.split(";")) if genes else (),
            objectives=(float(cv), float(cs), float(ec))))
    return ParetoArchive(entries=tuple(entries))
