"""Command-line pipeline: sites -> dbgen -> optimize -> report.

Each command recomputes the cheap stages deterministically from the
scenario file and run options; the expensive field database is cached on
disk and keyed by the scenario content hash plus the options that shape
it.  Every output file carries that hash and a config echo in comment
lines, so reruns with one seed are byte-identical.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import analysis, nsga2, objectives, propagation, siteplanner
from .scenario import Scenario, ScenarioError, load_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STALE = 3
EXIT_RUNTIME = 4

CDF_GRID_DBM = np.arange(-80.0, -29.9, 0.5)


class StaleCacheError(RuntimeError):
    pass


@dataclass(frozen=True)
class RunConfig:
    scenario_path: str
    out_dir: str
    pth_dbm: float = -65.0
    mode: str = "coherent"
    roi_min_cells: int = 4
    wall_loss_db: float = propagation.DEFAULT_WALL_LOSS_DB
    population: int | None = None
    iterations: int = 10_000
    seed: int = 0
    restarts: int = 1
    crossover: str = "uniform"
    mutation_rate: float = 0.005
    coverage_units: str = "normalized"  # or "m2" (area-weighted)
    force: bool = False

    def db_params(self) -> dict:
        return {"pth_dbm": self.pth_dbm, "roi_min_cells": float(self.roi_min_cells),
                "wall_loss_db": self.wall_loss_db}

    def echo(self) -> str:
        return json.dumps({
            "mode": self.mode, "pth_dbm": self.pth_dbm,
            "roi_min_cells": self.roi_min_cells,
            "wall_loss_db": self.wall_loss_db,
            "coverage_units": self.coverage_units}, sort_keys=True)


def _headers(scenario_hash: str, config: RunConfig) -> list[str]:
    return [f"scenario_hash={scenario_hash}", f"config={config.echo()}"]


def _prepare(config: RunConfig):
    """Reference field, blind spot, regions and site plan for a config."""
    scenario = load_scenario(config.scenario_path)
    reference = propagation.reference_field(scenario,
                                            wall_loss_db=config.wall_loss_db)
    power = np.stack([
        propagation.watts_to_dbm(propagation.fields_to_power_watts(
            reference.values[t], scenario.wavelength))
        for t in range(scenario.time_instants)])
    blindspot = analysis.extract_blindspot(power, config.pth_dbm,
                                           min_cells=config.roi_min_cells)
    rois = siteplanner.build_rois(blindspot.components, scenario.grid)
    report, plan = siteplanner.qualify_sites(scenario, rois, config.pth_dbm,
                                             wall_loss_db=config.wall_loss_db)
    return scenario, reference, power, blindspot, rois, report, plan


def _db_path(config: RunConfig) -> str:
    return os.path.join(config.out_dir, "mapdb.bin")


def _db_is_current(path: str, scenario: Scenario, config: RunConfig) -> bool:
    if not os.path.exists(path):
        return False
    try:
        db = propagation.load_database(path)
    except propagation.DatabaseError:
        return False
    return (db.meta.scenario_hash == scenario.content_hash()
            and db.meta.mode == config.mode
            and db.meta.params_dict() == {k: float(v) for k, v
                                          in config.db_params().items()})


def _load_current_db(config: RunConfig, scenario: Scenario):
    path = _db_path(config)
    if not os.path.exists(path):
        raise StaleCacheError(f"database {path} is missing; run dbgen first")
    db = propagation.load_database(path)
    if db.meta.scenario_hash != scenario.content_hash():
        raise StaleCacheError("database was built from a different scenario; "
                              "rerun dbgen")
    if db.meta.mode != config.mode or db.meta.params_dict() != {
            k: float(v) for k, v in config.db_params().items()}:
        raise StaleCacheError("database options differ from the requested "
                              "config; rerun dbgen")
    return db


# ---------------------------------------------------------------------------
# Commands


def cmd_sites(config: RunConfig) -> int:
    scenario, _, _, _, rois, report, plan = _prepare(config)
    headers = _headers(scenario.content_hash(), config)
    os.makedirs(config.out_dir, exist_ok=True)
    siteplanner.write_feasibility_csv(
        report, os.path.join(config.out_dir, "feasibility.csv"), headers)
    with open(os.path.join(config.out_dir, "siteplan.json"), "w",
              encoding="utf-8") as fh:
        json.dump({"scenario_hash": scenario.content_hash(),
                   "assignments": plan.to_jsonable()}, fh, sort_keys=True)
        fh.write("\n")
    for roi in rois:
        ems_mask = siteplanner.region_raster(
            siteplanner.ems_region(scenario, roi, config.pth_dbm), scenario.grid)
        siteplanner.write_region_raster_csv(
            ems_mask, scenario.grid,
            os.path.join(config.out_dir, f"region_ems_roi{roi.index}.csv"),
            headers)
        active = [k for k in scenario.catalog if k.is_active]
        if active:
            ase_mask = siteplanner.region_raster(
                siteplanner.ase_region(scenario, roi, active[0], config.pth_dbm),
                scenario.grid)
            siteplanner.write_region_raster_csv(
                ase_mask, scenario.grid,
                os.path.join(config.out_dir, f"region_ase_roi{roi.index}.csv"),
                headers)
    print(f"sites: {len(report)} verdicts, {len(rois)} regions, "
          f"{sum(len(a) for a in plan.assignments)} feasible pairs")
    return EXIT_OK


def cmd_dbgen(config: RunConfig) -> int:
    scenario, reference, _, _, rois, _, plan = _prepare(config)
    path = _db_path(config)
    os.makedirs(config.out_dir, exist_ok=True)
    if not config.force and _db_is_current(path, scenario, config):
        print(f"dbgen: cache hit, {path} is current")
        return EXIT_OK
    db = propagation.build_database(
        scenario, plan.db_assignments(rois, scenario.grid.height),
        mode=config.mode, wall_loss_db=config.wall_loss_db,
        params={"pth_dbm": config.pth_dbm,
                "roi_min_cells": float(config.roi_min_cells)},
        plan_blob={"assignments": plan.to_jsonable()})
    propagation.save_database(db, path)
    print(f"dbgen: wrote {path} with {len(db.entries)} entries")
    return EXIT_OK


def _ga_config(config: RunConfig, n_sites: int, seed: int) -> nsga2.GaConfig:
    population = config.population
    if population is None:
        population = max(4, 2 * n_sites)
    if population % 2:
        population += 1
    return nsga2.GaConfig(population=population, iterations=config.iterations,
                          seed=seed, crossover=config.crossover,
                          mutation_rate=config.mutation_rate)


def cmd_optimize(config: RunConfig) -> int:
    scenario = load_scenario(config.scenario_path)
    db = _load_current_db(config, scenario)
    plan = siteplanner.SitePlan.from_jsonable(db.plan_blob["assignments"])
    power = np.stack([propagation.power_map_dbm(db, np.zeros(scenario.n_sites, int), t)
                      for t in range(db.time_instants)])
    blindspot = analysis.extract_blindspot(power, config.pth_dbm,
                                           min_cells=config.roi_min_cells)
    evaluator = objectives.Evaluator(
        db, blindspot.cells_per_t(), config.pth_dbm, scenario.catalog, plan,
        normalized=config.coverage_units == "normalized")
    headers = _headers(scenario.content_hash(), config)
    os.makedirs(config.out_dir, exist_ok=True)
    seeds = [config.seed + k for k in range(config.restarts)]
    summary_rows = []
    for seed in seeds:
        ga = _ga_config(config, scenario.n_sites, seed)
        result = nsga2.evolve(ga, evaluator, plan.alphabets())
        suffix = f"_seed{seed}" if config.restarts > 1 else ""
        archive_path = os.path.join(config.out_dir, f"archive{suffix}.csv")
        analysis.write_archive_csv(result.archive, archive_path,
                                   headers + [f"seed={seed}"])
        trace_path = os.path.join(config.out_dir, f"trace{suffix}.csv")
        with open(trace_path, "w", encoding="utf-8") as fh:
            for line in headers + [f"seed={seed}"]:
                fh.write(f"# {line}\n")
            fh.write("generation,front_size,min_coverage,min_cost,min_energy\n")
            for row in result.trace:
                fh.write(f"{row.generation},{row.front_size},{row.best[0]!r},"
                         f"{row.best[1]!r},{row.best[2]!r}\n")
        best = min(e.objectives[0] for e in result.archive)
        summary_rows.append((seed, len(result.archive), best))
        print(f"optimize: seed {seed} -> {len(result.archive)} front members, "
              f"best coverage deficit {best:.6g}")
    manifest = {
        "scenario_hash": scenario.content_hash(),
        "config": json.loads(config.echo()),
        "ga": {"population": _ga_config(config, scenario.n_sites, 0).population,
               "iterations": config.iterations, "seeds": seeds,
               "crossover": config.crossover,
               "mutation_rate": config.mutation_rate},
    }
    with open(os.path.join(config.out_dir, "manifest.json"), "w",
              encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if config.restarts > 1:
        with open(os.path.join(config.out_dir, "restarts_summary.csv"), "w",
                  encoding="utf-8") as fh:
            for line in headers:
                fh.write(f"# {line}\n")
            fh.write("seed,front_size,min_coverage\n")
            for seed, size, best in summary_rows:
                fh.write(f"{seed},{size},{best!r}\n")
    return EXIT_OK


def cmd_report(config: RunConfig, archive_path: str | None = None) -> int:
    scenario = load_scenario(config.scenario_path)
    db = _load_current_db(config, scenario)
    archive_path = archive_path or os.path.join(config.out_dir, "archive.csv")
    if not os.path.exists(archive_path):
        raise StaleCacheError(f"archive {archive_path} is missing; "
                              "run optimize first")
    archive = analysis.read_archive_csv(archive_path)
    if len(archive) == 0:
        print("report: archive is empty", file=sys.stderr)
        return EXIT_RUNTIME
    ref_genes = np.zeros(scenario.n_sites, int)
    ref_power = np.stack([propagation.power_map_dbm(db, ref_genes, t)
                          for t in range(db.time_instants)])
    blindspot = analysis.extract_blindspot(ref_power, config.pth_dbm,
                                           min_cells=config.roi_min_cells)
    rois = siteplanner.build_rois(blindspot.components, scenario.grid)
    headers = _headers(scenario.content_hash(), config)
    os.makedirs(config.out_dir, exist_ok=True)

    representatives = analysis.select_representatives(archive)
    summaries = [analysis.summarize_solution(name, representatives[name],
                                             scenario.catalog)
                 for name in analysis.REPRESENTATIVE_NAMES]
    analysis.write_solution_table(
        summaries, os.path.join(config.out_dir, "solutions.csv"), headers,
        coverage_units=config.coverage_units)

    reductions = {}
    for name in analysis.REPRESENTATIVE_NAMES:
        genes = np.asarray(representatives[name].genes, int)
        power = np.stack([propagation.power_map_dbm(db, genes, t)
                          for t in range(db.time_instants)])
        reductions[name] = analysis.reduction_stats(ref_power, power, rois,
                                                    config.pth_dbm)
        propagation.export_power_csv(
            db, genes, 0, os.path.join(config.out_dir, f"map_{name}.csv"),
            headers + [f"solution={name}", f"pth_dbm={config.pth_dbm!r}"])
        for t in range(db.time_instants):
            cells = blindspot.region_cells(t)
            if len(cells) == 0:
                continue
            cdf = analysis.coverage_cdf(db, genes, blindspot, t, CDF_GRID_DBM)
            analysis.write_cdf_csv(
                CDF_GRID_DBM, cdf,
                os.path.join(config.out_dir, f"cdf_{name}_t{t + 1}.csv"),
                headers + [f"solution={name}"])
    analysis.write_reduction_table(
        reductions, os.path.join(config.out_dir, "reduction.csv"), headers)
    print(f"report: {len(archive)} front members, "
          f"{len(analysis.REPRESENTATIVE_NAMES)} representatives")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--scenario", required=True, help="scenario JSON file")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--pth-dbm", type=float, default=-65.0,
                        help="coverage power threshold (default -65)")
    parser.add_argument("--mode", choices=propagation.COMBINING_MODES,
                        default="coherent", help="field combining mode")
    parser.add_argument("--roi-min-cells", type=int, default=4,
                        help="minimum region size in cells (default 4)")
    parser.add_argument("--wall-loss-db", type=float,
                        default=propagation.DEFAULT_WALL_LOSS_DB,
                        help="per-building penetration loss (default 20)")
    parser.add_argument("--coverage-units", choices=("normalized", "m2"),
                        default="normalized",
                        help="coverage deficit units: blind-spot-area "
                             "normalized (default) or raw m2")
    parser.add_argument("--force", action="store_true",
                        help="ignore cached artifacts")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semeplan",
        description="Plan smart EM entity deployments that recover coverage "
                    "in blind-spot regions at minimum cost and energy.")
    sub = parser.add_subparsers(dest="command", required=True)
    p_sites = sub.add_parser("sites", help="qualify candidate sites")
    _add_common(p_sites)
    p_dbgen = sub.add_parser("dbgen", help="precompute the field database")
    _add_common(p_dbgen)
    p_opt = sub.add_parser("optimize", help="run the multi-objective search")
    _add_common(p_opt)
    p_opt.add_argument("--pop", type=int, default=None,
                       help="population size (default 2x site count)")
    p_opt.add_argument("--iters", type=int, default=10_000,
                       help="generations (default 10000)")
    p_opt.add_argument("--seed", type=int, default=0, help="RNG seed")
    p_opt.add_argument("--restarts", type=int, default=1,
                       help="number of seeds to run (seed, seed+1, ...)")
    p_opt.add_argument("--crossover", choices=("uniform", "one_point"),
                       default="uniform")
    p_opt.add_argument("--mutation-rate", type=float, default=0.005)
    p_rep = sub.add_parser("report", help="tables, maps and CDFs for a front")
    _add_common(p_rep)
    p_rep.add_argument("--archive", default=None,
                       help="archive CSV (default <out>/archive.csv)")
    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        scenario_path=args.scenario,
        out_dir=args.out,
        pth_dbm=args.pth_dbm,
        mode=args.mode,
        roi_min_cells=args.roi_min_cells,
        wall_loss_db=args.wall_loss_db,
        population=getattr(args, "pop", None),
        iterations=getattr(args, "iters", 10_000),
        seed=getattr(args, "seed", 0),
        restarts=getattr(args, "restarts", 1),
        crossover=getattr(args, "crossover", "uniform"),
        mutation_rate=getattr(args, "mutation_rate", 0.005),
        coverage_units=args.coverage_units,
        force=args.force,
    )


class _OutDirLock:
    """Advisory lock; concurrent runs on one output directory are unsupported."""

    def __init__(self, out_dir: str):
        self.path = os.path.join(out_dir, ".lock")

    def __enter__(self):
        os.makedirs(os.path.dirname(self.path), exist_ok=True)
        if os.path.exists(self.path):
            print(f"warning: {self.path} exists; another run may be active",
                  file=sys.stderr)
        else:
            with open(self.path, "w", encoding="utf-8") as fh:
                fh.write(str(os.getpid()))
        return self

    def __exit__(self, *exc):
        try:
            os.remove(self.path)
        except OSError:
            pass
        return False


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    config = _config_from_args(args)
    try:
        with _OutDirLock(config.out_dir):
            if args.command == "sites":
                return cmd_sites(config)
            if args.command == "dbgen":
                return cmd_dbgen(config)
            if args.command == "optimize":
                return cmd_optimize(config)
            return cmd_report(config, archive_path=args.archive)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StaleCacheError, propagation.MissingEntryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STALE
    except Exception as exc:  # noqa: BLE001 - deliberate catch-all at the boundary
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
