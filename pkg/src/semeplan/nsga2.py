"""Integer-encoded elitist NSGA-II and Pareto-front utilities.

Generational loop: tournament selection on (rank, crowding), uniform
crossover on the integer string, per-gene mutation resampling from the
feasible alphabet, then mu+lambda survivor selection.  Fully reproducible
from the seed.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


class EvolveError(RuntimeError):
    pass


@dataclass(frozen=True)
class GaConfig:
    population: int
    iterations: int
    crossover_rate: float = 0.9
    mutation_rate: float = 0.005
    tournament_size: int = 2
    seed: int = 0
    crossover: str = "uniform"  # or "one_point"
    include_reference: bool = True  # seed generation 0 with the empty deployment

    def __post_init__(self):
        if self.population < 4 or self.population % 2 != 0:
            raise ValueError(f"population must be an even integer >= 4, "
                             f"got {self.population}")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        for name in ("crossover_rate", "mutation_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.tournament_size < 2:
            raise ValueError("tournament_size must be >= 2")
        if self.crossover not in ("uniform", "one_point"):
            raise ValueError(f"unknown crossover operator {self.crossover!r}")


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    """True when a is no worse everywhere and strictly better somewhere."""
    not_worse = all(x <= y for x, y in zip(a, b))
    strictly = any(x < y for x, y in zip(a, b))
    return not_worse and strictly


def fast_nondominated_sort(objectives: Sequence[Sequence[float]]) -> list[int]:
    """Front index per individual (0 = non-dominated), Deb's O(MN^2) scheme.

    The pairwise domination matrix is evaluated with one numpy broadcast;
    front peeling then follows the usual domination-count bookkeeping.
    """
    arr = np.asarray(objectives, dtype=float)
    n = len(arr)
    if n == 0:
        return []
    no_worse = (arr[:, None, :] <= arr[None, :, :]).all(axis=2)
    strictly = (arr[:, None, :] < arr[None, :, :]).any(axis=2)
    dom = no_worse & strictly  # dom[p, q]: p dominates q
    counts = dom.sum(axis=0).astype(int)
    ranks = np.full(n, -1, dtype=int)
    current = np.nonzero(counts == 0)[0]
    front = 0
    while len(current):
        ranks[current] = front
        counts = counts - dom[current].sum(axis=0)
        counts[ranks >= 0] = -1  # keep assigned individuals out of the zero test
        current = np.nonzero(counts == 0)[0]
        front += 1
    return ranks.tolist()


def crowding_distance(front: Sequence[Sequence[float]]) -> list[float]:
    """Crowding of each front member; boundary individuals get +inf.

    Objectives with zero spread contribute nothing (and assign no
    boundary bonus), so duplicated fronts stay finite.
    """
    n = len(front)
    if n <= 2:
        return [float("inf")] * n
    dist = [0.0] * n
    m = len(front[0])
    for k in range(m):
        order = sorted(range(n), key=lambda i: front[i][k])
        lo = front[order[0]][k]
        hi = front[order[-1]][k]
        span = hi - lo
        if span <= 0.0:
            continue
        dist[order[0]] = dist[order[-1]] = float("inf")
        for j in range(1, n - 1):
            gap = front[order[j + 1]][k] - front[order[j - 1]][k]
            dist[order[j]] += gap / span
    return dist


@dataclass(frozen=True)
class ArchiveEntry:
    genes: tuple[int, ...]
    objectives: tuple[float, float, float]


@dataclass(frozen=True)
class ParetoArchive:
    """Mutually non-dominated deployments, deduplicated by chromosome."""
    entries: tuple[ArchiveEntry, ...]

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def objective_array(self) -> np.ndarray:
        return np.asarray([e.objectives for e in self.entries], dtype=float)

    @classmethod
    def from_population(cls, genes_list, objectives) -> "ParetoArchive":
        ranks = fast_nondominated_sort(objectives)
        seen = set()
        entries = []
        for i, rank in enumerate(ranks):
            if rank != 0:
                continue
            genes = tuple(int(g) for g in genes_list[i])
            if genes in seen:
                continue
            seen.add(genes)
            entries.append(ArchiveEntry(genes=genes,
                                        objectives=tuple(float(v)
                                                         for v in objectives[i])))
        entries.sort(key=lambda e: (e.objectives, e.genes))
        return cls(entries=tuple(entries))


@dataclass(frozen=True)
class GenerationStats:
    generation: int
    front_size: int
    best: tuple[float, float, float]  # per-objective minimum in the population


@dataclass
class EvolveResult:
    archive: ParetoArchive
    trace: list[GenerationStats] = field(default_factory=list)


def _tournament(rng, ranks, crowding, size):
    n = len(ranks)
    picks = rng.choice(n, size=min(size, n), replace=False)
    best = picks[0]
    for idx in picks[1:]:
        if (ranks[idx], -crowding[idx], idx) < (ranks[best], -crowding[best], best):
            best = idx
    return best


def _rank_and_crowd(objectives):
    ranks = fast_nondominated_sort(objectives)
    crowding = [0.0] * len(objectives)
    by_front: dict[int, list[int]] = {}
    for i, r in enumerate(ranks):
        by_front.setdefault(r, []).append(i)
    for members in by_front.values():
        dists = crowding_distance([objectives[i] for i in members])
        for i, d in zip(members, dists):
            crowding[i] = d
    return ranks, crowding


def _stats(generation, genes_list, objectives, ranks) -> GenerationStats:
    front_genes = {tuple(int(g) for g in genes_list[i])
                   for i, r in enumerate(ranks) if r == 0}
    arr = np.asarray(objectives, dtype=float)
    return GenerationStats(generation=generation, front_size=len(front_genes),
                           best=tuple(float(v) for v in arr.min(axis=0)))


def evolve(config: GaConfig, evaluator: Callable,
           alphabets: Sequence[Sequence[int]]) -> EvolveResult:
    """Run the generational loop and return the final front plus a trace.

    `evaluator(genes) -> (repaired genes, objective tuple)` must be pure;
    `alphabets[n]` lists the feasible gene values at site n (0 is always
    added).  The archive is the deduplicated rank-0 set of the last
    combined parent+offspring population.
    """
    rng = np.random.default_rng(config.seed)
    alphabets = tuple(tuple(sorted(set(a) | {0})) for a in alphabets)
    n_genes = len(alphabets)

    def evaluate(genes, generation):
        try:
            repaired, vec = evaluator(np.asarray(genes, dtype=int))
        except Exception as exc:
            raise EvolveError(f"evaluator failed at generation {generation}: "
                              f"{exc}") from exc
        return np.asarray(repaired, dtype=int), tuple(float(v) for v in vec)

    def random_genes():
        return np.array([alpha[rng.integers(len(alpha))] for alpha in alphabets],
                        dtype=int)

    def mutate(genes):
        mask = rng.random(n_genes) < config.mutation_rate
        for n in np.nonzero(mask)[0]:
            genes[n] = alphabets[n][rng.integers(len(alphabets[n]))]
        return genes

    def cross(a, b):
        a = a.copy()
        b = b.copy()
        if n_genes >= 2:
            if config.crossover == "uniform":
                swap = rng.random(n_genes) < 0.5
                a[swap], b[swap] = b[swap], a[swap].copy()
            else:
                point = int(rng.integers(1, n_genes))
                a[:point], b[:point] = b[:point], a[:point].copy()
        return a, b

    pop_genes = [random_genes() for _ in range(config.population)]
    if config.include_reference:
        pop_genes[0] = np.zeros(n_genes, dtype=int)
    pop = [evaluate(g, 0) for g in pop_genes]
    ranks, crowding = _rank_and_crowd([o for _, o in pop])
    trace = [_stats(0, [g for g, _ in pop], [o for _, o in pop], ranks)]

    combined = pop
    for generation in range(1, config.iterations + 1):
        offspring = []
        while len(offspring) < config.population:
            pa = pop[_tournament(rng, ranks, crowding, config.tournament_size)][0]
            pb = pop[_tournament(rng, ranks, crowding, config.tournament_size)][0]
            if rng.random() < config.crossover_rate:
                ca, cb = cross(pa, pb)
            else:
                ca, cb = pa.copy(), pb.copy()
            for child in (ca, cb):
                if len(offspring) < config.population:
                    offspring.append(evaluate(mutate(child), generation))
        combined = pop + offspring
        comb_objs = [o for _, o in combined]
        comb_ranks, comb_crowd = _rank_and_crowd(comb_objs)
        order = sorted(range(len(combined)),
                       key=lambda i: (comb_ranks[i], -comb_crowd[i], i))
        selected = order[:config.population]
        pop = [combined[i] for i in selected]
        # the survivors' combined-population ranks drive the next tournament
        ranks = [comb_ranks[i] for i in selected]
        crowding = [comb_crowd[i] for i in selected]
        trace.append(_stats(generation, [g for g, _ in combined], comb_objs,
                            comb_ranks))

    archive = ParetoArchive.from_population([g for g, _ in combined],
                                            [o for _, o in combined])
    return EvolveResult(archive=archive, trace=trace)


# ---------------------------------------------------------------------------
# Hypervolume (minimization, 2 or 3 objectives)


def _staircase_area(points_2d: np.ndarray, ref: Sequence[float]) -> float:
    """Union area of [p, ref] boxes for 2D minimization points."""
    pts = [p for p in points_2d if p[0] < ref[0] and p[1] < ref[1]]
    if not pts:
        return 0.0
    pts.sort(key=lambda p: (p[0], p[1]))
    area = 0.0
    best_y = ref[1]
    staircase = []
    for p in pts:
        if p[1] < best_y:
            staircase.append(p)
            best_y = p[1]
    for i, p in enumerate(staircase):
        next_x = staircase[i + 1][0] if i + 1 < len(staircase) else ref[0]
        area += (next_x - p[0]) * (ref[1] - p[1])
    return area


def hypervolume(points: Sequence[Sequence[float]], reference: Sequence[float]) -> float:
    """Dominated hypervolume of minimization points against a reference.

    Points at or beyond the reference contribute nothing.  Supports 2 and
    3 objectives (slab sweep over the last objective).
    """
    pts = np.asarray(points, dtype=float)
    ref = np.asarray(reference, dtype=float)
    if pts.ndim != 2 or pts.shape[1] not in (2, 3):
        raise ValueError("hypervolume expects an (n, 2) or (n, 3) point array")
    pts = pts[(pts < ref).all(axis=1)]
    if len(pts) == 0:
        return 0.0
    if pts.shape[1] == 2:
        return _staircase_area(pts, ref)
    z_values = np.unique(pts[:, 2])
    volume = 0.0
    for i, z in enumerate(z_values):
        z_top = z_values[i + 1] if i + 1 < len(z_values) else ref[2]
        active = pts[pts[:, 2] <= z][:, :2]
        volume += _staircase_area(active, ref[:2]) * (z_top - z)
    return float(volume)
