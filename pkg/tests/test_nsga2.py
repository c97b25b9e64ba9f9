import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from semeplan.nsga2 import (EvolveError, GaConfig, ParetoArchive,
                            crowding_distance, dominates, evolve,
                            fast_nondominated_sort, hypervolume)


def brute_force_ranks(objectives):
    """Iterative peeling with pairwise domination checks."""
    remaining = set(range(len(objectives)))
    ranks = [None] * len(objectives)
    level = 0
    while remaining:
        front = {p for p in remaining
                 if not any(dominates(objectives[q], objectives[p])
                            for q in remaining if q != p)}
        for p in front:
            ranks[p] = level
        remaining -= front
        level += 1
    return ranks


def test_dominates_basics():
    assert dominates((0, 0, 0), (1, 1, 1))
    assert not dominates((1, 1, 1), (1, 1, 1))
    assert not dominates((0, 2, 0), (1, 1, 1))
    assert not dominates((1, 1, 1), (0, 2, 0))
    assert dominates((1, 1, 0), (1, 1, 1))


def test_sort_chain_and_duplicates():
    chain = [(0.0, 0.0, 0.0), (1.0, 1.0, 1.0), (2.0, 2.0, 2.0)]
    assert fast_nondominated_sort(chain) == [0, 1, 2]
    same = [(1.0, 2.0, 3.0)] * 5
    assert fast_nondominated_sort(same) == [0] * 5


def test_sort_matches_brute_force_on_random_populations():
    rng = np.random.default_rng(1)
    for _ in range(30):
        n = int(rng.integers(1, 40))
        objs = rng.integers(0, 5, size=(n, 3)).astype(float)
        objs = [tuple(row) for row in objs]
        assert fast_nondominated_sort(objs) == brute_force_ranks(objs)


def test_crowding_small_fronts_infinite():
    assert crowding_distance([(1.0, 2.0, 3.0)]) == [float("inf")]
    assert crowding_distance([(1.0, 2.0, 3.0), (0.0, 3.0, 2.0)]) \
        == [float("inf")] * 2


def test_crowding_three_collinear_points():
    # one varying objective: interior point gets (next - prev) / range = 1
    front = [(0.0, 7.0, 7.0), (0.5, 7.0, 7.0), (1.0, 7.0, 7.0)]
    dist = crowding_distance(front)
    assert dist[0] == float("inf")
    assert dist[2] == float("inf")
    assert dist[1] == pytest.approx(1.0)


def test_crowding_duplicated_interior_points_finite():
    front = [(0.0, 0.0), (0.5, 0.5), (0.5, 0.5), (1.0, 1.0)]
    dist = crowding_distance(front)
    assert dist[1] == pytest.approx(dist[2])
    assert np.isfinite(dist[1])


def leading_ones_evaluator(genes):
    genes = np.asarray(genes, int)
    cost = genes.sum() / (4.0 * len(genes))
    spread = float(((genes > 0) & (genes % 2 == 0)).sum()) / len(genes)
    coverage = float(len(genes) - np.count_nonzero(genes))
    return genes, (coverage, cost, spread)


def test_evolve_deterministic_and_consistent():
    alph = [(0, 1, 2, 3, 4)] * 5
    cfg = GaConfig(population=8, iterations=30, seed=123, mutation_rate=0.2)
    a = evolve(cfg, leading_ones_evaluator, alph)
    b = evolve(cfg, leading_ones_evaluator, alph)
    assert [e.genes for e in a.archive] == [e.genes for e in b.archive]
    assert [e.objectives for e in a.archive] == [e.objectives for e in b.archive]
    assert len(a.archive) > 0
    # mutual non-domination inside the archive
    for e in a.archive:
        for f in a.archive:
            assert not dominates(e.objectives, f.objectives) or e is f


def test_evolve_elitism_monotone_best():
    alph = [(0, 1, 2, 3, 4)] * 6
    cfg = GaConfig(population=8, iterations=40, seed=5, mutation_rate=0.3)
    result = evolve(cfg, leading_ones_evaluator, alph)
    best = np.array([row.best for row in result.trace])
    assert (np.diff(best, axis=0) <= 1e-12).all()


def test_evolve_respects_alphabets():
    alph = [(0, 2), (0, 3), (0,)]
    seen = set()

    def evaluator(genes):
        genes = np.asarray(genes, int)
        seen.add(tuple(genes))
        return genes, (float(genes.sum()), 0.0, 0.0)

    cfg = GaConfig(population=6, iterations=25, seed=9, mutation_rate=0.5)
    evolve(cfg, evaluator, alph)
    for genes in seen:
        assert genes[0] in (0, 2)
        assert genes[1] in (0, 3)
        assert genes[2] == 0


def test_evolve_single_site_trivial():
    cfg = GaConfig(population=4, iterations=5, seed=0, mutation_rate=0.5)
    result = evolve(cfg, leading_ones_evaluator, [(0, 1)])
    assert len(result.archive) >= 1


def test_evolve_reports_failing_generation():
    calls = {"n": 0}

    def flaky(genes):
        calls["n"] += 1
        if calls["n"] > 10:
            raise ValueError("boom")
        return np.asarray(genes, int), (0.0, 0.0, 0.0)

    cfg = GaConfig(population=4, iterations=50, seed=0)
    with pytest.raises(EvolveError, match="generation"):
        evolve(cfg, flaky, [(0, 1)] * 3)


def test_config_validation():
    with pytest.raises(ValueError, match="population"):
        GaConfig(population=5, iterations=10)
    with pytest.raises(ValueError, match="population"):
        GaConfig(population=2, iterations=10)
    with pytest.raises(ValueError, match="iterations"):
        GaConfig(population=4, iterations=0)
    with pytest.raises(ValueError, match="crossover_rate"):
        GaConfig(population=4, iterations=1, crossover_rate=1.5)
    with pytest.raises(ValueError, match="crossover"):
        GaConfig(population=4, iterations=1, crossover="twirl")


def test_reference_injection():
    cfg = GaConfig(population=4, iterations=1, seed=0)
    seen = []

    def evaluator(genes):
        genes = np.asarray(genes, int)
        seen.append(tuple(genes))
        return genes, (1.0, 1.0, 1.0)

    evolve(cfg, evaluator, [(0, 1)] * 4)
    assert seen[0] == (0, 0, 0, 0)


def test_hypervolume_single_point():
    assert hypervolume([[1.0, 1.0, 1.0]], [2.0, 2.0, 2.0]) == pytest.approx(1.0)
    assert hypervolume([[1.0, 1.0]], [3.0, 2.0]) == pytest.approx(2.0)
    assert hypervolume([[2.0, 2.0, 2.0]], [2.0, 2.0, 2.0]) == 0.0


def test_hypervolume_two_overlapping_boxes():
    # boxes [1,4]x[2,4] and [2,4]x[1,4]: union area 9 - 4 + ... = hand: 6+6-4=8
    got = hypervolume([[1.0, 2.0], [2.0, 1.0]], [4.0, 4.0])
    assert got == pytest.approx(8.0)
    got3 = hypervolume([[1.0, 2.0, 0.0], [2.0, 1.0, 0.0]], [4.0, 4.0, 1.0])
    assert got3 == pytest.approx(8.0)


def test_hypervolume_dominated_points_do_not_add():
    pts = [[1.0, 1.0, 1.0], [1.5, 1.5, 1.5]]
    assert hypervolume(pts, [2.0, 2.0, 2.0]) == pytest.approx(1.0)


@settings(max_examples=25)
@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1)),
                min_size=1, max_size=12))
def test_hypervolume_matches_monte_carlo(points):
    ref = (1.1, 1.1, 1.1)
    exact = hypervolume(points, ref)
    rng = np.random.default_rng(0)
    samples = rng.uniform(0.0, 1.1, size=(20000, 3))
    pts = np.asarray(points)
    inside = np.zeros(len(samples), dtype=bool)
    for p in pts:
        inside |= (samples >= p).all(axis=1)
    mc = inside.mean() * 1.1 ** 3
    assert exact == pytest.approx(mc, abs=0.05)


def test_archive_from_population_dedup():
    genes = [np.array([1, 0]), np.array([1, 0]), np.array([0, 1])]
    objs = [(1.0, 0.0, 0.0), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0)]
    archive = ParetoArchive.from_population(genes, objs)
    assert len(archive) == 2
