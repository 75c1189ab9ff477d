import numpy as np
import pytest

from mobo.errors import InputError
from mobo.moea import (
    Individual,
    VariationSettings,
    constrained_dominates,
    crowding_distance,
    domination_matrix,
    non_dominated_sort,
    nsga2_run,
    polynomial_mutation,
    sbx_crossover,
    select_for_verification,
    verify_front,
)
from mobo.pareto import dominates, hypervolume_2d
from mobo.problems import BNH


def bi_sphere(x):
    objectives = np.column_stack([np.sum(x**2, axis=1), np.sum((x - 1.0) ** 2, axis=1)])
    return objectives, np.full(len(x), -1.0)


def individual(objectives, constraint, x=(0.5,)):
    return Individual(x=tuple(x), objectives=tuple(objectives), constraint=constraint, rank=0, crowding=0.0)


def test_constrained_dominance_rules():
    feasible = individual((5.0, 5.0), -1.0)
    slightly = individual((0.0, 0.0), 0.1)
    badly = individual((0.0, 0.0), 0.5)
    assert constrained_dominates(feasible, slightly)
    assert not constrained_dominates(slightly, feasible)
    assert constrained_dominates(slightly, badly)
    a, b = individual((1.0, 2.0), 0.0), individual((2.0, 2.0), -3.0)
    assert constrained_dominates(a, b) == dominates(a.objectives, b.objectives)


def test_ranks_are_consistent_with_constrained_dominance():
    rng = np.random.default_rng(0)
    objectives = rng.random((60, 2))
    constraints = rng.normal(size=60)
    ranks = non_dominated_sort(objectives, constraints)
    dominance = domination_matrix(objectives, constraints)
    assert np.all(ranks >= 0)
    for i, j in zip(*np.nonzero(dominance)):
        assert ranks[i] < ranks[j]


def test_crowding_boundaries_are_infinite_and_duplicates_zero():
    objectives = np.array([[0.0, 1.0], [0.5, 0.5], [0.5, 0.5], [0.25, 0.75], [1.0, 0.0]])
    distance = crowding_distance(objectives)
    assert np.isinf(distance[0]) and np.isinf(distance[4])
    assert distance[1] == 0.0 and distance[2] == 0.0
    assert 0.0 < distance[3] < np.inf


def test_small_fronts_are_all_boundary():
    assert np.all(np.isinf(crowding_distance(np.array([[0.0, 1.0], [1.0, 0.0]]))))


def test_variation_operators_stay_in_unit_box():
    rng = np.random.default_rng(1)
    a, b = rng.random((50, 4)), rng.random((50, 4))
    a[:, 0], b[:, 0] = 0.0, 1.0
    child_a, child_b = sbx_crossover(a, b, eta=2.0, probability=1.0, rng=rng)
    mutated = polynomial_mutation(np.vstack([child_a, child_b]), eta=1.0, probability=1.0, rng=rng)
    for values in (child_a, child_b, mutated):
        assert np.all((values >= 0.0) & (values <= 1.0))


def test_zero_generations_returns_ranked_random_population():
    population = nsga2_run(bi_sphere, pop_size=20, generations=0, seed=0, dimension=2)
    assert population.generation == 0
    assert len(population) == 20
    assert np.any(population.ranks == 0)


def test_bi_sphere_front_reaches_most_of_true_hypervolume():
    population = nsga2_run(bi_sphere, pop_size=100, generations=100, seed=2, dimension=2)
    ref = np.array([2.2, 2.2])
    t = np.linspace(0.0, 1.0, 2001)
    true_front = np.column_stack([2 * t**2, 2 * (1 - t) ** 2])
    front = population.objectives[population.ranks == 0]
    assert hypervolume_2d(front, ref) >= 0.95 * hypervolume_2d(true_front, ref)


def test_same_seed_gives_identical_population():
    first = nsga2_run(bi_sphere, pop_size=16, generations=10, seed=5, dimension=3)
    second = nsga2_run(bi_sphere, pop_size=16, generations=10, seed=5, dimension=3)
    np.testing.assert_array_equal(first.x, second.x)
    np.testing.assert_array_equal(first.objectives, second.objectives)


def test_rank_zero_hypervolume_is_elitist():
    ref = np.array([3.0, 3.0])
    history = []

    def record(population):
        front = population.objectives[population.ranks == 0]
        history.append((hypervolume_2d(front, ref), len(front), front.min(axis=0)))

    nsga2_run(bi_sphere, pop_size=40, generations=30, seed=1, dimension=2, on_generation=record)
    assert len(history) == 30
    assert any(size == 40 for _, size, _ in history)
    for (previous, _, old_best), (current, size, best) in zip(history, history[1:]):
        # Crowding truncation of a full rank-0 set may cost volume, never the extremes
        assert np.all(best <= old_best + 1e-12)
        if size < 40:
            assert current >= previous - 1e-12


def test_settings_validation_and_mutation_default():
    assert VariationSettings().mutation_rate(12) == pytest.approx(1 / 12)
    with pytest.raises(InputError):
        VariationSettings(crossover_prob=1.5)
    with pytest.raises(InputError):
        nsga2_run(bi_sphere, pop_size=10, generations=1, seed=0)


def test_select_for_verification_spreads_over_front():
    t = np.linspace(0.0, 1.0, 11)
    front = np.column_stack([t, 1 - t])
    assert select_for_verification(front, k=3) == [0, 10, 5]
    assert select_for_verification(front[:4], k=10) == [0, 1, 2, 3]
    assert select_for_verification(front, k=0) == []


def test_verification_against_the_true_function_has_no_discrepancy():
    problem = BNH()
    points = np.random.default_rng(3).random((5, 2))
    front = []
    for p in points:
        e = BNH().evaluate(p)
        front.append(individual(e.objectives, e.g, x=e.point))
    records = verify_front(front, problem, workers=2)
    assert len(records) == 5
    assert problem.evaluations_used == 5
    for record in records:
        assert record.discrepancy < 1e-6
        assert record.evaluation.source == "nsga-verification"


def test_verifying_an_empty_front():
    assert verify_front([], BNH()) == []
