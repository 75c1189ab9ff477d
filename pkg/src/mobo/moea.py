"""
NSGA-II on fixed surrogates, plus the a-posteriori verification of the
resulting front against the true evaluator.

Selection uses constrained dominance: a feasible design beats an infeasible
one, two infeasible designs compare by constraint violation, two feasible
designs by Pareto dominance.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import InputError
from .gp import ModelSet
from .pareto import dominates
from .problems import Evaluation, Problem

logger = logging.getLogger(__name__)

POPULATION_SIZE = 100
GENERATIONS = 200
VERIFICATION_POINTS = 10
VERIFICATION_SOURCE = "nsga-verification"

SurrogateFunction = Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class VariationSettings:
    """SBX crossover and polynomial mutation parameters; mutation_prob 0 means 1/d."""

    crossover_eta: float = 15.0
    crossover_prob: float = 0.9
    mutation_eta: float = 20.0
    mutation_prob: float = 0.0

    def __post_init__(self) -> None:
        if self.crossover_eta < 0 or self.mutation_eta < 0:
            raise InputError("distribution indices must be non-negative")
        if not (0.0 <= self.crossover_prob <= 1.0 and 0.0 <= self.mutation_prob <= 1.0):
            raise InputError("operator probabilities must lie in [0, 1]")

    def mutation_rate(self, dimension: int) -> float:
        return self.mutation_prob if self.mutation_prob > 0 else 1.0 / dimension


@dataclass(frozen=True)
class Individual:
    x: Tuple[float, ...]
    objectives: Tuple[float, float]
    constraint: float
    rank: int
    crowding: float

    @property
    def feasible(self) -> bool:
        return self.constraint <= 0.0

    @property
    def violation(self) -> float:
        return max(self.constraint, 0.0)


@dataclass(eq=False)
class Population:
    """Designs with their surrogate objectives, constraint, rank and crowding distance."""

    x: np.ndarray
    objectives: np.ndarray
    constraints: np.ndarray
    ranks: np.ndarray
    crowding: np.ndarray
    generation: int = 0

    def __len__(self) -> int:
        return len(self.x)

    @property
    def individuals(self) -> List[Individual]:
        return [
            Individual(
                x=tuple(self.x[i].tolist()),
                objectives=(float(self.objectives[i, 0]), float(self.objectives[i, 1])),
                constraint=float(self.constraints[i]),
                rank=int(self.ranks[i]),
                crowding=float(self.crowding[i]),
            )
            for i in range(len(self))
        ]

    def front(self, rank: int = 0, feasible_only: bool = False) -> List[Individual]:
        """Individuals of one rank, ordered by f1."""
        members = [ind for ind in self.individuals if ind.rank == rank]
        if feasible_only:
            members = [ind for ind in members if ind.feasible]
        return sorted(members, key=lambda ind: ind.objectives)


def constrained_dominates(a: Individual, b: Individual) -> bool:
    if a.feasible and not b.feasible:
        return True
    if not a.feasible and not b.feasible:
        return a.violation < b.violation
    if a.feasible and b.feasible:
        return dominates(a.objectives, b.objectives)
    return False


def domination_matrix(objectives: np.ndarray, constraints: np.ndarray) -> np.ndarray:
    """Boolean (n, n) matrix: entry [i, j] is True iff i constrained-dominates j."""
    feasible = constraints <= 0
    violation = np.maximum(constraints, 0.0)
    no_worse = np.all(objectives[:, None, :] <= objectives[None, :, :], axis=2)
    better = np.any(objectives[:, None, :] < objectives[None, :, :], axis=2)
    both_feasible = feasible[:, None] & feasible[None, :]
    both_infeasible = ~feasible[:, None] & ~feasible[None, :]
    return (
        (feasible[:, None] & ~feasible[None, :])
        | (both_infeasible & (violation[:, None] < violation[None, :]))
        | (both_feasible & no_worse & better)
    )


def non_dominated_sort(objectives: np.ndarray, constraints: np.ndarray) -> np.ndarray:
    """Front index (0 = best) of every design under constrained dominance."""
    dominance = domination_matrix(objectives, constraints)
    remaining = dominance.sum(axis=0)
    ranks = np.full(len(objectives), -1, dtype=int)
    rank = 0
    current = np.flatnonzero(remaining == 0)
    while current.size:
        ranks[current] = rank
        remaining = remaining - dominance[current].sum(axis=0)
        remaining[ranks >= 0] = -1
        current = np.flatnonzero(remaining == 0)
        rank += 1
    return ranks


def crowding_distance(objectives: np.ndarray) -> np.ndarray:
    """
    Crowding distance of the members of one front.

    Identical objective pairs are collapsed first: the group gets the
    distance of a boundary pair (infinite) or 0 otherwise.
    """
    n = len(objectives)
    if n == 0:
        return np.empty(0)
    unique, inverse = np.unique(objectives, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).ravel()
    m = len(unique)
    distance = np.zeros(m)
    if m <= 2:
        distance[:] = np.inf
    else:
        for k in range(unique.shape[1]):
            order = np.argsort(unique[:, k], kind="stable")
            values = unique[order, k]
            distance[order[0]] = distance[order[-1]] = np.inf
            span = values[-1] - values[0]
            if span > 0:
                distance[order[1:-1]] += (values[2:] - values[:-2]) / span

    counts = np.bincount(inverse, minlength=m)
    boundary = np.isinf(distance)
    distance[(counts > 1) & ~boundary] = 0.0
    return distance[inverse]


def _rank_and_crowd(objectives: np.ndarray, constraints: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    ranks = non_dominated_sort(objectives, constraints)
    crowding = np.zeros(len(objectives))
    for rank in np.unique(ranks):
        members = np.flatnonzero(ranks == rank)
        crowding[members] = crowding_distance(objectives[members])
    return ranks, crowding


def _tournament(
    ranks: np.ndarray, crowding: np.ndarray, count: int, rng: np.random.Generator
) -> np.ndarray:
    """Binary tournaments on (rank asc, crowding desc); ties go to the first contestant."""
    a = rng.integers(len(ranks), size=count)
    b = rng.integers(len(ranks), size=count)
    a_wins = (ranks[a] < ranks[b]) | ((ranks[a] == ranks[b]) & (crowding[a] >= crowding[b]))
    return np.where(a_wins, a, b)


def _sbx_spread(u: np.ndarray, alpha: np.ndarray, eta: float) -> np.ndarray:
    exponent = 1.0 / (eta + 1.0)
    return np.where(
        u <= 1.0 / alpha,
        (u * alpha) ** exponent,
        (1.0 / np.maximum(2.0 - u * alpha, 1e-300)) ** exponent,
    )


def sbx_crossover(
    parents_a: np.ndarray,
    parents_b: np.ndarray,
    eta: float,
    probability: float,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, np.ndarray]:
    """Simulated binary crossover bounded to [0, 1], applied per pair with `probability`."""
    n, d = parents_a.shape
    child_a, child_b = parents_a.copy(), parents_b.copy()
    pair_active = rng.random(n) < probability
    gene_active = rng.random((n, d)) < 0.5
    u = rng.random((n, d))
    swap = rng.random((n, d)) < 0.5

    low = np.minimum(parents_a, parents_b)
    high = np.maximum(parents_a, parents_b)
    gap = high - low
    active = pair_active[:, None] & gene_active & (gap > 1e-14)
    safe_gap = np.where(active, gap, 1.0)

    beta = 1.0 + 2.0 * low / safe_gap
    alpha = 2.0 - beta ** -(eta + 1.0)
    first = 0.5 * ((low + high) - _sbx_spread(u, alpha, eta) * gap)

    beta = 1.0 + 2.0 * (1.0 - high) / safe_gap
    alpha = 2.0 - beta ** -(eta + 1.0)
    second = 0.5 * ((low + high) + _sbx_spread(u, alpha, eta) * gap)

    first, second = np.clip(first, 0.0, 1.0), np.clip(second, 0.0, 1.0)
    first, second = np.where(swap, second, first), np.where(swap, first, second)
    child_a = np.where(active, first, child_a)
    child_b = np.where(active, second, child_b)
    return child_a, child_b


def polynomial_mutation(
    x: np.ndarray, eta: float, probability: float, rng: np.random.Generator
) -> np.ndarray:
    """Bounded polynomial mutation on [0, 1], each gene with `probability`."""
    active = rng.random(x.shape) < probability
    u = rng.random(x.shape)
    power = 1.0 / (eta + 1.0)
    lower_side = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - x) ** (eta + 1.0)
    upper_side = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * x ** (eta + 1.0)
    delta = np.where(u < 0.5, lower_side**power - 1.0, 1.0 - upper_side**power)
    return np.clip(np.where(active, x + delta, x), 0.0, 1.0)


def _resolve(
    surrogates: Union[ModelSet, SurrogateFunction], dimension: Optional[int]
) -> Tuple[SurrogateFunction, int]:
    if isinstance(surrogates, ModelSet):
        return surrogates.predict_means, surrogates.dimension
    if not dimension or dimension < 1:
        raise InputError("nsga2_run needs a dimension when given a plain surrogate function")
    return surrogates, int(dimension)


def _evaluate(function: SurrogateFunction, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    objectives, constraints = function(x)
    return (
        np.asarray(objectives, dtype=float).reshape(len(x), 2),
        np.asarray(constraints, dtype=float).reshape(len(x)),
    )


def nsga2_run(
    surrogates: Union[ModelSet, SurrogateFunction],
    pop_size: int = POPULATION_SIZE,
    generations: int = GENERATIONS,
    seed: int = 0,
    dimension: Optional[int] = None,
    settings: Optional[VariationSettings] = None,
    on_generation: Optional[Callable[[Population], None]] = None,
) -> Population:
    """
    Evolve a population on frozen surrogates with elitist (mu + lambda) survival.

    Args:
        surrogates: A ModelSet (posterior means are used) or a function
            mapping an (m, d) array to ((m, 2) objectives, (m,) constraints)
        pop_size: Population size (at least 2)
        generations: Number of generations; 0 returns the ranked random start
        seed: Seed of every random draw in the run
        dimension: Required when `surrogates` is a plain function
        settings: Variation operator parameters
        on_generation: Called with the population after each generation

    Returns:
        The final ranked population
    """
    if pop_size < 2:
        raise InputError(f"population size must be >= 2, got {pop_size}")
    if generations < 0:
        raise InputError(f"generations must be >= 0, got {generations}")
    function, d = _resolve(surrogates, dimension)
    settings = settings or VariationSettings()
    rng = np.random.default_rng(seed)
    mutation_rate = settings.mutation_rate(d)

    x = rng.random((pop_size, d))
    objectives, constraints = _evaluate(function, x)
    ranks, crowding = _rank_and_crowd(objectives, constraints)
    population = Population(x, objectives, constraints, ranks, crowding, 0)

    pairs = (pop_size + 1) // 2
    for generation in range(1, generations + 1):
        mates = _tournament(population.ranks, population.crowding, 2 * pairs, rng)
        child_a, child_b = sbx_crossover(
            population.x[mates[:pairs]],
            population.x[mates[pairs:]],
            settings.crossover_eta,
            settings.crossover_prob,
            rng,
        )
        offspring = np.vstack([child_a, child_b])[:pop_size]
        offspring = polynomial_mutation(offspring, settings.mutation_eta, mutation_rate, rng)
        offspring_objectives, offspring_constraints = _evaluate(function, offspring)

        merged_x = np.vstack([population.x, offspring])
        merged_objectives = np.vstack([population.objectives, offspring_objectives])
        merged_constraints = np.concatenate([population.constraints, offspring_constraints])
        merged_ranks, merged_crowding = _rank_and_crowd(merged_objectives, merged_constraints)

        survivors = np.lexsort((-merged_crowding, merged_ranks))[:pop_size]
        # Crowding is recomputed on the survivors so truncated fronts keep their boundaries
        ranks, crowding = _rank_and_crowd(merged_objectives[survivors], merged_constraints[survivors])
        population = Population(
            merged_x[survivors],
            merged_objectives[survivors],
            merged_constraints[survivors],
            ranks,
            crowding,
            generation,
        )
        if on_generation is not None:
            on_generation(population)

    logger.info(
        f"NSGA-II finished after {population.generation} generations: "
        f"{int(np.sum(population.ranks == 0))} rank-0 designs, "
        f"{int(np.sum(population.constraints <= 0))} predicted feasible"
    )
    return population


def select_for_verification(objectives: np.ndarray, k: int = VERIFICATION_POINTS) -> List[int]:
    """
    Farthest-point sample of `k` front members in min-max normalized objective space.

    Starts from the member with the smallest f1; returns every index when the
    front has at most `k` members.
    """
    objectives = np.asarray(objectives, dtype=float).reshape(-1, 2)
    n = len(objectives)
    if k < 0:
        raise InputError(f"k must be >= 0, got {k}")
    if n <= k:
        return list(range(n))
    if k == 0:
        return []
    low = objectives.min(axis=0)
    span = objectives.max(axis=0) - low
    scaled = (objectives - low) / np.where(span > 0, span, 1.0)

    chosen = [int(np.argmin(objectives[:, 0]))]
    distance = np.linalg.norm(scaled - scaled[chosen[0]], axis=1)
    while len(chosen) < k:
        nxt = int(np.argmax(distance))
        chosen.append(nxt)
        distance = np.minimum(distance, np.linalg.norm(scaled - scaled[nxt], axis=1))
    return chosen


@dataclass(frozen=True)
class VerificationRecord:
    """A predicted front design paired with its true evaluation."""

    point: Tuple[float, ...]
    predicted: Tuple[float, float]
    predicted_constraint: float
    evaluation: Evaluation
    absolute_errors: Tuple[float, float] = field(init=False)

    def __post_init__(self) -> None:
        errors = (
            abs(self.evaluation.f1 - self.predicted[0]),
            abs(self.evaluation.f2 - self.predicted[1]),
        )
        object.__setattr__(self, "absolute_errors", errors)

    @property
    def simulated(self) -> Tuple[float, float]:
        return self.evaluation.objectives

    @property
    def discrepancy(self) -> float:
        """Euclidean distance between predicted and simulated objective pairs."""
        return float(np.hypot(*self.absolute_errors))

    @property
    def constraint_error(self) -> float:
        return abs(self.evaluation.g - self.predicted_constraint)


def verify_front(
    front: Sequence[Individual], problem: Problem, workers: int = 1
) -> List[VerificationRecord]:
    """Re-evaluate front designs on the true problem; order follows `front`."""
    front = list(front)
    if not front:
        return []

    def check(individual: Individual) -> VerificationRecord:
        evaluation = problem.evaluate(individual.x, source=VERIFICATION_SOURCE)
        return VerificationRecord(
            point=individual.x,
            predicted=individual.objectives,
            predicted_constraint=individual.constraint,
            evaluation=evaluation,
        )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            records = list(executor.map(check, front))
    else:
        records = [check(individual) for individual in front]

    logger.info(
        f"Verified {len(records)} front designs: mean discrepancy "
        f"{np.mean([r.discrepancy for r in records]):.6g}"
    )
    return records
