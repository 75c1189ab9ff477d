"""
Latin Hypercube designs in the unit hypercube, optimized under the maximin criterion.

Points sit at stratum centers (i + 0.5) / n. The optimizer only swaps two rows
inside one column, so every design it returns keeps exactly one point per
stratum on every axis.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .errors import InputError

logger = logging.getLogger(__name__)

PROPOSALS_PER_DIMENSION = 10_000

# Sentinel for the diagonal of the integer distance matrix
_SELF_DISTANCE = np.iinfo(np.int64).max // 4


@dataclass(frozen=True)
class Design:
    """A Latin Hypercube design with its maximin score."""

    points: np.ndarray
    seed: int
    maximin_distance: float

    @property
    def size(self) -> int:
        return int(self.points.shape[0])

    @property
    def dimension(self) -> int:
        return int(self.points.shape[1])


def latin_hypercube(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """Unoptimized stratified design: one random permutation of the strata per column."""
    if n < 1 or d < 1:
        raise InputError(f"latin_hypercube needs n >= 1 and d >= 1, got n={n}, d={d}")
    strata = np.column_stack([rng.permutation(n) for _ in range(d)])
    return (strata + 0.5) / n


def maximin_score(points: np.ndarray) -> float:
    """Minimum pairwise Euclidean distance of a point set."""
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[0] < 2:
        raise InputError("maximin_score needs at least two points in a 2-D array")
    return float(pdist(points).min())


def lhs_maximin(n: int, d: int, seed: int, iterations: Optional[int] = None) -> Design:
    """
    Build a maximin-optimized Latin Hypercube design.

    Args:
        n: Number of points (at least 2)
        d: Dimension (at least 1)
        seed: Seed of the permutation and proposal stream
        iterations: Number of swap proposals; defaults to 10,000 * d.
            Zero returns the unoptimized design drawn from the same seed.

    Returns:
        The optimized design
    """
    if n < 2:
        raise InputError(f"lhs_maximin needs at least 2 points, got {n}")
    if d < 1:
        raise InputError(f"lhs_maximin needs dimension >= 1, got {d}")
    budget = PROPOSALS_PER_DIMENSION * d if iterations is None else int(iterations)

    rng = np.random.default_rng(seed)
    strata = np.column_stack([rng.permutation(n) for _ in range(d)]).astype(np.int64)
    best_squared = _optimize_strata(strata, rng, budget)

    points = (strata + 0.5) / n
    # Stratum units keep the comparison exact; convert once at the end
    maximin = float(np.sqrt(best_squared)) / n
    logger.debug(f"LHS maximin design n={n} d={d} seed={seed}: score {maximin:.6g}")
    return Design(points=points, seed=int(seed), maximin_distance=maximin)


def _optimize_strata(strata: np.ndarray, rng: np.random.Generator, budget: int) -> int:
    """
    Hill-climb the maximin score of an integer strata matrix in place.

    A proposal swaps two rows in one column and is accepted iff the minimum
    squared pairwise distance does not decrease. Distances are integers in
    stratum units, so acceptance is exact.

    Returns:
        The final minimum squared distance in stratum units
    """
    n, d = strata.shape
    squared = squareform(pdist(strata, "sqeuclidean")).round().astype(np.int64)
    np.fill_diagonal(squared, _SELF_DISTANCE)
    row_min = squared.min(axis=1)
    row_arg = squared.argmin(axis=1)
    score = int(row_min.min())
    if budget <= 0:
        return score

    columns = rng.integers(d, size=budget)
    pairs = rng.integers(n, size=(budget, 2))

    for c, (i, j) in zip(columns, pairs):
        if i == j:
            continue
        column = strata[:, c]
        a, b = column[i], column[j]
        delta = (b - column) ** 2 - (a - column) ** 2

        new_i = squared[i] + delta
        new_j = squared[j] - delta
        new_i[i] = _SELF_DISTANCE
        new_j[j] = _SELF_DISTANCE
        # The distance between the two swapped rows is unchanged
        new_i[j] = squared[i, j]
        new_j[i] = squared[j, i]

        if min(new_i.min(), new_j.min()) < score:
            continue

        strata[i, c], strata[j, c] = b, a
        squared[i, :] = new_i
        squared[:, i] = new_i
        squared[j, :] = new_j
        squared[:, j] = new_j

        stale = np.flatnonzero((row_arg == i) | (row_arg == j))
        candidate = np.minimum(new_i, new_j)
        candidate_arg = np.where(new_i <= new_j, i, j)
        better = candidate < row_min
        row_min = np.where(better, candidate, row_min)
        row_arg = np.where(better, candidate_arg, row_arg)
        if stale.size:
            row_min[stale] = squared[stale].min(axis=1)
            row_arg[stale] = squared[stale].argmin(axis=1)
        for k in (i, j):
            row_min[k] = squared[k].min()
            row_arg[k] = squared[k].argmin()
        score = int(row_min.min())

    return score
