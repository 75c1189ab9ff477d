"""
Dominance relations, non-dominated filtering and exact 2-D hypervolume.

All objectives are minimized.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import InputError

logger = logging.getLogger(__name__)

REFERENCE_MARGIN = 0.1


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    """True iff `a` is no worse than `b` everywhere and better somewhere."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return bool(np.all(a <= b) and np.any(a < b))


def non_dominated_filter(points: Sequence[Sequence[float]]) -> List[int]:
    """Indices of the points no other point dominates, in input order."""
    points = np.asarray(points, dtype=float)
    if points.size == 0:
        return []
    points = points.reshape(len(points), -1)
    no_worse = np.all(points[:, None, :] <= points[None, :, :], axis=2)
    better = np.any(points[:, None, :] < points[None, :, :], axis=2)
    dominated = np.any(no_worse & better, axis=0)
    return np.flatnonzero(~dominated).tolist()


def _as_pairs(points: Sequence[Sequence[float]]) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    if points.size == 0:
        return np.empty((0, 2))
    points = points.reshape(-1, 2)
    return points


def hypervolume_2d(front: Sequence[Sequence[float]], ref: Sequence[float]) -> float:
    """
    Exact area dominated by `front` inside the box bounded by `ref`.

    Horizontal sweep in f1 order: each point improving the running best f2
    adds the slab [f1, ref1] x [f2, best]. Dominated points and points beyond
    the reference add nothing.
    """
    points = _as_pairs(front)
    ref = np.asarray(ref, dtype=float)
    inside = points[np.all(points < ref, axis=1)]
    if len(inside) == 0:
        return 0.0
    order = np.lexsort((inside[:, 1], inside[:, 0]))
    area = 0.0
    best_f2 = ref[1]
    for f1, f2 in inside[order]:
        if f2 < best_f2:
            area += (ref[0] - f1) * (best_f2 - f2)
            best_f2 = f2
    return float(area)


def hypervolume_improvement(
    front: Sequence[Sequence[float]], ref: Sequence[float], candidate: Sequence[float]
) -> float:
    """Hypervolume gained by adding `candidate` to `front`."""
    points = _as_pairs(front)
    extended = np.vstack([points, np.asarray(candidate, dtype=float).reshape(1, 2)])
    return max(hypervolume_2d(extended, ref) - hypervolume_2d(points, ref), 0.0)


def staircase(front: Sequence[Sequence[float]], ref: Sequence[float]) -> np.ndarray:
    """Non-dominated, de-duplicated points strictly inside `ref`, sorted by f1."""
    points = _as_pairs(front)
    ref = np.asarray(ref, dtype=float)
    points = points[np.all(points < ref, axis=1)]
    if len(points) == 0:
        return points
    points = np.unique(points[non_dominated_filter(points)], axis=0)
    return points[np.argsort(points[:, 0], kind="stable")]


def hypervolume_improvement_batch(
    front: Sequence[Sequence[float]], ref: Sequence[float], candidates: np.ndarray
) -> np.ndarray:
    """
    Hypervolume improvement of many candidates, each added alone to `front`.

    The box [c, ref] loses the part the front already dominates; clipping the
    staircase to the box keeps it monotone, so one sweep per candidate is a
    cumulative sum over the front.
    """
    ref = np.asarray(ref, dtype=float)
    candidates = np.asarray(candidates, dtype=float).reshape(-1, 2)
    box = np.prod(np.clip(ref - candidates, 0.0, None), axis=1)
    steps = staircase(front, ref)
    if len(steps) == 0:
        return box
    clipped = np.minimum(np.maximum(steps[None, :, :], candidates[:, None, :]), ref)
    next_f1 = np.concatenate(
        [clipped[:, 1:, 0], np.full((len(candidates), 1), ref[0])], axis=1
    )
    dominated = ((next_f1 - clipped[:, :, 0]) * (ref[1] - clipped[:, :, 1])).sum(axis=1)
    return np.maximum(box - dominated, 0.0)


def reference_point_from(
    objectives: np.ndarray, feasible: Optional[np.ndarray] = None, margin: float = REFERENCE_MARGIN
) -> np.ndarray:
    """
    Reference point: worst feasible objective plus `margin` of the observed range.

    Falls back to all points when none is feasible; a zero range uses the
    magnitude of the worst value (or 1) instead.
    """
    objectives = _as_pairs(objectives)
    if len(objectives) == 0:
        raise InputError("reference_point_from needs at least one objective pair")
    if feasible is not None and np.any(feasible):
        objectives = objectives[np.asarray(feasible, dtype=bool)]
    worst = objectives.max(axis=0)
    span = worst - objectives.min(axis=0)
    span = np.where(span > 0, span, np.maximum(np.abs(worst), 1.0))
    return worst + margin * span


def compromise_index(front: Sequence[Sequence[float]]) -> int:
    """Index of the front point closest to the ideal point after min-max scaling."""
    points = _as_pairs(front)
    if len(points) == 0:
        raise InputError("compromise_index needs a non-empty front")
    low = points.min(axis=0)
    span = points.max(axis=0) - low
    span = np.where(span > 0, span, 1.0)
    return int(np.argmin(np.linalg.norm((points - low) / span, axis=1)))


@dataclass(frozen=True)
class ArchiveEntry:
    point: Tuple[float, ...]
    objectives: Tuple[float, float]
    constraint: float
    feasible: bool
    beyond_reference: bool


class ParetoArchive:
    """Feasible non-dominated set with a frozen reference point."""

    def __init__(self, reference_point: Sequence[float]) -> None:
        self.reference_point = np.asarray(reference_point, dtype=float).reshape(2)
        self.entries: List[ArchiveEntry] = []

    def __len__(self) -> int:
        return len(self.entries)

    def add(
        self, point: Sequence[float], objectives: Sequence[float], constraint: float
    ) -> bool:
        """
        Offer one evaluated design.

        Returns:
            True if it entered the archive
        """
        if constraint > 0:
            return False
        objectives = tuple(float(v) for v in objectives)
        if any(dominates(e.objectives, objectives) for e in self.entries):
            return False
        self.entries = [e for e in self.entries if not dominates(objectives, e.objectives)]
        self.entries.append(
            ArchiveEntry(
                point=tuple(float(v) for v in point),
                objectives=objectives,
                constraint=float(constraint),
                feasible=True,
                beyond_reference=bool(np.any(np.asarray(objectives) > self.reference_point)),
            )
        )
        return True

    def objectives(self) -> np.ndarray:
        if not self.entries:
            return np.empty((0, 2))
        return np.array([e.objectives for e in self.entries])

    def sorted_entries(self) -> List[ArchiveEntry]:
        return sorted(self.entries, key=lambda e: (e.objectives[0], e.objectives[1]))

    @property
    def hypervolume(self) -> float:
        return hypervolume_2d(self.objectives(), self.reference_point)
