"""
Infill criteria: expected improvement, ParEGO scalarization, Monte-Carlo
expected hypervolume improvement, feasibility weighting and greedy q-batch
selection with fantasy observations.

Criteria are maximized over the unit hypercube by `maximize_acquisition`.
Monte-Carlo criteria use fixed standard-normal base samples per selection
step, which makes them deterministic, smooth functions of the design.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import expit
from scipy.stats import norm

from .doe import latin_hypercube
from .errors import InputError
from .gp import GaussianProcessModel, ModelSet, predict
from .pareto import hypervolume_improvement_batch, non_dominated_filter

logger = logging.getLogger(__name__)

PAREGO_ALPHA = 0.05
MC_SAMPLES = 2**12
FINAL_MC_SAMPLES = 2**16
RESTARTS = 32
RAW_SAMPLES = 512
INITIAL_STEP = 0.1
MINIMUM_STEP = 1e-4
TEMPERATURE_SCALE = 1e-3
FALLBACK_CANDIDATES = 256
DUPLICATE_DISTANCE = 1e-9

# Upper bound on points x samples held in memory by one criterion call
_CHUNK_ELEMENTS = 2**18

Criterion = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ScalarizationWeights:
    w: float
    alpha: float = PAREGO_ALPHA

    def __post_init__(self) -> None:
        if not 0.0 <= self.w <= 1.0:
            raise InputError(f"weight w must lie in [0, 1], got {self.w}")
        if not self.alpha > 0:
            raise InputError(f"alpha must be positive, got {self.alpha}")


@dataclass
class AcquisitionContext:
    """
    Everything an infill criterion reads.

    `observed_objectives` / `observed_constraints` hold true evaluations only;
    `fantasy_objectives` / `fantasy_constraints` grow with the virtual
    observations made while a batch is built.
    """

    models: ModelSet
    observed_objectives: np.ndarray
    observed_constraints: np.ndarray
    reference_point: np.ndarray
    front: np.ndarray
    mc_sample_count: int = MC_SAMPLES
    final_mc_sample_count: int = FINAL_MC_SAMPLES
    restarts: int = RESTARTS
    raw_samples: int = RAW_SAMPLES
    sigmoid_temperature: float = TEMPERATURE_SCALE
    alpha: float = PAREGO_ALPHA
    fantasies: List[np.ndarray] = field(default_factory=list)
    fantasy_objectives: List[Tuple[float, float]] = field(default_factory=list)
    fantasy_constraints: List[float] = field(default_factory=list)

    @classmethod
    def from_observations(
        cls,
        models: ModelSet,
        objectives: np.ndarray,
        constraints: np.ndarray,
        reference_point: Sequence[float],
        front: np.ndarray,
        temperature_scale: float = TEMPERATURE_SCALE,
        **settings,
    ) -> "AcquisitionContext":
        """Build a context, deriving the sigmoid temperature from the constraint range."""
        constraints = np.asarray(constraints, dtype=float)
        spread = float(constraints.max() - constraints.min()) if constraints.size else 0.0
        temperature = temperature_scale * (spread if spread > 0 else 1.0)
        return cls(
            models=models,
            observed_objectives=np.asarray(objectives, dtype=float).reshape(-1, 2),
            observed_constraints=constraints,
            reference_point=np.asarray(reference_point, dtype=float),
            front=np.asarray(front, dtype=float).reshape(-1, 2),
            sigmoid_temperature=temperature,
            **settings,
        )

    @property
    def dimension(self) -> int:
        return self.models.dimension

    def all_objectives(self) -> np.ndarray:
        if not self.fantasy_objectives:
            return self.observed_objectives
        return np.vstack([self.observed_objectives, np.array(self.fantasy_objectives)])

    def all_constraints(self) -> np.ndarray:
        return np.concatenate([self.observed_constraints, np.array(self.fantasy_constraints)])

    def current_front(self) -> np.ndarray:
        """Archive front plus feasible fantasy objectives, non-dominated."""
        feasible = [f for f, g in zip(self.fantasy_objectives, self.fantasy_constraints) if g <= 0]
        if not feasible:
            return self.front
        points = np.vstack([self.front, np.array(feasible)])
        return points[non_dominated_filter(points)]


@dataclass
class BatchSelection:
    """Points chosen for one iteration with their diagnostics."""

    points: np.ndarray
    values: List[float]
    weights: List[Optional[float]]
    fallbacks: List[bool]


def improvement(best: float, prediction_mean: float) -> float:
    return max(best - prediction_mean, 0.0)


def ei_from_moments(mean: np.ndarray, variance: np.ndarray, best: float) -> np.ndarray:
    """Analytic expected improvement below `best` for Gaussian predictions."""
    std = np.sqrt(np.maximum(np.asarray(variance, dtype=float), 0.0))
    gap = best - np.asarray(mean, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = gap / std
        value = std * (z * norm.cdf(z) + norm.pdf(z))
    return np.maximum(np.where(std > 0, value, gap), 0.0)


def expected_improvement(model: GaussianProcessModel, best: float, x: Sequence[float]) -> float:
    mean, variance = predict(model, x)
    return float(ei_from_moments(mean, variance, best))


def parego_scalarize(f1, f2, weights: ScalarizationWeights):
    """Augmented Chebyshev scalarization of normalized objectives."""
    weighted_1 = weights.w * f1
    weighted_2 = (1.0 - weights.w) * f2
    return weights.alpha * (weighted_1 + weighted_2) + np.maximum(weighted_1, weighted_2)


def feasibility_from_moments(mean: np.ndarray, variance: np.ndarray) -> np.ndarray:
    """P(g <= 0) under Gaussian predictions; an indicator when the variance is zero."""
    mean = np.asarray(mean, dtype=float)
    std = np.sqrt(np.maximum(np.asarray(variance, dtype=float), 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        probability = norm.cdf(-mean / std)
    return np.where(std > 0, probability, (mean <= 0).astype(float))


def feasibility_probability(g_model: GaussianProcessModel, x: Sequence[float]) -> float:
    mean, variance = predict(g_model, x)
    return float(feasibility_from_moments(mean, variance))


def constrained_ei(
    objective_model: GaussianProcessModel,
    g_model: GaussianProcessModel,
    best: float,
    x: Sequence[float],
) -> float:
    """Expected feasible improvement: EI times the probability of feasibility."""
    return expected_improvement(objective_model, best, x) * feasibility_probability(g_model, x)


def _sample_outputs(
    models: ModelSet, points: np.ndarray, base_samples: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Posterior samples (m, s) of f1, f2, g sharing `base_samples` (s, 3)."""
    means, variances = models.predict_many(points)
    stds = np.sqrt(variances)
    samples = means[:, None, :] + stds[:, None, :] * base_samples[None, :, :]
    return samples[:, :, 0], samples[:, :, 1], samples[:, :, 2]


def _chunked(criterion: Criterion, samples: int) -> Criterion:
    chunk = max(1, _CHUNK_ELEMENTS // max(samples, 1))

    def evaluate(points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        return np.concatenate(
            [criterion(points[i : i + chunk]) for i in range(0, len(points), chunk)]
        )

    return evaluate


def ehvi_from_samples(
    f1: np.ndarray,
    f2: np.ndarray,
    g: np.ndarray,
    front: np.ndarray,
    reference_point: np.ndarray,
    temperature: float,
) -> np.ndarray:
    """Monte-Carlo EHVI per row of (m, s) sample arrays, sigmoid-weighted by feasibility."""
    m, s = f1.shape
    pairs = np.column_stack([f1.ravel(), f2.ravel()])
    gains = hypervolume_improvement_batch(front, reference_point, pairs).reshape(m, s)
    weights = expit(-g / max(temperature, 1e-300))
    return (gains * weights).mean(axis=1)


def _ehvi_criterion(context: AcquisitionContext, models: ModelSet, base: np.ndarray) -> Criterion:
    front = context.current_front()

    def criterion(points: np.ndarray) -> np.ndarray:
        f1, f2, g = _sample_outputs(models, points, base)
        return ehvi_from_samples(
            f1, f2, g, front, context.reference_point, context.sigmoid_temperature
        )

    return _chunked(criterion, len(base))


def ehvi_mc(context: AcquisitionContext, x: Sequence[float], seed: int = 0) -> float:
    """Monte-Carlo EHVI at one point with `mc_sample_count` joint posterior samples."""
    base = np.random.default_rng(seed).standard_normal((context.mc_sample_count, 3))
    point = np.asarray(x, dtype=float).reshape(1, -1)
    return float(_ehvi_criterion(context, context.models, base)(point)[0])


def _normalization(objectives: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    low = objectives.min(axis=0)
    span = objectives.max(axis=0) - low
    return low, np.where(span > 0, span, 1.0)


def _parego_incumbent(
    context: AcquisitionContext, weights: ScalarizationWeights, low: np.ndarray, span: np.ndarray
) -> float:
    objectives = (context.all_objectives() - low) / span
    scalarized = parego_scalarize(objectives[:, 0], objectives[:, 1], weights)
    feasible = context.all_constraints() <= 0
    # Without a feasible point any improvement on the worst value counts
    return float(scalarized[feasible].min() if np.any(feasible) else scalarized.max())


def _parego_criterion(
    context: AcquisitionContext,
    models: ModelSet,
    base: np.ndarray,
    weights: ScalarizationWeights,
    low: np.ndarray,
    span: np.ndarray,
    best: float,
) -> Criterion:
    def criterion(points: np.ndarray) -> np.ndarray:
        f1, f2, g = _sample_outputs(models, points, base)
        scalarized = parego_scalarize((f1 - low[0]) / span[0], (f2 - low[1]) / span[1], weights)
        gains = np.maximum(best - scalarized, 0.0)
        feasibility = expit(-g / max(context.sigmoid_temperature, 1e-300))
        return (gains * feasibility).mean(axis=1)

    return _chunked(criterion, len(base))


def _pattern_search(
    criterion: Criterion,
    start: np.ndarray,
    value: float,
    step: float = INITIAL_STEP,
    minimum_step: float = MINIMUM_STEP,
    max_moves: int = 10_000,
) -> Tuple[np.ndarray, float]:
    """Compass search: move to the best improving +/- step along any axis, else halve."""
    x = start.copy()
    d = len(x)
    directions = np.vstack([np.eye(d), -np.eye(d)])
    moves = 0
    while step >= minimum_step and moves < max_moves:
        neighbours = np.clip(x[None, :] + step * directions, 0.0, 1.0)
        values = criterion(neighbours)
        best = int(np.argmax(values))
        if values[best] > value:
            x, value = neighbours[best], float(values[best])
            moves += 1
        else:
            step /= 2.0
    return x, value


def maximize_acquisition(
    criterion: Criterion,
    dimension: int,
    restarts: int = RESTARTS,
    seed: int = 0,
    raw_samples: int = 0,
) -> Tuple[np.ndarray, float]:
    """
    Maximize a vectorized criterion over [0, 1]^dimension.

    Restart points come from a Latin Hypercube; when `raw_samples` exceeds
    `restarts`, a larger hypercube is scored first and its best `restarts`
    points are kept. Each restart is refined by compass search with the step
    halving from 0.1 down to 1e-4.

    Returns:
        (best point, criterion value there)
    """
    if dimension < 1:
        raise InputError(f"dimension must be >= 1, got {dimension}")
    rng = np.random.default_rng(seed)
    restarts = max(int(restarts), 1)
    if raw_samples > restarts:
        pool = latin_hypercube(raw_samples, dimension, rng)
        pool_values = criterion(pool)
        keep = np.argsort(-pool_values, kind="stable")[:restarts]
        starts, start_values = pool[keep], pool_values[keep]
    else:
        starts = latin_hypercube(restarts, dimension, rng)
        start_values = criterion(starts)

    best_point, best_value = starts[0], -np.inf
    for start, value in zip(starts, start_values):
        point, refined = _pattern_search(criterion, start, float(value))
        if refined > best_value:
            best_point, best_value = point, refined
    return best_point, float(best_value)


def _space_filling_fallback(
    existing: np.ndarray, dimension: int, rng: np.random.Generator
) -> np.ndarray:
    """Candidate farthest from every existing point, out of a random hypercube."""
    candidates = latin_hypercube(FALLBACK_CANDIDATES, dimension, rng)
    if len(existing) == 0:
        return candidates[0]
    distances = cdist(candidates, existing).min(axis=1)
    return candidates[int(np.argmax(distances))]


def _settle_point(
    point: np.ndarray,
    value: float,
    context: AcquisitionContext,
    models: ModelSet,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, bool]:
    """Keep the maximizer unless it scored zero or repeats a known point."""
    existing = models.training_inputs
    duplicate = cdist(point[None, :], existing).min() <= DUPLICATE_DISTANCE
    if value > 0 and not duplicate:
        return point, False
    fallback = _space_filling_fallback(existing, context.dimension, rng)
    logger.info(
        f"Infill maximization {'found only a known point' if duplicate else 'scored zero'}; "
        f"using space-filling fallback {np.round(fallback, 4).tolist()}"
    )
    return fallback, True


def _add_fantasy(
    context: AcquisitionContext, models: ModelSet, point: np.ndarray, fantasy_rng: np.random.Generator
) -> ModelSet:
    seeds = [int(s) for s in fantasy_rng.integers(2**63, size=3)]
    f1, f2, g = models.sample_posterior(point, seeds)
    context.fantasies.append(point)
    context.fantasy_objectives.append((f1, f2))
    context.fantasy_constraints.append(g)
    return models.condition_on_virtual(point, (f1, f2, g))


def _streams(seed: int, fantasy_seed: Optional[int]) -> Tuple[np.random.Generator, np.random.Generator]:
    if fantasy_seed is None:
        select_seq, fantasy_seq = np.random.SeedSequence(seed).spawn(2)
        return np.random.default_rng(select_seq), np.random.default_rng(fantasy_seq)
    return np.random.default_rng(seed), np.random.default_rng(fantasy_seed)


def qparego_select(
    context: AcquisitionContext, q: int, seed: int, fantasy_seed: Optional[int] = None
) -> BatchSelection:
    """
    Greedy q-batch ParEGO.

    Each point draws a fresh weight w ~ U(0, 1), maximizes the Monte-Carlo
    expected feasible improvement of the scalarized objective samples, then
    every model is conditioned on one posterior sample at the chosen point.
    """
    if q < 1:
        raise InputError(f"batch size must be >= 1, got {q}")
    rng, fantasy_rng = _streams(seed, fantasy_seed)
    low, span = _normalization(context.observed_objectives)
    models = context.models
    points, values, weights, fallbacks = [], [], [], []

    for _ in range(q):
        w = float(rng.uniform())
        scalarization = ScalarizationWeights(w, context.alpha)
        best = _parego_incumbent(context, scalarization, low, span)
        base = rng.standard_normal((context.mc_sample_count, 3))
        criterion = _parego_criterion(context, models, base, scalarization, low, span, best)
        point, value = maximize_acquisition(
            criterion,
            context.dimension,
            context.restarts,
            int(rng.integers(2**63)),
            context.raw_samples,
        )
        point, fallback = _settle_point(point, value, context, models, rng)

        final_base = rng.standard_normal((context.final_mc_sample_count, 3))
        final_criterion = _parego_criterion(context, models, final_base, scalarization, low, span, best)
        score = float(final_criterion(point[None, :])[0])
        logger.info(f"qParEGO pick w={w:.4f} value={score:.6g} x={np.round(point, 4).tolist()}")

        models = _add_fantasy(context, models, point, fantasy_rng)
        points.append(point)
        values.append(score)
        weights.append(w)
        fallbacks.append(fallback)

    return BatchSelection(np.array(points), values, weights, fallbacks)


def qehvi_select(
    context: AcquisitionContext, q: int, seed: int, fantasy_seed: Optional[int] = None
) -> BatchSelection:
    """
    Greedy q-batch EHVI.

    After each pick the models are conditioned on one posterior sample at the
    chosen point and, when that fantasy is feasible, its objectives join the
    front used by the next pick.
    """
    if q < 1:
        raise InputError(f"batch size must be >= 1, got {q}")
    rng, fantasy_rng = _streams(seed, fantasy_seed)
    models = context.models
    points, values, fallbacks = [], [], []

    for _ in range(q):
        base = rng.standard_normal((context.mc_sample_count, 3))
        criterion = _ehvi_criterion(context, models, base)
        point, value = maximize_acquisition(
            criterion,
            context.dimension,
            context.restarts,
            int(rng.integers(2**63)),
            context.raw_samples,
        )
        point, fallback = _settle_point(point, value, context, models, rng)

        final_base = rng.standard_normal((context.final_mc_sample_count, 3))
        score = float(_ehvi_criterion(context, models, final_base)(point[None, :])[0])
        logger.info(f"qEHVI pick value={score:.6g} x={np.round(point, 4).tolist()}")

        models = _add_fantasy(context, models, point, fantasy_rng)
        points.append(point)
        values.append(score)
        fallbacks.append(fallback)

    return BatchSelection(np.array(points), values, [None] * q, fallbacks)
