"""
Gaussian-process regression: kernels, hyperparameter fitting, posterior
prediction and conditioning on virtual observations.

Targets are standardized to zero mean and unit variance before fitting; the
kernel hyperparameters live in that standardized space and predictions are
returned in the original target units.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from functools import cached_property
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg
from scipy.optimize import minimize
from scipy.spatial.distance import cdist

from .doe import latin_hypercube
from .errors import InputError, NumericalError

logger = logging.getLogger(__name__)

DEFAULT_NOISE_VARIANCE = 1e-6
FIT_RESTARTS = 8
LENGTHSCALE_START_RANGE = (0.05, 5.0)
SIGNAL_VARIANCE_START_RANGE = (0.1, 10.0)
LENGTHSCALE_BOUNDS = (1e-3, 1e3)
SIGNAL_VARIANCE_BOUNDS = (1e-2, 1e2)
JITTER_SCHEDULE: Tuple[float, ...] = tuple(float(j) for j in np.logspace(-10, -4, 7))

_SQRT5 = np.sqrt(5.0)


@dataclass(frozen=True)
class FitOptions:
    """Hyperparameter search box, start ranges and the Cholesky jitter schedule."""

    lengthscale_start_range: Tuple[float, float] = LENGTHSCALE_START_RANGE
    signal_variance_start_range: Tuple[float, float] = SIGNAL_VARIANCE_START_RANGE
    lengthscale_bounds: Tuple[float, float] = LENGTHSCALE_BOUNDS
    signal_variance_bounds: Tuple[float, float] = SIGNAL_VARIANCE_BOUNDS
    jitter_schedule: Tuple[float, ...] = JITTER_SCHEDULE

    def __post_init__(self) -> None:
        for name in (
            "lengthscale_start_range",
            "signal_variance_start_range",
            "lengthscale_bounds",
            "signal_variance_bounds",
        ):
            low, high = getattr(self, name)
            if not 0 < low < high:
                raise InputError(f"{name} must satisfy 0 < low < high, got {(low, high)}")
        schedule = tuple(float(j) for j in self.jitter_schedule)
        if not schedule or schedule[0] <= 0 or any(b <= a for a, b in zip(schedule, schedule[1:])):
            raise InputError(f"jitter_schedule must be positive and increasing, got {schedule}")
        object.__setattr__(self, "jitter_schedule", schedule)


class KernelFamily(str, Enum):
    MATERN52 = "matern52"
    EXPONENTIAL = "exponential"
    SQUARED_EXPONENTIAL = "squared_exponential"


@dataclass(frozen=True)
class KernelSpec:
    """Stationary ARD kernel with a nugget."""

    family: KernelFamily
    lengthscales: Tuple[float, ...]
    signal_variance: float = 1.0
    noise_variance: float = DEFAULT_NOISE_VARIANCE

    def __post_init__(self) -> None:
        object.__setattr__(self, "family", KernelFamily(self.family))
        scales = tuple(float(v) for v in np.atleast_1d(np.asarray(self.lengthscales, dtype=float)))
        object.__setattr__(self, "lengthscales", scales)
        if not scales or not all(np.isfinite(v) and v > 0 for v in scales):
            raise InputError(f"lengthscales must be positive, got {scales}")
        if not (np.isfinite(self.signal_variance) and self.signal_variance > 0):
            raise InputError(f"signal_variance must be positive, got {self.signal_variance}")
        if not (np.isfinite(self.noise_variance) and self.noise_variance >= 0):
            raise InputError(f"noise_variance must be non-negative, got {self.noise_variance}")

    @property
    def dimension(self) -> int:
        return len(self.lengthscales)


def _correlation(family: KernelFamily, r: np.ndarray) -> np.ndarray:
    if family is KernelFamily.MATERN52:
        s = _SQRT5 * r
        return (1.0 + s + s * s / 3.0) * np.exp(-s)
    if family is KernelFamily.EXPONENTIAL:
        return np.exp(-r)
    return np.exp(-0.5 * r * r)


def kernel_matrix(spec: KernelSpec, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Covariance matrix between the rows of `x` and the rows of `y`."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if x.shape[1] != spec.dimension or y.shape[1] != spec.dimension:
        raise InputError(
            f"kernel of dimension {spec.dimension} got inputs of dimension "
            f"{x.shape[1]} and {y.shape[1]}"
        )
    scales = np.asarray(spec.lengthscales)
    r = cdist(x / scales, y / scales)
    return spec.signal_variance * _correlation(spec.family, r)


def kernel_eval(spec: KernelSpec, x: Sequence[float], y: Sequence[float]) -> float:
    """Covariance between two single points."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != (spec.dimension,) or y.shape != (spec.dimension,):
        raise InputError(
            f"kernel of dimension {spec.dimension} got points of shape {x.shape} and {y.shape}"
        )
    return float(kernel_matrix(spec, x[None, :], y[None, :])[0, 0])


def _factorize(
    matrix: np.ndarray,
    minimum_jitter: float = 0.0,
    warn: bool = True,
    jitter_schedule: Sequence[float] = JITTER_SCHEDULE,
) -> Tuple[np.ndarray, float]:
    """
    Lower Cholesky factor of `matrix`, escalating diagonal jitter on failure.

    Returns:
        (factor, jitter added to the diagonal)
    """
    n = matrix.shape[0]
    schedule = [0.0] if minimum_jitter <= 0 else []
    schedule += [j for j in jitter_schedule if j >= minimum_jitter]
    for jitter in schedule:
        try:
            factor = linalg.cholesky(matrix + jitter * np.eye(n), lower=True)
        except linalg.LinAlgError:
            continue
        if jitter > 0 and warn:
            logger.warning(f"Covariance factorized with jitter {jitter:.0e}")
        return factor, float(jitter)
    raise NumericalError(
        f"Covariance factorization failed after jitter escalation to {jitter_schedule[-1]:.0e}"
    )


@dataclass(frozen=True, eq=False)
class GaussianProcessModel:
    """A fitted GP: immutable once built, safe to read from several threads."""

    kernel: KernelSpec
    training_inputs: np.ndarray
    training_targets: np.ndarray
    target_mean: float
    target_scale: float
    covariance_factor: np.ndarray
    jitter: float = 0.0
    jitter_schedule: Tuple[float, ...] = JITTER_SCHEDULE

    @property
    def size(self) -> int:
        return int(self.training_inputs.shape[0])

    @property
    def dimension(self) -> int:
        return int(self.training_inputs.shape[1])

    @cached_property
    def alpha(self) -> np.ndarray:
        """(K + noise I)^-1 y in standardized units."""
        return linalg.cho_solve((self.covariance_factor, True), self.training_targets)

    def predict_many(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return predict_many(self, points)


def _check_point(model: GaussianProcessModel, x: Sequence[float]) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.shape != (model.dimension,):
        raise InputError(f"model of dimension {model.dimension} got a point of shape {x.shape}")
    return x


def _noise_diagonal(kernel: KernelSpec, jitter: float) -> float:
    return kernel.noise_variance + jitter


def _build_model(
    kernel: KernelSpec,
    inputs: np.ndarray,
    standardized: np.ndarray,
    mean: float,
    scale: float,
    jitter_schedule: Tuple[float, ...] = JITTER_SCHEDULE,
) -> GaussianProcessModel:
    gram = kernel_matrix(kernel, inputs, inputs)
    factor, jitter = _factorize(
        gram + kernel.noise_variance * np.eye(len(inputs)), jitter_schedule=jitter_schedule
    )
    return GaussianProcessModel(
        kernel=kernel,
        training_inputs=inputs,
        training_targets=standardized,
        target_mean=mean,
        target_scale=scale,
        covariance_factor=factor,
        jitter=jitter,
        jitter_schedule=tuple(jitter_schedule),
    )


def _standardize(targets: np.ndarray) -> Tuple[np.ndarray, float, float]:
    mean = float(targets.mean())
    scale = float(targets.std())
    if scale <= 1e-12 * max(1.0, abs(mean)):
        scale = 1.0
    return (targets - mean) / scale, mean, scale


def log_marginal_likelihood(
    kernel: KernelSpec,
    inputs: np.ndarray,
    targets: np.ndarray,
    jitter_schedule: Sequence[float] = JITTER_SCHEDULE,
) -> float:
    """Log marginal likelihood of (already standardized) targets under `kernel`."""
    n = len(targets)
    gram = kernel_matrix(kernel, inputs, inputs) + kernel.noise_variance * np.eye(n)
    factor, _ = _factorize(gram, warn=False, jitter_schedule=jitter_schedule)
    alpha = linalg.cho_solve((factor, True), targets)
    return float(
        -0.5 * targets @ alpha - np.log(np.diag(factor)).sum() - 0.5 * n * np.log(2.0 * np.pi)
    )


def fit(
    inputs: np.ndarray,
    targets: Sequence[float],
    kernel_family: Union[KernelFamily, str],
    noise_variance: float = DEFAULT_NOISE_VARIANCE,
    restarts: int = FIT_RESTARTS,
    seed: int = 0,
    max_evaluations: Optional[int] = None,
    options: Optional[FitOptions] = None,
) -> GaussianProcessModel:
    """
    Fit a GP by maximizing the log marginal likelihood.

    The search runs over log-lengthscales and log-signal-variance with
    Nelder-Mead from `restarts` starting points: one at unit lengthscales, the
    others spread by a Latin Hypercube over the start ranges. The nugget is
    held at `noise_variance`.

    Args:
        inputs: (n, d) training inputs, n >= 2
        targets: n training targets
        kernel_family: Kernel closed form
        noise_variance: Fixed nugget in standardized units
        restarts: Number of local searches
        seed: Seed of the start design
        max_evaluations: Likelihood evaluations per local search
        options: Search box, start ranges and jitter schedule

    Returns:
        The fitted model
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    targets = np.asarray(targets, dtype=float).ravel()
    if inputs.shape[0] < 2:
        raise InputError(f"fit needs at least 2 training points, got {inputs.shape[0]}")
    if inputs.shape[0] != targets.shape[0]:
        raise InputError(f"{inputs.shape[0]} inputs but {targets.shape[0]} targets")
    if not (np.all(np.isfinite(inputs)) and np.all(np.isfinite(targets))):
        raise InputError("training data must be finite")

    family = KernelFamily(kernel_family)
    options = options or FitOptions()
    schedule = options.jitter_schedule
    d = inputs.shape[1]
    standardized, mean, scale = _standardize(targets)

    def negative_lml(theta: np.ndarray) -> float:
        kernel = KernelSpec(family, tuple(np.exp(theta[:d])), float(np.exp(theta[d])), noise_variance)
        try:
            return -log_marginal_likelihood(kernel, inputs, standardized, schedule)
        except NumericalError:
            return 1e25

    starts = [np.zeros(d + 1)]
    if restarts > 1:
        unit = latin_hypercube(restarts - 1, d + 1, np.random.default_rng(seed))
        scale_range = options.lengthscale_start_range
        variance_range = options.signal_variance_start_range
        low = np.log([scale_range[0]] * d + [variance_range[0]])
        high = np.log([scale_range[1]] * d + [variance_range[1]])
        starts.extend(low + unit * (high - low))

    bounds = [tuple(np.log(options.lengthscale_bounds))] * d + [
        tuple(np.log(options.signal_variance_bounds))
    ]
    solver_options = {"maxfev": max_evaluations or 200 * (d + 1), "xatol": 1e-4, "fatol": 1e-8}

    best_theta, best_value = starts[0], np.inf
    for start in starts:
        result = minimize(
            negative_lml, start, method="Nelder-Mead", bounds=bounds, options=solver_options
        )
        if result.fun < best_value:
            best_theta, best_value = result.x, float(result.fun)

    kernel = KernelSpec(
        family, tuple(np.exp(best_theta[:d])), float(np.exp(best_theta[d])), noise_variance
    )
    logger.debug(
        f"Fitted {family.value} GP on {len(targets)} points: "
        f"lengthscales={np.round(kernel.lengthscales, 4).tolist()}, "
        f"signal_variance={kernel.signal_variance:.4g}, -lml={best_value:.4f}"
    )
    return _build_model(kernel, inputs, standardized, mean, scale, schedule)


def model_from_kernel(
    kernel: KernelSpec, inputs: np.ndarray, targets: Sequence[float]
) -> GaussianProcessModel:
    """Condition a GP with given hyperparameters on data, without fitting."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    targets = np.asarray(targets, dtype=float).ravel()
    if inputs.shape[0] != targets.shape[0] or inputs.shape[0] < 1:
        raise InputError("model_from_kernel needs matching, non-empty inputs and targets")
    standardized, mean, scale = _standardize(targets)
    return _build_model(kernel, inputs, standardized, mean, scale)


def predict_many(model: GaussianProcessModel, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Posterior means and variances (original units) at the rows of `points`."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != model.dimension:
        raise InputError(
            f"model of dimension {model.dimension} got points of dimension {points.shape[1]}"
        )
    cross = kernel_matrix(model.kernel, points, model.training_inputs)
    mean_std = cross @ model.alpha
    v = linalg.solve_triangular(model.covariance_factor, cross.T, lower=True)
    variance_std = np.maximum(model.kernel.signal_variance - np.einsum("ij,ij->j", v, v), 0.0)
    return (
        model.target_mean + model.target_scale * mean_std,
        model.target_scale**2 * variance_std,
    )


def predict(model: GaussianProcessModel, x: Sequence[float]) -> Tuple[float, float]:
    """Posterior mean and variance at one point."""
    x = _check_point(model, x)
    means, variances = predict_many(model, x[None, :])
    return float(means[0]), float(variances[0])


def confidence_interval(
    model: GaussianProcessModel, x: Sequence[float], z: float = 1.96
) -> Tuple[float, float]:
    """mean -/+ z standard deviations at `x`."""
    mean, variance = predict(model, x)
    half = z * np.sqrt(variance)
    return mean - half, mean + half


def condition_on_virtual(
    model: GaussianProcessModel, x_new: Sequence[float], y_virtual: float
) -> GaussianProcessModel:
    """
    Add one (virtual) observation without refitting hyperparameters.

    The Cholesky factor grows by one row. When the new point duplicates a
    training input and the Schur complement vanishes, the whole covariance is
    refactorized with escalated jitter instead.
    """
    x_new = _check_point(model, x_new)
    kernel = model.kernel
    noise = _noise_diagonal(kernel, model.jitter)
    y_std = (float(y_virtual) - model.target_mean) / model.target_scale

    inputs = np.vstack([model.training_inputs, x_new[None, :]])
    targets = np.append(model.training_targets, y_std)

    cross = kernel_matrix(kernel, model.training_inputs, x_new[None, :])[:, 0]
    row = linalg.solve_triangular(model.covariance_factor, cross, lower=True)
    schur = kernel.signal_variance + noise - row @ row

    if schur > 1e-12 * (kernel.signal_variance + noise):
        n = model.size
        factor = np.zeros((n + 1, n + 1))
        factor[:n, :n] = model.covariance_factor
        factor[n, :n] = row
        factor[n, n] = np.sqrt(schur)
        jitter = model.jitter
    else:
        gram = kernel_matrix(kernel, inputs, inputs) + kernel.noise_variance * np.eye(len(inputs))
        factor, jitter = _factorize(
            gram,
            minimum_jitter=max(model.jitter, model.jitter_schedule[0]),
            jitter_schedule=model.jitter_schedule,
        )

    return replace(
        model,
        training_inputs=inputs,
        training_targets=targets,
        covariance_factor=factor,
        jitter=jitter,
    )


def sample_posterior(model: GaussianProcessModel, x: Sequence[float], seed: int) -> float:
    """One draw from the posterior marginal at `x`."""
    mean, variance = predict(model, x)
    if variance <= 0.0:
        return mean
    rng = np.random.default_rng(seed)
    return float(mean + np.sqrt(variance) * rng.standard_normal())


def leave_one_out(model: GaussianProcessModel) -> Tuple[np.ndarray, np.ndarray]:
    """
    Closed-form leave-one-out predictions at the training inputs.

    Returns:
        (means, variances) in original units
    """
    n = model.size
    inverse = linalg.cho_solve((model.covariance_factor, True), np.eye(n))
    diagonal = np.diag(inverse)
    means_std = model.training_targets - model.alpha / diagonal
    return (
        model.target_mean + model.target_scale * means_std,
        model.target_scale**2 / diagonal,
    )


def training_targets_original(model: GaussianProcessModel) -> np.ndarray:
    return model.target_mean + model.target_scale * model.training_targets


@dataclass(frozen=True, eq=False)
class ModelSet:
    """Independent GPs for the two objectives and the constraint."""

    f1: GaussianProcessModel
    f2: GaussianProcessModel
    g: GaussianProcessModel

    @property
    def models(self) -> Tuple[GaussianProcessModel, GaussianProcessModel, GaussianProcessModel]:
        return self.f1, self.f2, self.g

    @property
    def dimension(self) -> int:
        return self.f1.dimension

    @property
    def training_inputs(self) -> np.ndarray:
        return self.f1.training_inputs

    def predict_many(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Means and variances as (m, 3) arrays ordered f1, f2, g."""
        results = [predict_many(model, points) for model in self.models]
        means = np.column_stack([r[0] for r in results])
        variances = np.column_stack([r[1] for r in results])
        return means, variances

    def predict_means(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Surrogate evaluation: (m, 2) objective means and (m,) constraint means."""
        means, _ = self.predict_many(points)
        return means[:, :2], means[:, 2]

    def condition_on_virtual(self, x_new: Sequence[float], values: Sequence[float]) -> "ModelSet":
        f1, f2, g = (condition_on_virtual(m, x_new, v) for m, v in zip(self.models, values))
        return ModelSet(f1=f1, f2=f2, g=g)

    def sample_posterior(self, x: Sequence[float], seeds: Sequence[int]) -> Tuple[float, float, float]:
        f1, f2, g = (sample_posterior(m, x, s) for m, s in zip(self.models, seeds))
        return f1, f2, g


def fit_model_set(
    inputs: np.ndarray,
    objectives: np.ndarray,
    constraints: np.ndarray,
    kernel_families: Sequence[Union[KernelFamily, str]] = ("matern52", "exponential", "matern52"),
    noise_variance: float = DEFAULT_NOISE_VARIANCE,
    restarts: int = FIT_RESTARTS,
    seed: int = 0,
    max_evaluations: Optional[int] = None,
    workers: int = 3,
    options: Optional[FitOptions] = None,
) -> ModelSet:
    """Fit the f1, f2 and g models, concurrently when `workers` > 1."""
    objectives = np.asarray(objectives, dtype=float)
    columns = [objectives[:, 0], objectives[:, 1], np.asarray(constraints, dtype=float)]
    if len(kernel_families) != 3:
        raise InputError(f"expected 3 kernel families (f1, f2, g), got {len(kernel_families)}")

    def fit_one(index: int) -> GaussianProcessModel:
        return fit(
            inputs,
            columns[index],
            kernel_families[index],
            noise_variance=noise_variance,
            restarts=restarts,
            seed=seed,
            max_evaluations=max_evaluations,
            options=options,
        )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=min(workers, 3)) as executor:
            f1, f2, g = executor.map(fit_one, range(3))
    else:
        f1, f2, g = (fit_one(i) for i in range(3))
    return ModelSet(f1=f1, f2=f2, g=g)
