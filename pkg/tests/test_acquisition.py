import numpy as np
import pytest
from scipy.spatial.distance import cdist
from scipy.stats import norm

from mobo.acquisition import (
    AcquisitionContext,
    ScalarizationWeights,
    constrained_ei,
    ehvi_from_samples,
    ehvi_mc,
    ei_from_moments,
    expected_improvement,
    feasibility_from_moments,
    feasibility_probability,
    improvement,
    maximize_acquisition,
    parego_scalarize,
    qehvi_select,
    qparego_select,
)
from mobo.doe import lhs_maximin
from mobo.errors import InputError
from mobo.gp import KernelSpec, ModelSet, fit_model_set, model_from_kernel, predict, predict_many
from mobo.pareto import (
    ParetoArchive,
    hypervolume_improvement,
    hypervolume_improvement_batch,
    reference_point_from,
)
from mobo.problems import BNH


@pytest.fixture(scope="module")
def bnh_context_factory():
    problem = BNH()
    design = lhs_maximin(10, 2, seed=4, iterations=500)
    evaluations = [problem.evaluate(p) for p in design.points]
    x = np.array([e.point for e in evaluations])
    objectives = np.array([e.objectives for e in evaluations])
    constraints = np.array([e.g for e in evaluations])
    models = fit_model_set(x, objectives, constraints, restarts=2, max_evaluations=80)
    reference = reference_point_from(objectives, constraints <= 0)
    archive = ParetoArchive(reference)
    for e in evaluations:
        archive.add(e.point, e.objectives, e.g)

    def build() -> AcquisitionContext:
        return AcquisitionContext.from_observations(
            models,
            objectives,
            constraints,
            reference,
            archive.objectives(),
            mc_sample_count=64,
            final_mc_sample_count=256,
            restarts=2,
            raw_samples=16,
        )

    return build


def test_improvement_is_positive_part():
    assert improvement(1.0, 0.4) == pytest.approx(0.6)
    assert improvement(1.0, 1.5) == 0.0


def test_analytic_ei_matches_monte_carlo():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        mean = rng.normal()
        variance = rng.uniform(0.01, 4.0)
        best = rng.normal()
        # One uniform per stratum; the plain standard error over-covers this estimate
        strata = (np.arange(10**6) + rng.random(10**6)) / 10**6
        draws = mean + np.sqrt(variance) * norm.ppf(strata)
        gains = np.maximum(best - draws, 0.0)
        error = gains.std() / np.sqrt(len(draws))
        assert abs(float(ei_from_moments(mean, variance, best)) - gains.mean()) <= 3 * error + 1e-12


def test_ei_with_zero_variance_is_plain_improvement():
    assert float(ei_from_moments(1.0, 0.0, 2.0)) == pytest.approx(1.0)
    assert float(ei_from_moments(3.0, 0.0, 2.0)) == 0.0
    values = ei_from_moments(np.array([1.0, 0.0]), np.array([0.0, 1.0]), 2.0)
    assert values.shape == (2,) and np.all(values > 0)


def test_parego_scalarization_value():
    weights = ScalarizationWeights(0.5)
    assert parego_scalarize(0.2, 0.4, weights) == pytest.approx(0.05 * 0.3 + 0.2)


def test_parego_scalarization_is_monotone():
    rng = np.random.default_rng(0)
    for _ in range(200):
        weights = ScalarizationWeights(rng.uniform())
        f1, f2 = rng.random(2)
        d1, d2 = rng.random(2) * 0.1
        assert parego_scalarize(f1 + d1, f2, weights) >= parego_scalarize(f1, f2, weights)
        assert parego_scalarize(f1, f2 + d2, weights) >= parego_scalarize(f1, f2, weights)


def test_scalarization_weights_are_validated():
    with pytest.raises(InputError):
        ScalarizationWeights(1.5)
    with pytest.raises(InputError):
        ScalarizationWeights(0.5, alpha=0.0)


def test_feasibility_probability_from_moments():
    assert float(feasibility_from_moments(0.0, 1.0)) == pytest.approx(0.5)
    assert float(feasibility_from_moments(-1.0, 0.0)) == 1.0
    assert float(feasibility_from_moments(1.0, 0.0)) == 0.0


def test_constrained_ei_is_product(bnh_context_factory):
    models = bnh_context_factory().models
    x = [0.3, 0.4]
    best = 20.0
    expected = expected_improvement(models.f1, best, x) * feasibility_probability(models.g, x)
    assert constrained_ei(models.f1, models.g, best, x) == pytest.approx(expected)


def test_ehvi_with_degenerate_samples_equals_hvi():
    front = np.array([[1.0, 2.0], [2.0, 1.0]])
    ref = np.array([3.0, 3.0])
    f1 = np.full((1, 8), 0.5)
    f2 = np.full((1, 8), 0.5)
    g = np.full((1, 8), -1.0)
    value = ehvi_from_samples(f1, f2, g, front, ref, temperature=1e-9)
    assert value[0] == pytest.approx(hypervolume_improvement(front, ref, [0.5, 0.5]))


def test_sigmoid_weighting_suppresses_infeasible_samples():
    front = np.array([[1.0, 2.0]])
    ref = np.array([3.0, 3.0])
    f = np.full((1, 4), 0.5)
    value = ehvi_from_samples(f, f, np.full((1, 4), 5.0), front, ref, temperature=1e-3)
    assert value[0] == pytest.approx(0.0, abs=1e-12)


def test_ehvi_mc_is_deterministic_and_non_negative(bnh_context_factory):
    context = bnh_context_factory()
    first = ehvi_mc(context, [0.2, 0.3], seed=1)
    assert first >= 0.0
    assert first == ehvi_mc(context, [0.2, 0.3], seed=1)


def test_maximize_acquisition_finds_interior_optimum():
    def criterion(points):
        return -np.sum((points - 0.3) ** 2, axis=1)

    point, value = maximize_acquisition(criterion, 3, restarts=4, seed=0)
    np.testing.assert_allclose(point, [0.3, 0.3, 0.3], atol=1e-3)
    assert value == pytest.approx(0.0, abs=1e-5)


def test_maximize_acquisition_on_flat_criterion_returns_zero():
    point, value = maximize_acquisition(lambda p: np.zeros(len(p)), 2, restarts=3, seed=1)
    assert value == 0.0
    assert point.shape == (2,)


def test_qehvi_batch_has_distinct_new_points(bnh_context_factory):
    context = bnh_context_factory()
    selection = qehvi_select(context, q=4, seed=7)
    points = selection.points
    assert points.shape == (4, 2)
    assert np.all((points >= 0.0) & (points <= 1.0))
    pairwise = cdist(points, points) + np.eye(4)
    assert pairwise.min() > 1e-9
    assert cdist(points, context.models.training_inputs).min() > 1e-9
    assert len(context.fantasies) == 4


def test_qehvi_is_reproducible(bnh_context_factory):
    first = qehvi_select(bnh_context_factory(), q=2, seed=3)
    second = qehvi_select(bnh_context_factory(), q=2, seed=3)
    np.testing.assert_array_equal(first.points, second.points)
    assert first.values == second.values


def test_qparego_draws_one_weight_per_point(bnh_context_factory):
    selection = qparego_select(bnh_context_factory(), q=3, seed=11)
    assert selection.points.shape == (3, 2)
    assert len(selection.weights) == 3
    assert all(0.0 <= w <= 1.0 for w in selection.weights)
    assert all(v >= 0.0 for v in selection.values)


def test_single_point_batch_and_invalid_batch_size(bnh_context_factory):
    assert qparego_select(bnh_context_factory(), q=1, seed=0).points.shape == (1, 2)
    with pytest.raises(InputError):
        qehvi_select(bnh_context_factory(), q=0, seed=0)


def toy_models(g_targets):
    """1-D models with opposed objectives, observed at 0.1, 0.5 and 0.9."""
    x = np.array([[0.1], [0.5], [0.9]])
    kernel = KernelSpec("matern52", (0.3,), 1.0, 1e-6)
    return ModelSet(
        f1=model_from_kernel(kernel, x, [0.2, 0.5, 0.9]),
        f2=model_from_kernel(kernel, x, [0.9, 0.5, 0.2]),
        g=model_from_kernel(kernel, x, g_targets),
    )


def expected_shortfall(level, mean, std):
    """E[(level - Y)+] for Y ~ N(mean, std^2)."""
    if np.isneginf(level):
        return 0.0
    z = (level - mean) / std
    return (level - mean) * norm.cdf(z) + std * norm.pdf(z)


def exact_ehvi(front, ref, mean, std):
    """EHVI of independent Gaussian objectives, integrated strip by strip."""
    front = front[np.argsort(front[:, 0])]
    lows = np.concatenate([[-np.inf], front[:, 0]])
    highs = np.concatenate([front[:, 0], [ref[0]]])
    caps = np.concatenate([[ref[1]], front[:, 1]])
    total = 0.0
    for low, high, cap in zip(lows, highs, caps):
        width = expected_shortfall(high, mean[0], std[0]) - expected_shortfall(low, mean[0], std[0])
        total += width * expected_shortfall(cap, mean[1], std[1])
    return total


@pytest.mark.parametrize("x", [0.3, 0.7])
def test_ehvi_mc_matches_exact_integration(x):
    models = toy_models([-50.0, -50.0, -50.0])
    front = np.array([[0.2, 0.9], [0.5, 0.5], [0.9, 0.2]])
    ref = np.array([1.2, 1.2])
    context = AcquisitionContext(
        models=models,
        observed_objectives=front,
        observed_constraints=np.full(3, -50.0),
        reference_point=ref,
        front=front,
        mc_sample_count=2**14,
        sigmoid_temperature=1e-3,
    )
    estimate = ehvi_mc(context, [x], seed=5)

    means, variances = models.predict_many(np.array([[x]]))
    stds = np.sqrt(variances[0])
    base = np.random.default_rng(5).standard_normal((2**14, 3))
    samples = means[0, :2] + stds[:2] * base[:, :2]
    gains = hypervolume_improvement_batch(front, ref, samples)
    assert estimate == pytest.approx(gains.mean(), rel=1e-9)

    error = gains.std() / np.sqrt(len(gains))
    assert abs(estimate - exact_ehvi(front, ref, means[0, :2], stds[:2])) <= 3 * error


def test_constrained_ei_matches_joint_monte_carlo():
    models = toy_models([-1.0, 0.2, 1.0])
    x, best = [0.3], 0.4
    f_mean, f_variance = predict(models.f1, x)
    g_mean, g_variance = predict(models.g, x)
    rng = np.random.default_rng(8)
    f = f_mean + np.sqrt(f_variance) * rng.standard_normal(10**6)
    g = g_mean + np.sqrt(g_variance) * rng.standard_normal(10**6)
    values = np.maximum(best - f, 0.0) * (g <= 0.0)
    error = values.std() / np.sqrt(len(values))
    assert 0.0 < values.mean()
    assert abs(constrained_ei(models.f1, models.g, best, x) - values.mean()) <= 3 * error


def test_maximize_acquisition_matches_grid_scan_on_expected_improvement():
    kernel = KernelSpec("matern52", (0.2,), 1.0, 1e-6)
    model = model_from_kernel(kernel, np.array([[0.2], [0.7]]), [1.0, 0.5])

    def criterion(points):
        return ei_from_moments(*predict_many(model, points), 0.5)

    grid = np.linspace(0.0, 1.0, 10**5)[:, None]
    point, value = maximize_acquisition(criterion, 1, restarts=8, seed=0, raw_samples=64)
    assert value == pytest.approx(criterion(grid).max(), abs=1e-4)
    assert criterion(point[None, :])[0] == pytest.approx(value, rel=1e-9)
