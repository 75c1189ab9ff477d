import numpy as np
import pytest

from mobo.doe import latin_hypercube, lhs_maximin, maximin_score
from mobo.errors import InputError


def assert_stratified(points: np.ndarray) -> None:
    n = len(points)
    strata = np.floor(points * n).astype(int)
    for column in strata.T:
        assert sorted(column.tolist()) == list(range(n))


@pytest.mark.parametrize("n,d", [(40, 6), (250, 12)])
def test_one_point_per_stratum(n, d):
    design = lhs_maximin(n, d, seed=5)
    assert design.points.shape == (n, d)
    assert_stratified(design.points)


@pytest.mark.slow
def test_one_point_per_stratum_450_points():
    assert_stratified(lhs_maximin(450, 12, seed=5).points)


def test_points_sit_at_stratum_centers():
    design = lhs_maximin(10, 3, seed=1)
    offsets = design.points * 10 - 0.5
    assert np.allclose(offsets, np.round(offsets))


@pytest.mark.parametrize("seed", range(10))
def test_optimized_design_beats_unoptimized_baseline(seed):
    optimized = lhs_maximin(40, 6, seed)
    baseline = lhs_maximin(40, 6, seed, iterations=0)
    assert optimized.maximin_distance >= baseline.maximin_distance


def test_reported_score_matches_points():
    design = lhs_maximin(30, 4, seed=2)
    assert design.maximin_distance == pytest.approx(maximin_score(design.points), rel=1e-12)


def test_same_seed_same_design():
    a = lhs_maximin(25, 5, seed=11)
    b = lhs_maximin(25, 5, seed=11)
    assert np.array_equal(a.points, b.points)
    assert a.seed == 11


def test_invalid_sizes_raise():
    with pytest.raises(InputError):
        lhs_maximin(1, 3, seed=0)
    with pytest.raises(InputError):
        lhs_maximin(10, 0, seed=0)
    with pytest.raises(InputError):
        maximin_score(np.array([[0.5, 0.5]]))


def test_unoptimized_latin_hypercube_is_stratified(rng):
    assert_stratified(latin_hypercube(17, 4, rng))
