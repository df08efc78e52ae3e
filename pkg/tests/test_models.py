import math

import numpy as np
import pytest
from scipy import integrate, stats

from likelihood_embeddings.core.errors import DegenerateError, DomainError, ShapeError
from likelihood_embeddings.core.models import (
    CauchyFamily,
    Dataset,
    GaussianFamily,
    GaussianMixtureFamily,
    ParamVector,
    cauchy_log_density,
    gaussian_log_density,
    gaussian_mle,
    gmm_log_density,
    linreg_log_likelihood,
    log_likelihood,
    log_likelihood_grid,
    sample,
)
from likelihood_embeddings.utils.rng import make_rng


def test_gaussian_log_density_standard_normal_at_zero():
    assert gaussian_log_density(0.0, 0.0, 1.0) == pytest.approx(-0.9189385, abs=1e-7)


def test_gaussian_log_density_matches_formula():
    expected = -math.log(2.0) - 0.5 * math.log(2.0 * math.pi) - 1.0 / 8.0
    assert gaussian_log_density(1.0, 0.0, 2.0) == pytest.approx(expected, abs=1e-12)
    assert gaussian_log_density(1.0, 0.0, 2.0) == pytest.approx(-1.7370857, abs=1e-7)


@pytest.mark.parametrize("sigma", [0.0, -1.0, 1e-9])
def test_gaussian_log_density_rejects_bad_sigma(sigma):
    with pytest.raises(DomainError):
        gaussian_log_density(0.0, 0.0, sigma)


def test_cauchy_log_density_values():
    assert cauchy_log_density(0.0, 0.0) == pytest.approx(-1.1447299, abs=1e-7)
    assert cauchy_log_density(3.0, 0.0) == pytest.approx(-math.log(math.pi) - math.log(10.0), abs=1e-12)
    assert cauchy_log_density(3.0, 0.0) == pytest.approx(-3.4473150, abs=1e-7)


def test_gmm_single_component_is_gaussian():
    value = gmm_log_density(np.zeros(2), np.zeros((1, 2)), weights=[1.0])
    assert value == pytest.approx(-math.log(2.0 * math.pi), abs=1e-12)


def test_gmm_far_point_stays_finite():
    means = np.zeros((3, 10))
    value = gmm_log_density(np.full(10, 1000.0), means)
    assert math.isfinite(value)
    # every component is equally far, so the mixture equals one component
    expected = -5.0 * math.log(2.0 * math.pi) - 0.5 * 10 * 1000.0 ** 2
    assert value == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_gmm_log_sum_exp_matches_naive_density_sum(seed):
    rng = make_rng(seed)
    means = rng.uniform(-2.0, 2.0, size=(3, 10))
    weights = (0.4, 0.35, 0.25)
    for k in range(3):
        x = means[k] + rng.normal(size=10)
        naive = sum(w * stats.multivariate_normal.pdf(x, mean=mu, cov=np.eye(10)) for w, mu in zip(weights, means))
        assert naive > 0
        assert math.exp(gmm_log_density(x, means)) == pytest.approx(naive, rel=1e-12)


def test_gmm_rejects_mismatched_weights():
    with pytest.raises(ShapeError):
        gmm_log_density(np.zeros(2), np.zeros((3, 2)), weights=[0.5, 0.5])


def test_gmm_family_matches_pointwise_density():
    family = GaussianMixtureFamily(data_dim=3)
    rng = make_rng(1)
    theta = rng.uniform(-2, 2, family.param_dim)
    rows = rng.normal(size=(7, 3))
    grid_values = family.log_density(rows, theta[None, :])[0]
    means = family.means(theta)
    for i in range(7):
        assert grid_values[i] == pytest.approx(gmm_log_density(rows[i], means), rel=1e-12)


def test_log_likelihood_is_additive(gaussian):
    a = sample(gaussian, (0.0, 1.0), 30, seed=1)
    b = sample(gaussian, (0.0, 1.0), 20, seed=2)
    theta = (0.4, 0.9)
    combined = log_likelihood(gaussian, a.concat(b), theta)
    assert combined == pytest.approx(log_likelihood(gaussian, a, theta) + log_likelihood(gaussian, b, theta), rel=1e-12)


def test_log_likelihood_is_permutation_invariant(cauchy):
    data = sample(cauchy, (0.2,), 50, seed=3)
    shuffled = data.permuted(make_rng(4))
    assert log_likelihood(cauchy, shuffled, (1.0,)) == pytest.approx(log_likelihood(cauchy, data, (1.0,)), rel=1e-12)


def test_log_likelihood_grid_does_not_depend_on_chunking(gaussian, gaussian_data, gaussian_grid):
    whole = log_likelihood_grid(gaussian, gaussian_data, gaussian_grid.array, chunk_size=1000)
    chunked = log_likelihood_grid(gaussian, gaussian_data, gaussian_grid.array, chunk_size=7)
    np.testing.assert_array_equal(whole, chunked)


def test_log_likelihood_grid_rejects_wrong_data_dimension(gaussian):
    data = Dataset(np.zeros((5, 2)))
    with pytest.raises(ShapeError):
        log_likelihood_grid(gaussian, data, [(0.0, 1.0)])


def test_sample_is_reproducible(gaussian):
    a = sample(gaussian, (0.1, 1.2), 40, seed=9)
    b = sample(gaussian, (0.1, 1.2), 40, seed=9)
    c = sample(gaussian, (0.1, 1.2), 40, seed=10)
    np.testing.assert_array_equal(a.rows, b.rows)
    assert not np.array_equal(a.rows, c.rows)
    assert a.seed == 9


def test_sample_shapes():
    gmm = GaussianMixtureFamily(data_dim=4)
    data = sample(gmm, np.zeros(gmm.param_dim), 25, seed=0)
    assert (data.n, data.d) == (25, 4)
    assert sample(CauchyFamily(), (0.0,), 5, seed=0).rows.shape == (5, 1)


def test_gaussian_mle_closed_form():
    data = Dataset([1.0, 2.0, 3.0, 6.0])
    mle = gaussian_mle(data)
    assert mle[0] == pytest.approx(3.0)
    assert mle[1] == pytest.approx(math.sqrt((4 + 1 + 0 + 9) / 4.0))


def test_gaussian_mle_degenerate_inputs():
    with pytest.raises(DegenerateError):
        gaussian_mle(Dataset([1.0]))
    with pytest.raises(DegenerateError):
        gaussian_mle(Dataset([2.0, 2.0, 2.0]))


def test_linreg_log_likelihood_hand_value():
    X = np.ones((2, 1))
    assert linreg_log_likelihood(X, np.zeros(2), [0.0], 1.0) == pytest.approx(-math.log(2.0 * math.pi), abs=1e-12)
    with pytest.raises(DomainError):
        linreg_log_likelihood(X, np.zeros(2), [0.0], 0.0)


def test_dataset_validation():
    assert Dataset([1.0, 2.0]).rows.shape == (2, 1)
    with pytest.raises(DomainError):
        Dataset([1.0, float("nan")])
    with pytest.raises(DegenerateError):
        Dataset(np.zeros((0, 1)))
    with pytest.raises(ValueError):
        Dataset([1.0]).repeat(0)


def test_dataset_rows_are_read_only():
    data = Dataset([1.0, 2.0])
    with pytest.raises(ValueError):
        data.rows[0, 0] = 5.0


def test_family_domain_membership():
    family = GaussianFamily()
    assert family.contains((0.0, 1.0))
    assert not family.contains((0.0, 0.1))
    assert not family.contains((0.0,))
    assert ParamVector.of(1.0, 2.0).dim == 2


def test_log_likelihood_two_point_hand_value(gaussian):
    assert log_likelihood(gaussian, Dataset([0.0, 2.0]), (1.0, 1.0)) == pytest.approx(2 * -1.4189385, abs=1e-7)


def test_gaussian_mle_dominates_grid(gaussian):
    mu, sigma = np.meshgrid(np.linspace(-2, 2, 50), np.linspace(0.6, 1.6, 50), indexing="ij")
    grid = np.column_stack([mu.ravel(), sigma.ravel()])
    for seed in range(20):
        data = sample(gaussian, (0.2, 1.0), 30, seed=seed)
        best = log_likelihood(gaussian, data, gaussian_mle(data))
        assert best >= log_likelihood_grid(gaussian, data, grid).max() - 1e-10


@pytest.mark.parametrize("family", [GaussianFamily(), CauchyFamily()])
def test_density_normalises(family):
    xs = np.linspace(-2000.0, 2000.0, 400001)
    theta = (0.5, 1.2) if family.param_dim == 2 else (0.5,)
    density = np.exp(family.log_density(xs[:, None], np.array([theta]))[0])
    assert 0.999 <= integrate.trapezoid(density, xs) <= 1.001
