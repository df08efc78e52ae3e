import numpy as np
import pytest

from likelihood_embeddings.core.embeddings import (
    CauchyQuantileDecoder,
    DatasetEmbedding,
    GaussianAnalyticDecoder,
    MomentEncoder,
    QuantileEncoder,
    aggregate,
    cauchy_quantile_decoder,
    cauchy_quantile_encoder,
    gaussian_analytic_decoder,
    gaussian_moment_encoder,
    surrogate_log_likelihood,
)
from likelihood_embeddings.core.errors import DegenerateError, DomainError
from likelihood_embeddings.core.models import Dataset, log_likelihood, log_likelihood_grid
from likelihood_embeddings.utils.rng import make_rng


def test_moment_encoder_mean_aggregation():
    embedding = aggregate(MomentEncoder(2), Dataset([1.0, 2.0, 3.0]))
    np.testing.assert_allclose(embedding.s, [2.0, 14.0 / 3.0])
    assert embedding.n == 3
    assert embedding.m == 2


def test_moment_encoder_dimension_bounds():
    with pytest.raises(ValueError):
        MomentEncoder(0)
    with pytest.raises(ValueError):
        MomentEncoder(5)


def test_aggregation_ignores_row_order_and_repetition(gaussian_data):
    encoder = gaussian_moment_encoder(3)
    base = encoder.embed(gaussian_data)
    shuffled = encoder.embed(gaussian_data.permuted(make_rng(5)))
    repeated = encoder.embed(gaussian_data.repeat(3))
    np.testing.assert_allclose(shuffled.s, base.s, rtol=1e-12)
    np.testing.assert_allclose(repeated.s, base.s, rtol=1e-12)
    assert repeated.n == 3 * base.n


def test_aggregate_requires_per_sample_encoder():
    with pytest.raises(ValueError):
        aggregate(QuantileEncoder(2), Dataset([1.0, 2.0, 3.0]))


def test_quantile_encoder_linear_rule():
    embedding = QuantileEncoder(2, method="linear").embed(Dataset([0.0, 1.0, 2.0, 3.0]))
    np.testing.assert_allclose(embedding.s, [0.75, 2.25])


def test_quantile_encoder_full_resolution_recovers_sorted_sample():
    values = make_rng(3).standard_cauchy(25)
    embedding = cauchy_quantile_encoder(25).embed(Dataset(values))
    np.testing.assert_allclose(embedding.s, np.sort(values), rtol=0, atol=1e-9)


def test_quantile_encoder_needs_enough_rows():
    with pytest.raises(DegenerateError):
        QuantileEncoder(5).embed(Dataset([1.0, 2.0, 3.0]))


def test_gaussian_decoder_is_exact_with_two_moments(gaussian, gaussian_data, gaussian_grid):
    embedding = MomentEncoder(2).embed(gaussian_data)
    decoded = GaussianAnalyticDecoder().evaluate(gaussian_grid.array, embedding)
    true = log_likelihood_grid(gaussian, gaussian_data, gaussian_grid.array) / gaussian_data.n
    np.testing.assert_allclose(decoded, true, rtol=0, atol=1e-10)


def test_gaussian_decoder_single_moment_assumes_unit_variance(gaussian):
    # biased sample variance of (-1, 1) is exactly 1
    data = Dataset([-1.0, 1.0])
    embedding = MomentEncoder(1).embed(data)
    theta = (0.5, 1.3)
    assert gaussian_analytic_decoder(theta, embedding) == pytest.approx(
        log_likelihood(gaussian, data, theta) / 2, abs=1e-12
    )


def test_gaussian_decoder_rejects_bad_sigma():
    embedding = DatasetEmbedding(np.array([0.0, 1.0]), 10)
    with pytest.raises(DomainError):
        gaussian_analytic_decoder((0.0, 0.0), embedding)


def test_cauchy_decoder_full_resolution_is_exact(cauchy):
    data = Dataset(make_rng(8).standard_cauchy(40))
    embedding = QuantileEncoder(40).embed(data)
    for theta in (-2.0, 0.0, 1.5):
        assert cauchy_quantile_decoder((theta,), embedding) == pytest.approx(
            log_likelihood(cauchy, data, (theta,)) / 40, abs=1e-9
        )


def test_cauchy_decoder_is_vectorised(cauchy_grid, cauchy_data):
    embedding = QuantileEncoder(5).embed(cauchy_data)
    decoder = CauchyQuantileDecoder()
    batch = decoder.evaluate(cauchy_grid.array, embedding)
    singles = [decoder(theta, embedding) for theta in cauchy_grid.points]
    np.testing.assert_allclose(batch, singles, rtol=1e-14)


def test_surrogate_log_likelihood_scales_by_n(gaussian_data):
    embedding = MomentEncoder(2).embed(gaussian_data)
    theta = (0.0, 1.0)
    assert surrogate_log_likelihood(GaussianAnalyticDecoder(), theta, embedding) == pytest.approx(
        gaussian_data.n * gaussian_analytic_decoder(theta, embedding)
    )


def test_embedding_validation():
    with pytest.raises(DomainError):
        DatasetEmbedding(np.array([np.inf]), 3)
    with pytest.raises(DegenerateError):
        DatasetEmbedding(np.array([1.0]), 0)
