"""Encoders, mean aggregation and analytic decoders"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DegenerateError, DomainError, ShapeError
from .models import LOG_2PI, Dataset, ThetaLike, as_param_vector, cauchy_log_density, check_sigma


class EncoderMode(str, Enum):
    PER_SAMPLE = "per_sample"
    DATASET_STATISTIC = "dataset_statistic"


@dataclass(frozen=True, eq=False)
class DatasetEmbedding:
    """The compressed substitute for a dataset: m numbers plus the sample count"""

    s: np.ndarray
    n: int

    def __post_init__(self):
        s = np.array(self.s, dtype=float).ravel()
        if not np.all(np.isfinite(s)):
            raise DomainError("embedding entries must be finite")
        if self.n < 1:
            raise DegenerateError(f"embedding sample count must be at least 1, got {self.n}")
        s.setflags(write=False)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "n", int(self.n))

    @property
    def m(self) -> int:
        return self.s.shape[0]


class Encoder(ABC):
    """Maps a dataset to R^m"""

    name: str = "encoder"
    mode: EncoderMode = EncoderMode.PER_SAMPLE

    def __init__(self, output_dim: int):
        self.output_dim = int(output_dim)

    @abstractmethod
    def embed(self, data: Dataset) -> DatasetEmbedding:
        """Compute the dataset embedding"""

    def __repr__(self) -> str:
        return f"{type(self).__name__}(m={self.output_dim})"


class PerSampleEncoder(Encoder):
    """Encoder applied row by row, combined by mean aggregation"""

    mode = EncoderMode.PER_SAMPLE

    @abstractmethod
    def transform(self, rows: np.ndarray) -> np.ndarray:
        """Map an n x d block of rows to an n x m block of encodings"""

    def embed(self, data: Dataset) -> DatasetEmbedding:
        return aggregate(self, data)


def aggregate(encoder: Encoder, data: Dataset) -> DatasetEmbedding:
    """
    Mean aggregation S = (1/n) sum_i T(X_i)

    Args:
        encoder: A per-sample encoder
        data: Dataset to embed

    Returns:
        DatasetEmbedding with the sample count recorded
    """
    if encoder.mode is not EncoderMode.PER_SAMPLE or not isinstance(encoder, PerSampleEncoder):
        raise ValueError(f"{encoder.name}: mean aggregation needs a per_sample encoder")
    if data.n < 1:
        raise DegenerateError("cannot aggregate an empty dataset")
    encoded = np.asarray(encoder.transform(data.rows), dtype=float)
    if encoded.shape != (data.n, encoder.output_dim):
        raise ShapeError(f"{encoder.name}: transform returned {encoded.shape}, expected {(data.n, encoder.output_dim)}")
    return DatasetEmbedding(encoded.mean(axis=0), data.n)


class MomentEncoder(PerSampleEncoder):
    """x -> (x, x^2, x^3, x^4) truncated to m coordinates"""

    name = "gaussian_moments"

    def __init__(self, m: int):
        if not 1 <= m <= 4:
            raise ValueError(f"moment encoder dimension must be in 1..4, got {m}")
        super().__init__(m)

    def transform(self, rows: np.ndarray) -> np.ndarray:
        x = np.asarray(rows, dtype=float).reshape(-1, 1)
        return x ** np.arange(1, self.output_dim + 1)


def gaussian_moment_encoder(m: int) -> MomentEncoder:
    return MomentEncoder(m)


class QuantileEncoder(Encoder):
    """
    Empirical quantiles at levels (j - 0.5)/m, j = 1..m

    The default Hazen interpolation places level (j - 0.5)/n exactly on the
    j-th order statistic, so m = n recovers the sorted sample. `method="linear"`
    selects the (n - 1)q positioning instead.
    """

    name = "cauchy_quantiles"
    mode = EncoderMode.DATASET_STATISTIC

    def __init__(self, m: int, method: str = "hazen"):
        if m < 1:
            raise ValueError(f"quantile count must be at least 1, got {m}")
        super().__init__(m)
        self.method = method
        self.levels = (np.arange(1, m + 1) - 0.5) / m

    def embed(self, data: Dataset) -> DatasetEmbedding:
        if data.d != 1:
            raise ShapeError(f"quantile encoder expects one data column, got {data.d}")
        if self.output_dim > data.n:
            raise DegenerateError(f"quantile encoder needs m <= n, got m={self.output_dim}, n={data.n}")
        values = np.quantile(data.rows[:, 0], self.levels, method=self.method)
        return DatasetEmbedding(values, data.n)


def cauchy_quantile_encoder(m: int) -> QuantileEncoder:
    return QuantileEncoder(m)


class Decoder(ABC):
    """Reconstructs the per-sample log-likelihood h(theta, S)"""

    name: str = "decoder"

    @abstractmethod
    def evaluate(self, thetas: np.ndarray, embedding: DatasetEmbedding) -> np.ndarray:
        """Decoder output for each row of a G x p theta matrix"""

    def __call__(self, theta: ThetaLike, embedding: DatasetEmbedding) -> float:
        return float(self.evaluate(as_param_vector(theta).as_array()[None, :], embedding)[0])

    def __repr__(self) -> str:
        return f"{type(self).__name__}()"


class GaussianAnalyticDecoder(Decoder):
    """
    Gaussian factorisation decoder

    Uses the first two raw moments; with a single moment the second is
    replaced by s1^2 + 1 (unit second central moment).
    """

    name = "gaussian_analytic"

    def evaluate(self, thetas: np.ndarray, embedding: DatasetEmbedding) -> np.ndarray:
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        if thetas.shape[1] != 2:
            raise ShapeError(f"gaussian decoder expects theta = (mu, sigma), got shape {thetas.shape}")
        s1 = embedding.s[0]
        s2 = embedding.s[1] if embedding.m >= 2 else s1 * s1 + 1.0
        mu = thetas[:, 0]
        sigma = thetas[:, 1]
        check_sigma(sigma)
        return -np.log(sigma) - 0.5 * LOG_2PI - (s2 - 2.0 * mu * s1 + mu * mu) / (2.0 * sigma * sigma)


def gaussian_analytic_decoder(theta: ThetaLike, embedding: DatasetEmbedding) -> float:
    return GaussianAnalyticDecoder()(theta, embedding)


class CauchyQuantileDecoder(Decoder):
    """Equal-weight plug-in of the Cauchy log-density at the stored quantiles"""

    name = "cauchy_quantile"

    def evaluate(self, thetas: np.ndarray, embedding: DatasetEmbedding) -> np.ndarray:
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        if thetas.shape[1] != 1:
            raise ShapeError(f"cauchy decoder expects a scalar location, got shape {thetas.shape}")
        return cauchy_log_density(embedding.s[None, :], thetas).mean(axis=1)


def cauchy_quantile_decoder(theta: ThetaLike, embedding: DatasetEmbedding) -> float:
    return CauchyQuantileDecoder()(theta, embedding)


def surrogate_log_likelihood(decoder: Decoder, theta: ThetaLike, embedding: DatasetEmbedding) -> float:
    """L~_n(theta) = n * h(theta, S)"""
    return embedding.n * decoder(theta, embedding)
