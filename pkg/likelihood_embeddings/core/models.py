"""Parametric families: exact log-densities, samplers and whole-dataset likelihoods

These are the ground truth every embedding is audited against.
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import logsumexp

from ..config import get_settings
from ..utils.rng import make_rng
from .errors import DegenerateError, DomainError, NonFiniteLikelihoodError, ShapeError

logger = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)
LOG_PI = math.log(math.pi)


@dataclass(frozen=True)
class ParamVector:
    """A point theta in R^p"""

    values: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in np.ravel(self.values)))

    @classmethod
    def of(cls, *values: float) -> "ParamVector":
        return cls(tuple(values))

    @property
    def dim(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.array(self.values, dtype=float)

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self) -> Iterator[float]:
        return iter(self.values)

    def __getitem__(self, index: int) -> float:
        return self.values[index]


ThetaLike = Union[ParamVector, Sequence[float], np.ndarray]


def as_param_vector(theta: ThetaLike) -> ParamVector:
    """Coerce a sequence or array to a ParamVector"""
    if isinstance(theta, ParamVector):
        return theta
    return ParamVector(tuple(np.ravel(np.asarray(theta, dtype=float))))


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    An n x d matrix of i.i.d. observations

    Args:
        rows: Observations; a 1-D input is read as a single column
        seed: Seed the rows were generated from (0 if external)
    """

    rows: np.ndarray
    seed: int = 0

    def __post_init__(self):
        rows = np.array(self.rows, dtype=float)
        if rows.ndim == 1:
            rows = rows[:, None]
        if rows.ndim != 2:
            raise ShapeError(f"dataset rows must be 1-D or 2-D, got shape {rows.shape}")
        if rows.shape[0] < 1:
            raise DegenerateError("dataset must contain at least one row")
        if not np.all(np.isfinite(rows)):
            raise DomainError("dataset entries must be finite")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1]

    def concat(self, other: "Dataset") -> "Dataset":
        """Stack two datasets row-wise (provenance becomes external)"""
        if other.d != self.d:
            raise ShapeError(f"cannot concatenate datasets with d={self.d} and d={other.d}")
        return Dataset(np.vstack([self.rows, other.rows]))

    def repeat(self, times: int) -> "Dataset":
        """Repeat the whole dataset `times` times"""
        if times < 1:
            raise ValueError("times must be at least 1")
        return Dataset(np.vstack([self.rows] * times), self.seed)

    def permuted(self, rng: np.random.Generator) -> "Dataset":
        """Return the same rows in a random order"""
        return Dataset(self.rows[rng.permutation(self.n)], self.seed)


class ModelFamily(ABC):
    """Behavioural contract for a parametric family {P_theta}"""

    name: str = "family"
    param_dim: int = 0
    data_dim: int = 0

    def __init__(self, param_domain: Sequence[Tuple[float, float]]):
        domain = tuple((float(lo), float(hi)) for lo, hi in param_domain)
        if len(domain) != self.param_dim:
            raise ShapeError(f"{self.name}: domain has {len(domain)} axes, expected {self.param_dim}")
        self.param_domain = domain

    def check_thetas(self, thetas) -> np.ndarray:
        """Validate a G x p matrix (or a single theta) and return it as an array"""
        if isinstance(thetas, ParamVector):
            thetas = thetas.values
        elif isinstance(thetas, (list, tuple)) and thetas and isinstance(thetas[0], ParamVector):
            thetas = [theta.values for theta in thetas]
        arr = np.atleast_2d(np.asarray(thetas, dtype=float))
        if arr.ndim != 2 or arr.shape[1] != self.param_dim:
            raise ShapeError(f"{self.name}: expected thetas of dimension {self.param_dim}, got shape {arr.shape}")
        return arr

    def check_rows(self, rows: np.ndarray) -> np.ndarray:
        rows = np.asarray(rows, dtype=float)
        if rows.ndim == 1 and self.data_dim == 1:
            rows = rows[:, None]
        if rows.ndim != 2 or rows.shape[1] != self.data_dim:
            raise ShapeError(f"{self.name}: expected rows of dimension {self.data_dim}, got shape {rows.shape}")
        return rows

    def contains(self, theta: ThetaLike) -> bool:
        """True when theta lies inside the declared parameter box"""
        values = as_param_vector(theta).values
        if len(values) != self.param_dim:
            return False
        return all(lo <= v <= hi for v, (lo, hi) in zip(values, self.param_domain))

    @abstractmethod
    def log_density(self, rows: np.ndarray, thetas: np.ndarray) -> np.ndarray:
        """
        Per-row log-densities for every theta

        Args:
            rows: n x d observations
            thetas: G x p parameter matrix

        Returns:
            G x n matrix of log-densities
        """

    @abstractmethod
    def sample_rows(self, theta: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw n rows from P_theta"""

    def __repr__(self) -> str:
        return f"{type(self).__name__}(param_dim={self.param_dim}, data_dim={self.data_dim})"


def check_sigma(sigma) -> None:
    sigma = np.asarray(sigma, dtype=float)
    if np.any(~(sigma > 0)):
        raise DomainError(f"sigma must be positive, got {sigma.min() if sigma.size else sigma}")
    floor = get_settings().sigma_floor
    if np.any(sigma < floor):
        raise DomainError(f"sigma {sigma.min()} is below the floor {floor}")


def gaussian_log_density(x, mu, sigma):
    """log N(x; mu, sigma^2); raises DomainError for non-positive sigma"""
    check_sigma(sigma)
    return -np.log(sigma) - 0.5 * LOG_2PI - (np.asarray(x) - mu) ** 2 / (2.0 * np.asarray(sigma) ** 2)


def cauchy_log_density(x, theta):
    """log Cauchy(x; theta, 1)"""
    return -LOG_PI - np.log1p((np.asarray(x) - theta) ** 2)


def gmm_log_density(x, means, weights: Optional[Sequence[float]] = None) -> float:
    """
    Log-density of an identity-covariance Gaussian mixture at one point

    Args:
        x: Point of dimension d
        means: K x d component means
        weights: Mixture weights (defaults to the configured GMM weights)

    Returns:
        log sum_k w_k N(x; mu_k, I), computed with log-sum-exp
    """
    x = np.asarray(x, dtype=float)
    means = np.asarray(means, dtype=float)
    w = np.asarray(get_settings().gmm_weights if weights is None else weights, dtype=float)
    if means.ndim != 2 or x.ndim != 1 or x.shape[0] != means.shape[1]:
        raise ShapeError(f"gmm: x shape {x.shape} incompatible with means shape {means.shape}")
    if w.shape != (means.shape[0],):
        raise ShapeError(f"gmm: {w.shape[0]} weights for {means.shape[0]} components")
    d = x.shape[0]
    sq = np.sum((x[None, :] - means) ** 2, axis=1)
    return float(logsumexp(np.log(w) - 0.5 * d * LOG_2PI - 0.5 * sq))


class GaussianFamily(ModelFamily):
    """N(mu, sigma^2) with theta = (mu, sigma)"""

    name = "gaussian"
    param_dim = 2
    data_dim = 1

    def __init__(self, param_domain: Optional[Sequence[Tuple[float, float]]] = None):
        settings = get_settings()
        super().__init__(param_domain or (settings.gaussian_mu_range, settings.gaussian_sigma_range))

    def log_density(self, rows: np.ndarray, thetas: np.ndarray) -> np.ndarray:
        x = self.check_rows(rows)[:, 0]
        thetas = self.check_thetas(thetas)
        mu = thetas[:, 0:1]
        sigma = thetas[:, 1:2]
        return gaussian_log_density(x[None, :], mu, sigma)

    def sample_rows(self, theta: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
        mu, sigma = self.check_thetas(theta)[0]
        check_sigma(sigma)
        return rng.normal(mu, sigma, size=(n, 1))


class CauchyFamily(ModelFamily):
    """Cauchy(theta, 1) location family"""

    name = "cauchy"
    param_dim = 1
    data_dim = 1

    def __init__(self, param_domain: Optional[Sequence[Tuple[float, float]]] = None):
        super().__init__(param_domain or (get_settings().cauchy_theta_range,))

    def log_density(self, rows: np.ndarray, thetas: np.ndarray) -> np.ndarray:
        x = self.check_rows(rows)[:, 0]
        theta = self.check_thetas(thetas)[:, 0:1]
        return cauchy_log_density(x[None, :], theta)

    def sample_rows(self, theta: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
        location = self.check_thetas(theta)[0, 0]
        return location + rng.standard_cauchy(size=(n, 1))


class GaussianMixtureFamily(ModelFamily):
    """
    Identity-covariance Gaussian mixture with known weights

    Only the K*d component means are parameters; theta is the row-major
    flattening of the K x d mean matrix.
    """

    name = "gmm"

    def __init__(
        self,
        weights: Optional[Sequence[float]] = None,
        data_dim: int = 10,
        mean_range: Optional[Tuple[float, float]] = None,
    ):
        settings = get_settings()
        self.weights = np.asarray(settings.gmm_weights if weights is None else weights, dtype=float)
        if np.any(self.weights <= 0) or abs(self.weights.sum() - 1.0) > 1e-12:
            raise DomainError("mixture weights must be positive and sum to 1")
        self.n_components = self.weights.shape[0]
        self.data_dim = data_dim
        self.param_dim = self.n_components * data_dim
        super().__init__([mean_range or settings.gmm_mean_range] * self.param_dim)

    def means(self, theta: ThetaLike) -> np.ndarray:
        """Reshape a flat theta into the K x d mean matrix"""
        return self.check_thetas(as_param_vector(theta).as_array())[0].reshape(self.n_components, self.data_dim)

    def log_density(self, rows: np.ndarray, thetas: np.ndarray) -> np.ndarray:
        rows = self.check_rows(rows)
        means = self.check_thetas(thetas).reshape(-1, self.n_components, self.data_dim)
        diff = rows[None, :, None, :] - means[:, None, :, :]
        sq = np.einsum("gnkd,gnkd->gnk", diff, diff)
        log_comp = np.log(self.weights) - 0.5 * self.data_dim * LOG_2PI - 0.5 * sq
        return logsumexp(log_comp, axis=-1)

    def sample_rows(self, theta: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
        means = self.check_thetas(theta)[0].reshape(self.n_components, self.data_dim)
        # component counts are multinomial by weight
        labels = rng.choice(self.n_components, size=n, p=self.weights)
        return means[labels] + rng.standard_normal(size=(n, self.data_dim))


def log_likelihood_grid(family: ModelFamily, data: Dataset, thetas, chunk_size: Optional[int] = None) -> np.ndarray:
    """
    L_n(theta) = sum_i log p_theta(X_i) for every row of a theta matrix

    The grid is processed in fixed-size chunks; each entry is an independent
    row sum, so chunking never changes the result.
    """
    if data.d != family.data_dim:
        raise ShapeError(f"{family.name}: data dimension {data.d}, expected {family.data_dim}")
    thetas = family.check_thetas(thetas)
    chunk = chunk_size or get_settings().grid_chunk_size
    out = np.empty(thetas.shape[0], dtype=float)
    for start in range(0, thetas.shape[0], chunk):
        block = thetas[start:start + chunk]
        out[start:start + chunk] = family.log_density(data.rows, block).sum(axis=1)
    return out


def log_likelihood(family: ModelFamily, data: Dataset, theta: ThetaLike) -> float:
    """Whole-dataset log-likelihood at one parameter value"""
    theta = as_param_vector(theta)
    value = float(log_likelihood_grid(family, data, theta.as_array())[0])
    if not math.isfinite(value):
        raise NonFiniteLikelihoodError(f"{family.name}: log-likelihood is not finite at theta={theta.values}", theta)
    return value


def sample(family: ModelFamily, theta: ThetaLike, n: int, seed: int) -> Dataset:
    """Draw a reproducible i.i.d. dataset of n rows from P_theta"""
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    rng = make_rng(seed)
    rows = family.sample_rows(as_param_vector(theta).as_array(), n, rng)
    return Dataset(rows, seed)


def gaussian_mle(data: Dataset) -> ParamVector:
    """Closed-form Gaussian MLE (mean, root mean squared deviation)"""
    if data.d != 1:
        raise ShapeError(f"gaussian_mle expects one data column, got {data.d}")
    if data.n < 2:
        raise DegenerateError(f"gaussian_mle needs n >= 2, got {data.n}")
    x = data.rows[:, 0]
    mean = float(np.mean(x))
    sigma = math.sqrt(float(np.mean((x - mean) ** 2)))
    if sigma < get_settings().sigma_floor:
        raise DegenerateError("gaussian_mle: data has zero variance")
    return ParamVector.of(mean, sigma)


def linreg_log_likelihood(X, y, beta, sigma2: float) -> float:
    """Gaussian linear-regression log-likelihood -(n/2)log(2 pi s2) - |y - X b|^2 / (2 s2)"""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if X.ndim != 2 or y.shape != (X.shape[0],) or beta.shape != (X.shape[1],):
        raise ShapeError(f"linreg: X {X.shape}, y {y.shape}, beta {beta.shape} are inconsistent")
    if not sigma2 > 0:
        raise DomainError(f"sigma2 must be positive, got {sigma2}")
    resid = y - X @ beta
    n = X.shape[0]
    return float(-0.5 * n * math.log(2.0 * math.pi * sigma2) - resid @ resid / (2.0 * sigma2))

