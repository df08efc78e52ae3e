"""Pointwise error, ratio distortion and the downstream bound cascade on a parameter grid

Suprema over the parameter space are grid maxima. The grid is carried in every
report so results can be reproduced.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from ..config import get_settings
from ..utils.rng import derive_seed
from .embeddings import Decoder, DatasetEmbedding, Encoder
from .errors import BoundViolationError, DegenerateError, DomainError, NonFiniteLikelihoodError
from .models import Dataset, ModelFamily, ParamVector, ThetaLike, as_param_vector, log_likelihood_grid, sample

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ThetaGrid:
    """
    A finite set of parameter values standing in for a compact subset of Theta

    Args:
        points: Grid points in evaluation order
        description: How the grid was built (axis ranges x resolutions)
    """

    points: Tuple[ParamVector, ...]
    description: str = "explicit"
    array: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        points = tuple(as_param_vector(p) for p in self.points)
        if not points:
            raise DegenerateError("a theta grid needs at least one point")
        dims = {p.dim for p in points}
        if len(dims) != 1:
            raise DomainError(f"grid points have mixed dimensions {sorted(dims)}")
        arr = np.array([p.values for p in points], dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "array", arr)

    @classmethod
    def regular(
        cls,
        family: ModelFamily,
        resolution: Sequence[int],
        ranges: Optional[Sequence[Tuple[float, float]]] = None,
    ) -> "ThetaGrid":
        """Axis-aligned product grid; the first axis varies slowest"""
        ranges = tuple(ranges) if ranges is not None else family.param_domain
        if len(resolution) != family.param_dim or len(ranges) != family.param_dim:
            raise DomainError(f"{family.name}: need {family.param_dim} axes for a regular grid")
        axes = [np.linspace(lo, hi, int(res)) for (lo, hi), res in zip(ranges, resolution)]
        mesh = np.meshgrid(*axes, indexing="ij")
        flat = np.stack([m.ravel() for m in mesh], axis=1)
        description = " x ".join(f"[{lo:g},{hi:g}]/{int(res)}" for (lo, hi), res in zip(ranges, resolution))
        return cls(tuple(ParamVector(tuple(row)) for row in flat), description)

    @classmethod
    def from_points(cls, points: Sequence[ThetaLike], description: str = "explicit") -> "ThetaGrid":
        return cls(tuple(as_param_vector(p) for p in points), description)

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def dim(self) -> int:
        return self.array.shape[1]

    def index_of(self, theta: ThetaLike, atol: float = 1e-12) -> Optional[int]:
        """Index of the first grid point equal to theta (within atol), else None"""
        target = as_param_vector(theta).as_array()
        if target.shape[0] != self.dim:
            return None
        hits = np.flatnonzero(np.all(np.abs(self.array - target) <= atol, axis=1))
        return int(hits[0]) if hits.size else None

    def nearest(self, theta: ThetaLike) -> ParamVector:
        """Grid point closest to theta in Euclidean distance"""
        target = as_param_vector(theta).as_array()
        return self.points[int(np.argmin(np.sum((self.array - target) ** 2, axis=1)))]

    def check_domain(self, family: ModelFamily) -> None:
        for point in self.points:
            if not family.contains(point):
                raise DomainError(f"{family.name}: grid point {point.values} lies outside the parameter domain")


@dataclass(frozen=True, eq=False)
class GridEvaluation:
    """True and surrogate log-likelihoods of one dataset over a grid"""

    grid: ThetaGrid
    embedding: DatasetEmbedding
    true_ll: np.ndarray
    decoded: np.ndarray

    @property
    def n(self) -> int:
        return self.embedding.n

    @property
    def surrogate_ll(self) -> np.ndarray:
        return self.n * self.decoded

    @property
    def difference(self) -> np.ndarray:
        """d(theta) = L_n(theta) - n h(theta, S)"""
        return self.true_ll - self.surrogate_ll


def _evaluate_with_embedding(
    family: ModelFamily,
    data: Dataset,
    embedding: DatasetEmbedding,
    decoder: Decoder,
    grid: ThetaGrid,
) -> GridEvaluation:
    grid.check_domain(family)
    true_ll = log_likelihood_grid(family, data, grid.array)
    decoded = np.asarray(decoder.evaluate(grid.array, embedding), dtype=float)
    bad = np.flatnonzero(~np.isfinite(true_ll) | ~np.isfinite(decoded))
    if bad.size:
        theta = grid.points[int(bad[0])]
        raise NonFiniteLikelihoodError(f"non-finite likelihood or decoder value at theta={theta.values}", theta)
    return GridEvaluation(grid, embedding, true_ll, decoded)


def evaluate_grid(
    family: ModelFamily,
    data: Dataset,
    encoder: Encoder,
    decoder: Decoder,
    grid: ThetaGrid,
) -> GridEvaluation:
    """Embed the dataset once and evaluate L_n and h over the grid"""
    return _evaluate_with_embedding(family, data, encoder.embed(data), decoder, grid)


def _require_pairs(grid: ThetaGrid) -> None:
    if grid.size < 2:
        raise DegenerateError("ratio quantities need a grid with at least two points")


def _pointwise(ev: GridEvaluation) -> Tuple[float, ParamVector]:
    gaps = np.abs(ev.true_ll / ev.n - ev.decoded)
    idx = int(np.argmax(gaps))
    return float(gaps[idx]), ev.grid.points[idx]


def _ratio(ev: GridEvaluation) -> Tuple[float, Tuple[ParamVector, ParamVector]]:
    # the largest pairwise ratio error equals the range of d
    d = ev.difference
    hi = int(np.argmax(d))
    lo = int(np.argmin(d))
    return float(d[hi] - d[lo]), (ev.grid.points[hi], ev.grid.points[lo])


def _lrt(ev: GridEvaluation, idx0: int) -> Tuple[float, float, float]:
    lam = 2.0 * (float(np.max(ev.true_ll)) - float(ev.true_ll[idx0]))
    lam_tilde = 2.0 * (float(np.max(ev.surrogate_ll)) - float(ev.surrogate_ll[idx0]))
    return lam, lam_tilde, abs(lam_tilde - lam)


def _mle_gap(ev: GridEvaluation) -> float:
    a = ev.grid.array[int(np.argmax(ev.true_ll))]
    b = ev.grid.array[int(np.argmax(ev.surrogate_ll))]
    return float(np.linalg.norm(a - b))


def _aic_bic(ev: GridEvaluation, k: int) -> Tuple[float, float]:
    max_true = float(np.max(ev.true_ll))
    max_surr = float(np.max(ev.surrogate_ll))
    aic, aic_surr = -2.0 * max_true + 2.0 * k, -2.0 * max_surr + 2.0 * k
    bic, bic_surr = -2.0 * max_true + k * math.log(ev.n), -2.0 * max_surr + k * math.log(ev.n)
    return abs(aic_surr - aic), abs(bic_surr - bic)


def _log_marginal(values: np.ndarray) -> float:
    # uniform discrete prior over the grid
    return float(logsumexp(values) - math.log(values.shape[0]))


def _log_bf_gap(ev0: GridEvaluation, ev1: GridEvaluation) -> float:
    log_bf = _log_marginal(ev1.true_ll) - _log_marginal(ev0.true_ll)
    log_bf_surr = _log_marginal(ev1.surrogate_ll) - _log_marginal(ev0.surrogate_ll)
    return abs(log_bf_surr - log_bf)


def pointwise_error(
    family: ModelFamily, data: Dataset, encoder: Encoder, decoder: Decoder, grid: ThetaGrid
) -> Tuple[float, ParamVector]:
    """
    epsilon_n = max over the grid of |(1/n) L_n(theta) - h(theta, S)|

    Returns:
        Tuple of (epsilon_n, grid point attaining it)
    """
    return _pointwise(evaluate_grid(family, data, encoder, decoder, grid))


def ratio_distortion(
    family: ModelFamily, data: Dataset, encoder: Encoder, decoder: Decoder, grid: ThetaGrid
) -> Tuple[float, Tuple[ParamVector, ParamVector]]:
    """
    Delta_n = max over grid pairs of the log-likelihood-ratio error

    Returns:
        Tuple of (Delta_n, (theta, theta') attaining it)
    """
    _require_pairs(grid)
    return _ratio(evaluate_grid(family, data, encoder, decoder, grid))


def lrt_statistics(
    family: ModelFamily,
    data: Dataset,
    encoder: Encoder,
    decoder: Decoder,
    grid: ThetaGrid,
    theta0: ThetaLike,
) -> Tuple[float, float, float]:
    """Grid likelihood-ratio statistics (Lambda, Lambda~, |Lambda~ - Lambda|) for H0: theta = theta0"""
    idx0 = grid.index_of(theta0)
    if idx0 is None:
        raise DomainError(f"theta0={as_param_vector(theta0).values} is not a grid point")
    return _lrt(evaluate_grid(family, data, encoder, decoder, grid), idx0)


def mle_gap(family: ModelFamily, data: Dataset, encoder: Encoder, decoder: Decoder, grid: ThetaGrid) -> float:
    """Distance between the grid argmax of L_n and that of the surrogate"""
    _require_pairs(grid)
    return _mle_gap(evaluate_grid(family, data, encoder, decoder, grid))


def aic_bic_report(
    family: ModelFamily,
    data: Dataset,
    encoder: Encoder,
    decoder: Decoder,
    grid: ThetaGrid,
    k: Optional[int] = None,
) -> Tuple[float, float]:
    """Absolute AIC and BIC differences between surrogate and true grid maximisers"""
    k = family.param_dim if k is None else k
    return _aic_bic(evaluate_grid(family, data, encoder, decoder, grid), k)


def log_bayes_factor_gap(
    family: ModelFamily,
    data: Dataset,
    encoder: Encoder,
    decoder: Decoder,
    grid0: ThetaGrid,
    grid1: ThetaGrid,
) -> float:
    """|log BF~ - log BF| for uniform discrete priors over grid0 (null) and grid1 (alternative)"""
    embedding = encoder.embed(data)
    ev0 = _evaluate_with_embedding(family, data, embedding, decoder, grid0)
    ev1 = _evaluate_with_embedding(family, data, embedding, decoder, grid1)
    return _log_bf_gap(ev0, ev1)


def grid_distortion_bound(eps_emp: float, G: int, n: int, L: float, diam: float) -> float:
    """Distortion bound sqrt(eps) * G + 2 n L diam / G for a model trained on a G-point grid"""
    if eps_emp < 0 or G < 1 or n < 1 or L <= 0 or diam <= 0:
        raise DomainError("grid_distortion_bound needs eps >= 0 and positive G, n, L, diam")
    return math.sqrt(eps_emp) * G + 2.0 * n * L * diam / G


def optimal_grid_size(eps_emp: float, n: int, L: float, diam: float) -> float:
    """Minimiser G* = (2 n L diam / sqrt(eps))^(1/2) of grid_distortion_bound"""
    if eps_emp < 0 or n < 1 or L <= 0 or diam <= 0:
        raise DomainError("optimal_grid_size needs eps >= 0 and positive n, L, diam")
    if eps_emp == 0:
        return math.inf
    return math.sqrt(2.0 * n * L * diam / math.sqrt(eps_emp))


@dataclass(frozen=True, eq=False)
class DistortionReport:
    """epsilon_n, Delta_n and every derived inference gap for one (model, encoder, decoder, grid) tuple"""

    epsilon_n: float
    delta_n: float
    bound_2n_eps: float
    tightness: Optional[float]
    lrt_gap: float
    lrt_bound_4delta: float
    mle_gap_norm: float
    aic_gap: float
    bic_gap: float
    bound_6n_eps: float
    logbf_gap: float
    bound_2n_eps_bf: float
    grid: ThetaGrid
    n: int
    theta0: ParamVector
    lrt_lambda: float
    lrt_lambda_surrogate: float
    epsilon_argmax: ParamVector
    delta_pair: Tuple[ParamVector, ParamVector]

    FLAT_FIELDS = (
        "epsilon_n", "delta_n", "bound_2n_eps", "tightness", "lrt_gap", "lrt_bound_4delta",
        "mle_gap_norm", "aic_gap", "bic_gap", "bound_6n_eps", "logbf_gap", "bound_2n_eps_bf",
        "n", "lrt_lambda", "lrt_lambda_surrogate",
    )

    def violations(self, slack: Optional[float] = None) -> List[str]:
        """Names of the cascade bounds that fail on this report"""
        slack = get_settings().bound_slack if slack is None else slack
        checks = {
            "delta_le_2n_eps": self.delta_n <= self.bound_2n_eps + slack,
            "lrt_le_4delta": self.lrt_gap <= self.lrt_bound_4delta + slack,
            "aic_le_6n_eps": self.aic_gap <= self.bound_6n_eps + slack,
            "bic_le_6n_eps": self.bic_gap <= self.bound_6n_eps + slack,
            "logbf_le_2n_eps": self.logbf_gap <= self.bound_2n_eps_bf + slack,
        }
        return [name for name, ok in checks.items() if not ok]

    @property
    def bounds_hold(self) -> bool:
        return not self.violations()

    def to_dict(self) -> Dict[str, object]:
        """Flat JSON-ready mapping"""
        out: Dict[str, object] = {name: getattr(self, name) for name in self.FLAT_FIELDS}
        out["grid_description"] = self.grid.description
        out["grid_size"] = self.grid.size
        out["theta0"] = list(self.theta0.values)
        out["epsilon_argmax"] = list(self.epsilon_argmax.values)
        out["delta_pair"] = [list(self.delta_pair[0].values), list(self.delta_pair[1].values)]
        return out

    @classmethod
    def csv_header(cls) -> List[str]:
        return list(cls.FLAT_FIELDS) + ["grid_size"]

    def csv_row(self) -> List[object]:
        return [getattr(self, name) for name in self.FLAT_FIELDS] + [self.grid.size]


def check_pointwise_to_ratio(report: DistortionReport, slack: Optional[float] = None) -> bool:
    """True iff Delta_n <= 2 n epsilon_n (+ slack); the tightness ratio is on the report"""
    slack = get_settings().bound_slack if slack is None else slack
    return report.delta_n <= report.bound_2n_eps + slack


def audit(
    family: ModelFamily,
    data: Dataset,
    encoder: Encoder,
    decoder: Decoder,
    grid: ThetaGrid,
    theta0: Optional[ThetaLike] = None,
    k: Optional[int] = None,
    grid_null: Optional[ThetaGrid] = None,
    strict: bool = False,
) -> DistortionReport:
    """
    Build a complete DistortionReport

    Args:
        family: Model family providing the exact likelihood
        data: Dataset to audit on
        encoder: Encoder producing the embedding
        decoder: Decoder reconstructing per-sample log-likelihoods
        grid: Parameter grid (also the Bayes-factor alternative)
        theta0: Null value for the LRT; defaults to the first grid point
        k: Parameter count for AIC/BIC; defaults to the family's dimension
        grid_null: Bayes-factor null grid; defaults to {theta0}
        strict: Raise BoundViolationError when a cascade bound fails

    Returns:
        DistortionReport
    """
    _require_pairs(grid)
    theta0 = grid.points[0] if theta0 is None else as_param_vector(theta0)
    idx0 = grid.index_of(theta0)
    if idx0 is None:
        raise DomainError(f"theta0={theta0.values} is not a grid point")
    k = family.param_dim if k is None else k

    embedding = encoder.embed(data)
    ev = _evaluate_with_embedding(family, data, embedding, decoder, grid)
    eps, eps_arg = _pointwise(ev)
    delta, pair = _ratio(ev)
    lam, lam_tilde, lrt_gap = _lrt(ev, idx0)
    aic_gap, bic_gap = _aic_bic(ev, k)
    if grid_null is None:
        null_ev = GridEvaluation(
            ThetaGrid((theta0,), "theta0"), embedding, ev.true_ll[idx0:idx0 + 1], ev.decoded[idx0:idx0 + 1]
        )
    else:
        null_ev = _evaluate_with_embedding(family, data, embedding, decoder, grid_null)
    n = ev.n
    report = DistortionReport(
        epsilon_n=eps,
        delta_n=delta,
        bound_2n_eps=2.0 * n * eps,
        tightness=delta / (2.0 * n * eps) if eps > get_settings().exact_tolerance else None,
        lrt_gap=lrt_gap,
        lrt_bound_4delta=4.0 * delta,
        mle_gap_norm=_mle_gap(ev),
        aic_gap=aic_gap,
        bic_gap=bic_gap,
        bound_6n_eps=6.0 * n * eps,
        logbf_gap=_log_bf_gap(null_ev, ev),
        bound_2n_eps_bf=2.0 * n * eps,
        grid=grid,
        n=n,
        theta0=theta0,
        lrt_lambda=lam,
        lrt_lambda_surrogate=lam_tilde,
        epsilon_argmax=eps_arg,
        delta_pair=pair,
    )
    failed = report.violations()
    if failed:
        logger.error("❌ Bound cascade violated (%s) for %s/%s", ", ".join(failed), family.name, decoder.name)
        if strict:
            raise BoundViolationError(f"bound cascade violated: {', '.join(failed)}")
    return report


def lrt_null_distribution(
    family: ModelFamily,
    theta0: ThetaLike,
    n: int,
    grid: ThetaGrid,
    encoder: Encoder,
    decoder: Decoder,
    replications: int,
    seed: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Sample Lambda and Lambda~ under H0 from fresh datasets drawn at theta0

    Under regularity Lambda is asymptotically chi-squared with p degrees of freedom.
    """
    idx0 = grid.index_of(theta0)
    if idx0 is None:
        raise DomainError(f"theta0={as_param_vector(theta0).values} is not a grid point")
    lam = np.empty(replications)
    lam_tilde = np.empty(replications)
    for rep in range(replications):
        data = sample(family, theta0, n, derive_seed(seed, "wilks", rep))
        lam[rep], lam_tilde[rep], _ = _lrt(evaluate_grid(family, data, encoder, decoder, grid), idx0)
    return lam, lam_tilde


def select_embedding_dimension(errors_by_m: Mapping[int, float], tolerance: float) -> Optional[int]:
    """Smallest embedding dimension whose error is within tolerance, or None"""
    for m in sorted(errors_by_m):
        if errors_by_m[m] <= tolerance:
            return m
    return None
