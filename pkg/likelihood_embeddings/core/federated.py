"""Multi-site clinical trial simulation with summary-based federated inference

Sites hold regression data y = X beta + noise with X = [1, treatment, c1, c2].
Each site ships a fixed-length vector of additive statistics; the centre sums
them and tests H0: beta_treat = 0.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from ..utils.batch_utils import BatchProcessor
from ..utils.file_utils import PathLike, write_csv
from ..utils.rng import derive_seed, make_rng
from .errors import DegenerateError, ShapeError
from .models import LOG_2PI

logger = logging.getLogger(__name__)

P = 4
TREATMENT = 1
NUISANCE_BETA = (0.5, 0.3, -0.2)
LEVELS = {"full16": 16, "mid12": 12, "treat8": 8}
METHODS = ("pooled", "full16", "mid12", "treat8", "meta")
POWER_CSV_HEADER = ("beta", "method", "rejections", "n_sims", "power", "ci_lo", "ci_hi")


class InferenceResult(NamedTuple):
    beta_hat: float
    se: float
    p_value: float


@dataclass(frozen=True, eq=False)
class SiteData:
    """
    Patient-level data held by one site

    Args:
        X: n x 4 design (intercept, treatment, covariate 1, covariate 2)
        y: Outcomes
    """

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        y = np.array(self.y, dtype=float)
        if X.ndim != 2 or X.shape[1] != P or y.shape != (X.shape[0],):
            raise ShapeError(f"site data needs X of shape (n, {P}) and y of shape (n,), got {X.shape} and {y.shape}")
        if not np.all(X[:, 0] == 1.0):
            raise ShapeError("intercept column must be all ones")
        if not np.all((X[:, TREATMENT] == 0.0) | (X[:, TREATMENT] == 1.0)):
            raise ShapeError("treatment column must be binary")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def concat(self, other: "SiteData") -> "SiteData":
        return SiteData(np.vstack([self.X, other.X]), np.concatenate([self.y, other.y]))


@dataclass(frozen=True, eq=False)
class SiteSummary:
    """
    Fixed-length additive statistics of one site (or of several, once aggregated)

    Payload layouts:
        full16: [n, y'y, X'y (4), upper triangle of X'X row-major (10)]
        treat8: [n, sum y, y'y, y'x_t, treatment row of X'X (4)]
        mid12:  treat8 followed by [sum c1, sum c2, sum c1^2, sum c2^2]
    """

    level: str
    payload: np.ndarray

    def __post_init__(self):
        if self.level not in LEVELS:
            raise ValueError(f"summary level must be one of {tuple(LEVELS)}, got {self.level!r}")
        payload = np.array(self.payload, dtype=float).ravel()
        if payload.shape[0] != LEVELS[self.level]:
            raise ShapeError(f"{self.level} payload needs {LEVELS[self.level]} numbers, got {payload.shape[0]}")
        payload.setflags(write=False)
        object.__setattr__(self, "payload", payload)

    @property
    def n(self) -> int:
        return int(round(self.payload[0]))


def simulate_site(beta_treat: float, n: int, seed: int, sigma: float = 1.0) -> SiteData:
    """
    Simulate one site: Bernoulli(0.5) treatment, two N(0, 1) covariates

    Args:
        beta_treat: Treatment effect
        n: Number of patients (at least 8)
        seed: Site seed
        sigma: Noise standard deviation

    Returns:
        SiteData
    """
    if n < 8:
        raise DegenerateError(f"a site needs at least 8 patients, got {n}")
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    rng = make_rng(seed)
    treatment = rng.binomial(1, 0.5, size=n).astype(float)
    covariates = rng.standard_normal(size=(n, 2))
    noise = rng.standard_normal(size=n)
    X = np.column_stack([np.ones(n), treatment, covariates])
    beta = np.array([NUISANCE_BETA[0], beta_treat, NUISANCE_BETA[1], NUISANCE_BETA[2]])
    return SiteData(X, X @ beta + sigma * noise)


def summarize_site(data: SiteData, level: str) -> SiteSummary:
    """Compute the site's summary payload at the requested level"""
    if level not in LEVELS:
        raise ValueError(f"summary level must be one of {tuple(LEVELS)}, got {level!r}")
    X, y = data.X, data.y
    XtX = X.T @ X
    yy = float(y @ y)
    if level == "full16":
        payload = np.concatenate([[data.n, yy], X.T @ y, XtX[np.triu_indices(P)]])
        return SiteSummary(level, payload)
    t = X[:, TREATMENT]
    payload = np.concatenate([[data.n, y.sum(), yy, y @ t], XtX[TREATMENT]])
    if level == "mid12":
        c = X[:, 2:]
        payload = np.concatenate([payload, c.sum(axis=0), (c * c).sum(axis=0)])
    return SiteSummary(level, payload)


def aggregate_summaries(summaries: Sequence[SiteSummary]) -> SiteSummary:
    """Coordinate-wise sum of same-level summaries"""
    if not summaries:
        raise ValueError("nothing to aggregate")
    levels = {s.level for s in summaries}
    if len(levels) != 1:
        raise ValueError(f"cannot aggregate mixed summary levels {sorted(levels)}")
    return SiteSummary(summaries[0].level, np.sum([s.payload for s in summaries], axis=0))


def _wald(beta_hat: float, se: float) -> InferenceResult:
    z = beta_hat / se
    return InferenceResult(float(beta_hat), float(se), float(2.0 * stats.norm.sf(abs(z))))


def _solve_normal_equations(XtX: np.ndarray, Xty: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    if np.linalg.matrix_rank(XtX) < XtX.shape[0]:
        raise DegenerateError("X'X is singular")
    try:
        inv = np.linalg.inv(XtX)
    except np.linalg.LinAlgError as e:
        raise DegenerateError(f"X'X is singular: {e}") from e
    return np.linalg.solve(XtX, Xty), inv


def _stack(sites: Sequence[SiteData]) -> Tuple[np.ndarray, np.ndarray]:
    if not sites:
        raise ValueError("need at least one site")
    return np.vstack([s.X for s in sites]), np.concatenate([s.y for s in sites])


def _ols(X: np.ndarray, y: np.ndarray) -> InferenceResult:
    n = X.shape[0]
    if n <= P:
        raise DegenerateError(f"OLS needs n > {P}, got {n}")
    beta, inv = _solve_normal_equations(X.T @ X, X.T @ y)
    resid = y - X @ beta
    sigma2 = float(resid @ resid) / (n - P)
    return _wald(beta[TREATMENT], math.sqrt(sigma2 * inv[TREATMENT, TREATMENT]))


def pooled_inference(sites: Union[SiteData, Sequence[SiteData]]) -> InferenceResult:
    """
    OLS on the stacked patient-level data with a Wald test of beta_treat = 0

    Returns:
        InferenceResult (beta_hat, se, p_value)
    """
    if isinstance(sites, SiteData):
        sites = [sites]
    return _ols(*_stack(sites))


def _unpack_full16(summary: SiteSummary) -> Tuple[int, float, np.ndarray, np.ndarray]:
    payload = summary.payload
    XtX = np.zeros((P, P))
    XtX[np.triu_indices(P)] = payload[6:]
    XtX = XtX + np.triu(XtX, 1).T
    return summary.n, float(payload[1]), payload[2:6].copy(), XtX


def summary_inference(summary: SiteSummary) -> InferenceResult:
    """Pooled OLS and Wald test computed from an aggregated full16 summary only"""
    if summary.level != "full16":
        raise ValueError(f"summary_inference needs a full16 summary, got {summary.level}")
    n, yy, Xty, XtX = _unpack_full16(summary)
    if n <= P:
        raise DegenerateError(f"OLS needs n > {P}, got {n}")
    beta, inv = _solve_normal_equations(XtX, Xty)
    rss = yy - float(beta @ Xty)
    sigma2 = rss / (n - P)
    return _wald(beta[TREATMENT], math.sqrt(sigma2 * inv[TREATMENT, TREATMENT]))


def _covariate_share(payload: np.ndarray) -> float:
    """
    Sum of squared treatment/covariate correlations from mid12 moments, clipped to [0, 0.5]

    mid12 stores no outcome/covariate cross moments, so the covariate effect on y
    cannot be removed. Under randomised treatment the share is O(1/n) and mid12
    stays within a hair of treat8; it only bites when treatment and covariates
    are imbalanced.
    """
    n = payload[0]
    sum_t, sum_tt = payload[4], payload[5]
    var_t = sum_tt / n - (sum_t / n) ** 2
    share = 0.0
    for j in range(2):
        sum_tc = payload[6 + j]
        sum_c, sum_cc = payload[8 + j], payload[10 + j]
        var_c = sum_cc / n - (sum_c / n) ** 2
        if var_t <= 0 or var_c <= 0:
            continue
        cov = sum_tc / n - (sum_t / n) * (sum_c / n)
        share += cov * cov / (var_t * var_c)
    return float(np.clip(share, 0.0, 0.5))


def compressed_inference(summary: SiteSummary) -> InferenceResult:
    """
    Intercept-plus-treatment regression from a treat8 or mid12 summary

    mid12 shrinks the residual variance by the covariates' correlation share
    with treatment; see DESIGN.md.
    """
    if summary.level not in ("treat8", "mid12"):
        raise ValueError(f"compressed_inference needs a treat8 or mid12 summary, got {summary.level}")
    payload = summary.payload
    n = float(payload[0])
    sum_y, yy, yt = payload[1], payload[2], payload[3]
    sum_t, tt = payload[4], payload[5]
    if n <= 2:
        raise DegenerateError(f"two-variable regression needs n > 2, got {n:g}")
    t_bar = sum_t / n
    s_tt = tt - n * t_bar * t_bar
    if s_tt <= 0:
        raise DegenerateError("treatment has zero variance")
    y_bar = sum_y / n
    beta_t = (yt - sum_y * t_bar) / s_tt
    rss = (yy - n * y_bar * y_bar) - beta_t * beta_t * s_tt
    sigma2 = max(rss, 0.0) / (n - 2)
    if summary.level == "mid12":
        sigma2 *= 1.0 - _covariate_share(payload)
    return _wald(beta_t, math.sqrt(sigma2 / s_tt))


def meta_analysis(sites: Sequence[SiteData]) -> InferenceResult:
    """Fixed-effect inverse-variance-weighted combination of per-site OLS estimates"""
    if not sites:
        raise ValueError("need at least one site")
    estimates = [pooled_inference(site) for site in sites]
    w = np.array([1.0 / (e.se * e.se) for e in estimates])
    b = np.array([e.beta_hat for e in estimates])
    return _wald(float(np.sum(w * b) / np.sum(w)), float(1.0 / math.sqrt(np.sum(w))))


def summary_log_likelihood(summary: SiteSummary, beta: Sequence[float], sigma2: float) -> float:
    """Gaussian regression log-likelihood evaluated from a full16 summary"""
    if summary.level != "full16":
        raise ValueError(f"summary_log_likelihood needs a full16 summary, got {summary.level}")
    if not sigma2 > 0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (P,):
        raise ShapeError(f"beta must have {P} entries, got shape {beta.shape}")
    n, yy, Xty, XtX = _unpack_full16(summary)
    rss = yy - 2.0 * float(beta @ Xty) + float(beta @ XtX @ beta)
    return float(-0.5 * n * (LOG_2PI + math.log(sigma2)) - rss / (2.0 * sigma2))


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> Tuple[float, float]:
    """
    Wilson score interval for a binomial proportion

    Args:
        successes: Number of successes
        trials: Number of trials
        confidence: Two-sided coverage

    Returns:
        Tuple of (lower, upper)
    """
    if trials < 1 or not 0 <= successes <= trials:
        raise ValueError(f"need 0 <= successes <= trials and trials >= 1, got {successes}/{trials}")
    z = stats.norm.ppf(0.5 + confidence / 2.0)
    p = successes / trials
    denom = 1.0 + z * z / trials
    centre = (p + z * z / (2.0 * trials)) / denom
    half = z / denom * math.sqrt(p * (1.0 - p) / trials + z * z / (4.0 * trials * trials))
    lo = 0.0 if successes == 0 else min(centre - half, p)
    hi = 1.0 if successes == trials else max(centre + half, p)
    return max(0.0, lo), min(1.0, hi)


@dataclass(frozen=True)
class TrialConfig:
    """Multi-site trial simulation settings"""

    sites: int = 5
    n_per_site: int = 200
    beta_grid: Tuple[float, ...] = (0.0, 0.1, 0.2, 0.3)
    sigma: float = 1.0
    n_sims: int = 500
    alpha: float = 0.05
    seed: int = 0
    methods: Tuple[str, ...] = METHODS

    def __post_init__(self):
        object.__setattr__(self, "beta_grid", tuple(float(b) for b in self.beta_grid))
        object.__setattr__(self, "methods", tuple(self.methods))

    def validate(self) -> bool:
        if self.n_sims < 1:
            raise ValueError("n_sims must be at least 1")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.sites < 1 or self.n_per_site < 8:
            raise ValueError("need at least one site with at least 8 patients")
        if not self.beta_grid:
            raise ValueError("beta_grid must not be empty")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ValueError(f"unknown methods {unknown}; choose from {METHODS}")
        return True


@dataclass(frozen=True)
class PowerRow:
    beta: float
    method: str
    rejections: int
    n_sims: int
    power: float
    ci_lo: float
    ci_hi: float

    def as_tuple(self) -> Tuple:
        return (self.beta, self.method, self.rejections, self.n_sims, self.power, self.ci_lo, self.ci_hi)


@dataclass
class PowerCurve:
    """Rejection rates per (beta, method), with per-simulation indicators kept for paired comparisons"""

    rows: List[PowerRow] = field(default_factory=list)
    indicators: Dict[Tuple[float, str], np.ndarray] = field(default_factory=dict)

    def row(self, beta: float, method: str) -> PowerRow:
        for r in self.rows:
            if r.beta == beta and r.method == method:
                return r
        raise KeyError(f"no row for beta={beta}, method={method}")

    def power(self, beta: float, method: str) -> float:
        return self.row(beta, method).power

    def to_csv(self, path: PathLike):
        return write_csv(path, POWER_CSV_HEADER, [r.as_tuple() for r in self.rows])


def trial_seeds(config: TrialConfig) -> List[List[int]]:
    """Per-simulation, per-site seeds; shared across the beta grid"""
    return [[derive_seed(config.seed, sim, site) for site in range(config.sites)] for sim in range(config.n_sims)]


def simulate_trial(config: TrialConfig, beta: float, sim: int) -> List[SiteData]:
    return [
        simulate_site(beta, config.n_per_site, derive_seed(config.seed, sim, site), config.sigma)
        for site in range(config.sites)
    ]


def trial_p_values(sites: Sequence[SiteData], methods: Sequence[str] = METHODS) -> Dict[str, float]:
    """Two-sided p-value for beta_treat = 0 under each method, on the same sites"""
    out = {}
    for method in methods:
        if method == "pooled":
            result = pooled_inference(sites)
        elif method == "meta":
            result = meta_analysis(sites)
        else:
            summary = aggregate_summaries([summarize_site(s, method) for s in sites])
            result = summary_inference(summary) if method == "full16" else compressed_inference(summary)
        out[method] = result.p_value
    return out


def power_curve(
    config: TrialConfig,
    workers: Optional[int] = None,
    progress_callback: Optional[Callable[[float, str], None]] = None,
) -> PowerCurve:
    """
    Monte-Carlo power of every method over the beta grid

    Every method sees the same simulated sites (paired design), and simulation
    seeds do not depend on beta. Results are merged by task index, so the
    curve is identical for any worker count.
    """
    config.validate()
    processor = BatchProcessor(max_workers=workers)
    if progress_callback:
        processor.set_progress_callback(progress_callback)
    n_sims = config.n_sims
    logger.info("🚀 Simulating %d trials x %d effect sizes", n_sims, len(config.beta_grid))

    def task(index: int) -> Dict[str, float]:
        beta = config.beta_grid[index // n_sims]
        return trial_p_values(simulate_trial(config, beta, index % n_sims), config.methods)

    values = processor.map(len(config.beta_grid) * n_sims, task)

    curve = PowerCurve()
    for b, beta in enumerate(config.beta_grid):
        block = values[b * n_sims:(b + 1) * n_sims]
        for method in config.methods:
            rejected = np.array([v[method] < config.alpha for v in block])
            k = int(rejected.sum())
            lo, hi = wilson_interval(k, n_sims)
            curve.rows.append(PowerRow(beta, method, k, n_sims, k / n_sims, lo, hi))
            curve.indicators[(beta, method)] = rejected
    logger.info("✅ Power curve complete")
    return curve


def trial_report(config: TrialConfig, curve: PowerCurve) -> Dict[str, object]:
    """JSON-ready report: config echo, derived seeds and the curve rows"""
    return {
        "config": asdict(config),
        "seeds": trial_seeds(config),
        "rows": [asdict(r) for r in curve.rows],
    }
