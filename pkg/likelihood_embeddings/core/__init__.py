"""Core functionality: families, embeddings, distortion metrics, learned embeddings, federated inference"""

from .embeddings import (
    CauchyQuantileDecoder,
    DatasetEmbedding,
    Decoder,
    Encoder,
    EncoderMode,
    GaussianAnalyticDecoder,
    MomentEncoder,
    PerSampleEncoder,
    QuantileEncoder,
    aggregate,
    cauchy_quantile_decoder,
    cauchy_quantile_encoder,
    gaussian_analytic_decoder,
    gaussian_moment_encoder,
    surrogate_log_likelihood,
)
from .errors import (
    BoundViolationError,
    ConfigError,
    DegenerateError,
    DomainError,
    LikelihoodEmbeddingError,
    NonFiniteLikelihoodError,
    ShapeError,
    TrainingDivergedError,
    WeightsFormatError,
)
from .federated import (
    PowerCurve,
    SiteData,
    SiteSummary,
    TrialConfig,
    aggregate_summaries,
    compressed_inference,
    meta_analysis,
    pooled_inference,
    power_curve,
    simulate_site,
    summarize_site,
    summary_inference,
    wilson_interval,
)
from .metrics import (
    DistortionReport,
    ThetaGrid,
    audit,
    check_pointwise_to_ratio,
    lrt_statistics,
    pointwise_error,
    ratio_distortion,
)
from .models import (
    CauchyFamily,
    Dataset,
    GaussianFamily,
    GaussianMixtureFamily,
    ModelFamily,
    ParamVector,
    log_likelihood,
    log_likelihood_grid,
    sample,
)
from .neural import (
    EncoderDecoderPair,
    MlpWeights,
    PairScaling,
    TrainConfig,
    TrainLog,
    calibrate_linear,
    fit_scaling,
    load_weights,
    save_weights,
    train,
)

__all__ = [
    "BoundViolationError",
    "CauchyFamily",
    "CauchyQuantileDecoder",
    "ConfigError",
    "Dataset",
    "DatasetEmbedding",
    "Decoder",
    "DegenerateError",
    "DistortionReport",
    "DomainError",
    "Encoder",
    "EncoderDecoderPair",
    "EncoderMode",
    "GaussianAnalyticDecoder",
    "GaussianFamily",
    "GaussianMixtureFamily",
    "LikelihoodEmbeddingError",
    "MlpWeights",
    "ModelFamily",
    "MomentEncoder",
    "NonFiniteLikelihoodError",
    "PairScaling",
    "ParamVector",
    "PerSampleEncoder",
    "PowerCurve",
    "QuantileEncoder",
    "ShapeError",
    "SiteData",
    "SiteSummary",
    "ThetaGrid",
    "TrainConfig",
    "TrainLog",
    "TrainingDivergedError",
    "TrialConfig",
    "WeightsFormatError",
    "aggregate",
    "aggregate_summaries",
    "audit",
    "calibrate_linear",
    "cauchy_quantile_decoder",
    "cauchy_quantile_encoder",
    "check_pointwise_to_ratio",
    "compressed_inference",
    "fit_scaling",
    "gaussian_analytic_decoder",
    "gaussian_moment_encoder",
    "load_weights",
    "log_likelihood",
    "log_likelihood_grid",
    "lrt_statistics",
    "meta_analysis",
    "pointwise_error",
    "pooled_inference",
    "power_curve",
    "ratio_distortion",
    "sample",
    "save_weights",
    "simulate_site",
    "summarize_site",
    "summary_inference",
    "surrogate_log_likelihood",
    "train",
    "wilson_interval",
]
