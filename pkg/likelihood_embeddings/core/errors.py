"""Exception hierarchy for the likelihood embedding toolkit"""

from typing import Any, Optional


class LikelihoodEmbeddingError(Exception):
    """Base class for every error raised by the toolkit"""


class DomainError(LikelihoodEmbeddingError, ValueError):
    """Parameter outside its admissible domain (e.g. sigma below the floor)"""


class ShapeError(LikelihoodEmbeddingError, ValueError):
    """Array dimensions do not match what the operation expects"""


class DegenerateError(LikelihoodEmbeddingError, ValueError):
    """Input has no usable variation (zero variance, singular matrix, n too small)"""


class NonFiniteLikelihoodError(LikelihoodEmbeddingError, ArithmeticError):
    """A likelihood or decoder value on the grid is NaN or infinite"""

    def __init__(self, message: str, theta: Optional[Any] = None):
        super().__init__(message)
        self.theta = theta


class TrainingDivergedError(LikelihoodEmbeddingError, RuntimeError):
    """Training loss became NaN or infinite"""

    def __init__(self, message: str, iteration: int, log: Optional[Any] = None):
        super().__init__(message)
        self.iteration = iteration
        self.log = log


class WeightsFormatError(LikelihoodEmbeddingError, ValueError):
    """Weights file is malformed"""

    def __init__(self, message: str, layer_index: Optional[int] = None):
        if layer_index is not None:
            message = f"layer {layer_index}: {message}"
        super().__init__(message)
        self.layer_index = layer_index


class ConfigError(LikelihoodEmbeddingError, ValueError):
    """Experiment configuration is invalid"""


class BoundViolationError(LikelihoodEmbeddingError, AssertionError):
    """A distortion-cascade bound failed on a computed report"""
