"""
Likelihood Embeddings
Auditing how well fixed-size dataset embeddings preserve likelihoods, likelihood
ratios and the inferences built on them
"""

__version__ = "1.0.0"
__author__ = "Likelihood Embeddings Team"

from .cli.app import launch_app
from .core import audit, sample

__all__ = [
    "audit",
    "launch_app",
    "sample",
]
