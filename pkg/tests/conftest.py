"""Shared fixtures and helpers"""

import numpy as np
import pytest

from likelihood_embeddings.config import reset_settings
from likelihood_embeddings.core.embeddings import Decoder, DatasetEmbedding
from likelihood_embeddings.core.models import CauchyFamily, GaussianFamily, sample
from likelihood_embeddings.core.metrics import ThetaGrid


class ShiftedDecoder(Decoder):
    """Wraps a decoder and adds a constant to its output"""

    name = "shifted"

    def __init__(self, base: Decoder, shift: float):
        self.base = base
        self.shift = shift

    def evaluate(self, thetas: np.ndarray, embedding: DatasetEmbedding) -> np.ndarray:
        return self.base.evaluate(thetas, embedding) + self.shift


class ConstantDecoder(Decoder):
    """Returns the same value for every theta"""

    name = "constant"

    def __init__(self, value: float):
        self.value = value

    def evaluate(self, thetas: np.ndarray, embedding: DatasetEmbedding) -> np.ndarray:
        return np.full(np.atleast_2d(thetas).shape[0], self.value)


@pytest.fixture(autouse=True)
def fresh_settings(monkeypatch, tmp_path):
    monkeypatch.setenv("LIKELIHOOD_EMBED_OUTPUT_DIR", str(tmp_path / "results"))
    reset_settings()
    yield
    reset_settings()


@pytest.fixture
def gaussian():
    return GaussianFamily()


@pytest.fixture
def cauchy():
    return CauchyFamily()


@pytest.fixture
def gaussian_grid(gaussian):
    return ThetaGrid.regular(gaussian, (11, 11))


@pytest.fixture
def cauchy_grid(cauchy):
    return ThetaGrid.regular(cauchy, (41,))


@pytest.fixture
def gaussian_data(gaussian):
    return sample(gaussian, (0.3, 1.1), 100, seed=11)


@pytest.fixture
def cauchy_data(cauchy):
    return sample(cauchy, (0.5,), 100, seed=12)
