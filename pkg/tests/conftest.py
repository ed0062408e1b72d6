import numpy as np
import pytest

from stockbound import GaussianModel


@pytest.fixture
def experiment_model() -> GaussianModel:
    """The symmetric correlated pair used throughout the comparison runs."""
    return GaussianModel.bivariate(1.0, 1.0, 0.9)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240815)
