import numpy as np
import pytest

from surgcurate import EmbeddingMatrix
from surgcurate.synthetic import make_blobs, make_fixture_corpus


@pytest.fixture(scope="session")
def four_blobs():
    """Skewed 4-blob fixture (40/40/40/280) used by curation tests."""
    data, labels = make_blobs([40, 40, 40, 280], dim=8, seed=7)
    ids = [f"clip{i:04d}" for i in range(len(data))]
    return EmbeddingMatrix(data, ids), labels


@pytest.fixture(scope="session")
def fixture_corpus():
    return make_fixture_corpus()


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
