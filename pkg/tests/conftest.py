"""Shared fixtures: double precision and small toy corpora."""
import numpy as np
import pytest

from emodiff.autodiff.tensor import precision
from emodiff.data.toy import ToyCorpusSpec, generate_toy_corpus


@pytest.fixture
def f64():
    """Run the test body with float64 tensors."""
    with precision("f64"):
        yield


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def toy_spec():
    return ToyCorpusSpec(n_speakers=3, utterances_per_pair=6, n_mels=16, frames=64, seed=7)


@pytest.fixture(scope="session")
def toy_corpus(toy_spec):
    return generate_toy_corpus(toy_spec)


@pytest.fixture
def toy_segments(toy_corpus):
    return list(toy_corpus.segments)
