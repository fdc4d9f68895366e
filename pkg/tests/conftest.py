"""Shared fixtures: a small, fast model/calibration bundle for unit tests.

Acceptance tests build the full default bundle themselves; everything else
uses these lightweight stand-ins so the suite stays quick.
"""

import pytest

from ghostkeys.corpus import prefix_corpus, random_like, synthetic_passwords
from ghostkeys.layout import default_layout
from ghostkeys.markov import MarkovModel
from ghostkeys.meter import calibrate


@pytest.fixture(scope="session")
def small_model():
    corpus = synthetic_passwords(200, seed=21)
    return MarkovModel.train(corpus, order=3, smoothing=0.01)


@pytest.fixture(scope="session")
def small_calibration(small_model):
    held_out = synthetic_passwords(50, seed=22)
    prefixes = prefix_corpus(held_out)
    return calibrate(small_model, prefixes, random_like(prefixes, seed=23))


@pytest.fixture(scope="session")
def layout():
    return default_layout()


@pytest.fixture(scope="session")
def bundle(small_model, small_calibration, layout):
    return small_model, small_calibration, layout
