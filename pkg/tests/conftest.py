import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from secseg.harness import ARCHETYPES, TRAINED, training_samples
from secseg.learn import learn_model

settings.register_profile("default", max_examples=150, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=1000, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def build_library(samples_per_class=3, seed=0):
    by_label = {}
    for k, name in enumerate(TRAINED):
        by_label.setdefault(ARCHETYPES[name].label, []).extend(
            training_samples(name, samples_per_class, seed=seed * 100 + k))
    return [learn_model(label, samples) for label, samples in by_label.items()]


@pytest.fixture(scope="session")
def library():
    return build_library()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
