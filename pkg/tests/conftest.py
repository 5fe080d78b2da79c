"""Shared fixtures. The expensive session fixtures (default-scale corpus and
its experiment sweep) are built lazily, so unit-test-only runs stay fast."""

import logging

import numpy as np
import pytest

from adscreen.cohort import CohortConfig
from adscreen.corpus import CorpusConfig
from adscreen.harness import ExperimentConfig, generate_and_load, run_experiment
from adscreen.lexicon import default_lexicon
from adscreen.matcher import KeywordMatcher

logging.getLogger("adscreen").setLevel(logging.ERROR)

CORPUS_SEED = 7
EXPERIMENT_SEED = 3


@pytest.fixture(scope="session")
def lexicon():
    return default_lexicon()


@pytest.fixture(scope="session")
def matcher(lexicon):
    return KeywordMatcher(lexicon)


@pytest.fixture(scope="session")
def small_data(lexicon):
    """300 cases / 2700 controls: big enough for integration behavior,
    small enough to build in ~15 s."""
    cfg = CorpusConfig(n_cases=300, n_controls=2700)
    return cfg, generate_and_load(cfg, CORPUS_SEED, lexicon)


@pytest.fixture(scope="session")
def default_data(lexicon):
    """The full default corpus (2,000 cases / 18,000 controls), scanned.
    Takes ~2 minutes; shared by the acceptance criteria."""
    import time

    cfg = CorpusConfig()
    t0 = time.time()
    data = generate_and_load(cfg, CORPUS_SEED, lexicon)
    return cfg, data, time.time() - t0


@pytest.fixture(scope="session")
def default_sweep(default_data, lexicon):
    """LR clean-window sweep 0..10 on the default corpus."""
    import time

    cfg, data, _ = default_data
    exp = ExperimentConfig(clean_years=tuple(range(0, 11)), models=("lr",), seed=EXPERIMENT_SEED)
    t0 = time.time()
    result = run_experiment(exp, data, CohortConfig(), lexicon, study_start=cfg.study_start)
    return result, time.time() - t0


def rng(seed: int = 0) -> np.random.Generator:
    return np.random.default_rng(seed)
