import time

import pytest

from mendasm.classify import GroundTruthClassifier
from mendasm.corpus import GenParams, generate_sample
from mendasm.pipeline import disassemble

ACCEPTANCE_SEEDS = list(range(20))
ACCEPTANCE_PARAMS = GenParams(block_count=50, junk_max=15, junk_prob=0.6,
                              bogus_jump_prob=0.5)


@pytest.fixture(scope="session")
def corpus20():
    return [generate_sample(seed, ACCEPTANCE_PARAMS)
            for seed in ACCEPTANCE_SEEDS]


@pytest.fixture(scope="session")
def oracle_runs(corpus20):
    """Oracle pipeline output for every corpus sample, plus total runtime."""
    runs = []
    started = time.perf_counter()
    for region, truth in corpus20:
        listing = disassemble(region,
                              GroundTruthClassifier(truth.instruction_starts))
        runs.append(listing)
    elapsed = time.perf_counter() - started
    return runs, elapsed
