"""Shared fixtures: the seeded standard suite and a trained detector.

Everything heavy is session-scoped; the acceptance module and several
integration tests reuse the same suite, detector and comparison report.
"""

import time

import pytest

from ocsvmids import evaluate, pipeline, simgen
from ocsvmids.ingest import parse_packet_log

SUITE_SEED = 42


@pytest.fixture(scope="session")
def suite_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("suite")
    simgen.standard_suite(SUITE_SEED, out)
    return out


@pytest.fixture(scope="session")
def train_records(suite_dir):
    return parse_packet_log(suite_dir / "train.csv")


@pytest.fixture(scope="session")
def detector(train_records):
    return pipeline.train_detector(train_records, pipeline.DetectorConfig())


@pytest.fixture(scope="session")
def comparison(suite_dir, detector):
    """Baseline-vs-pipeline report over the full suite, with its wall time."""
    start = time.perf_counter()
    report = evaluate.compare_baseline(suite_dir, detector)
    return report, time.perf_counter() - start


@pytest.fixture(scope="session")
def scenarios():
    return simgen.standard_scenarios(SUITE_SEED)
