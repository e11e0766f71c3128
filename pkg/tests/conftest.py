import numpy as np
import pytest

from palsy.dataset_io import generate_synthetic_cohort
from palsy.features import to_landmarks_view, to_metrics_view, to_no_chin_view
from palsy.preprocess import run_pipeline


@pytest.fixture(scope="session")
def cohort():
    return generate_synthetic_cohort(50, 20, 30, seed=42)


@pytest.fixture(scope="session")
def processed(cohort):
    samples, report = run_pipeline(cohort)
    assert not report.excluded
    return samples


@pytest.fixture(scope="session")
def landmarks_view(processed):
    return to_landmarks_view(processed)


@pytest.fixture(scope="session")
def nochin_view(processed):
    return to_no_chin_view(processed)


@pytest.fixture(scope="session")
def metrics_view(processed):
    return to_metrics_view(processed)


@pytest.fixture(scope="session")
def small_cohort():
    return generate_synthetic_cohort(12, 6, 8, seed=3)


@pytest.fixture(scope="session")
def small_view(small_cohort):
    samples, _ = run_pipeline(small_cohort)
    return to_landmarks_view(samples)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
