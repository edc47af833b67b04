import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from faultbench import gridsim

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def grid118():
    return gridsim.build_topology(118, seed=1)


@pytest.fixture(scope="session")
def small_grid():
    return gridsim.build_topology(12, seed=3)


@pytest.fixture(scope="session")
def small_data(small_grid):
    """Tiny labelled dataset: 12 buses, 50 rows per class."""
    return gridsim.build_dataset(small_grid, 30.0, 1.0, seed=5, sample_rate_hz=2000)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def blobs(n_per, centers, scale=0.1, seed=0):
    """Isotropic Gaussian blobs; returns (X, y)."""
    r = np.random.default_rng(seed)
    centers = np.asarray(centers, dtype=float)
    X = np.vstack([c + scale * r.standard_normal((n_per, centers.shape[1])) for c in centers])
    y = np.repeat(np.arange(len(centers)), n_per)
    return X, y


def pytest_terminal_summary(terminalreporter):
    from .test_acceptance import RECORD
    if RECORD:
        terminalreporter.section("acceptance criteria")
        for line in RECORD:
            terminalreporter.write_line(line)
