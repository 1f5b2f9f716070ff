import numpy as np
import pytest

from encdiff.he import CkksBackend, HeParams, MockBackend


@pytest.fixture(scope="session")
def small_params():
    return HeParams.create(ring_degree=1024)


@pytest.fixture(scope="session")
def small_backend(small_params):
    return CkksBackend(small_params)


@pytest.fixture(scope="session")
def small_keys(small_backend):
    return small_backend.keygen(1)


@pytest.fixture(scope="session")
def default_params():
    return HeParams()


@pytest.fixture(scope="session")
def default_backend(default_params):
    return CkksBackend(default_params)


@pytest.fixture(scope="session")
def default_keys(default_backend):
    return default_backend.keygen(1)


@pytest.fixture(scope="session")
def mock_backend(small_params):
    return MockBackend(small_params)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
