import pytest

from driftham import central_field as cf
from driftham.geometry import close_distribution, halton_points


@pytest.fixture(scope="session")
def cf_params():
    return cf.CentralFieldParams()


@pytest.fixture(scope="session")
def cf_system(cf_params):
    return cf.build(cf_params)


@pytest.fixture(scope="session")
def cf_closure(cf_system):
    return cf_system.closure


@pytest.fixture(scope="session")
def cf_control(cf_system):
    return cf_system.system


@pytest.fixture(scope="session")
def cf_samples():
    return halton_points(cf.DEFAULT_BOX, 32)
