import pytest

from subgauss.distributions import get_builtin
from subgauss.distributions.distributions import GridParams
from subgauss.tilt import build_profile


@pytest.fixture(scope="session")
def grid():
    return GridParams()


@pytest.fixture(scope="session")
def normal():
    return get_builtin("normal")


@pytest.fixture(scope="session")
def uniform():
    return get_builtin("uniform")


@pytest.fixture(scope="session")
def sin4():
    return get_builtin("sin4")


@pytest.fixture(scope="session")
def root_pi6():
    return get_builtin("sin4_root_pi6")


@pytest.fixture(scope="session")
def uniform_profile(uniform):
    return build_profile(uniform)


@pytest.fixture(scope="session")
def sin4_profile(sin4):
    return build_profile(sin4)
