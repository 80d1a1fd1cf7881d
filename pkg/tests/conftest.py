import pytest

from redsim.scenario import builtin_killchain_scenario


@pytest.fixture(scope="session")
def builtin():
    return builtin_killchain_scenario()
