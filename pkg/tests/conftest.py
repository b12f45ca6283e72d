import pytest

from aerialmarket.config import ScenarioConfig
from aerialmarket.scenario import build_scenario


@pytest.fixture(scope="session")
def default_config():
    return ScenarioConfig()


@pytest.fixture(scope="session")
def bertrand(default_config):
    return build_scenario(default_config, "bertrand")


@pytest.fixture(scope="session")
def cournot(default_config):
    return build_scenario(default_config, "cournot")
