import pytest

from geoflow.providers import FixtureProvider
from geoflow.resources import DATA_DIR, default_registry, default_table
from geoflow.templates import load_library


@pytest.fixture(scope="session")
def registry():
    return default_registry()


@pytest.fixture(scope="session")
def table():
    return default_table()


@pytest.fixture(scope="session")
def fixtures_dir():
    return DATA_DIR / "fixtures"


@pytest.fixture(scope="session")
def provider(fixtures_dir):
    return FixtureProvider(fixtures_dir)


@pytest.fixture(scope="session")
def library():
    return load_library(DATA_DIR / "templates")


@pytest.fixture(scope="session")
def workflows():
    return DATA_DIR / "workflows"
