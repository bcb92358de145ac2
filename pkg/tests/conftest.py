import pytest

import planrec as pr
from planrec import fixtures


@pytest.fixture(scope="session")
def fig6():
    return pr.load_library(str(fixtures.path("fig6")))


@pytest.fixture(scope="session")
def station():
    return pr.load_library(str(fixtures.path("station")))
