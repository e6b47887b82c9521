import pytest

from gstlab.verify import _solution


@pytest.fixture(scope="session")
def ou_solution():
    return _solution("ou1-small")


@pytest.fixture(scope="session")
def ou_solution_fine():
    return _solution("ou1")


@pytest.fixture(scope="session")
def well_solution():
    return _solution("well")


@pytest.fixture(scope="session")
def stable_solution():
    return _solution("stable-small")
