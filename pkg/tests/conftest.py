import pytest

from helpers import EX1_BOX
from parakmu import families, verify


@pytest.fixture(scope="session")
def ex1():
    return families.example_preset()


@pytest.fixture(scope="session")
def synthetic():
    return families.synthetic_h3(1.5)


@pytest.fixture
def lattice5():
    return verify.SampleGrid(EX1_BOX, "lattice", (5, 5, 5))
