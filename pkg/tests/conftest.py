from pathlib import Path

import pytest

from virialkit.inversion import GCState
from virialkit.species import load_model


FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def pair_potential():
    return load_model(FIXTURES / "species_pair.json", mode="rational")


@pytest.fixture(scope="session")
def pair_state(pair_potential):
    return GCState(pair_potential, 3)


@pytest.fixture(scope="session")
def hardcore_potential():
    return load_model(FIXTURES / "species_hardcore3.json", mode="rational")


@pytest.fixture(scope="session")
def hardcore_state(hardcore_potential):
    return GCState(hardcore_potential, 3)
