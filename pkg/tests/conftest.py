from pathlib import Path

import numpy as np
import pytest

from src.services import catalog
from src.services.algebra_core import carnot_structure

ALGEBRAS_DIR = Path(__file__).resolve().parent.parent / "algebras"


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture(scope="session")
def algebras_dir() -> Path:
    return ALGEBRAS_DIR


@pytest.fixture(scope="session")
def h1():
    return carnot_structure(catalog.heisenberg(1))


@pytest.fixture(scope="session")
def h2():
    return carnot_structure(catalog.heisenberg(2))


@pytest.fixture(scope="session")
def sussmann():
    return carnot_structure(catalog.sussmann())


@pytest.fixture(scope="session")
def engel():
    return carnot_structure(catalog.engel())


@pytest.fixture(scope="session")
def free3():
    return carnot_structure(catalog.free_step2(3))
