from pathlib import Path

import pytest

from relcoef.partition import EventTable, dist_from_2x2
from relcoef.solver import SearchConfig


DATA = Path(__file__).parent / "data"


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture
def ab():
    return EventTable(["A", "B"])


@pytest.fixture
def abc():
    return EventTable(["A", "B", "C"])


@pytest.fixture
def skewed():
    "x, y, z, w = 0.4, 0.1, 0.2, 0.3"
    return dist_from_2x2(0.4, 0.1, 0.2, 0.3)


@pytest.fixture
def uniform():
    return dist_from_2x2(0.25, 0.25, 0.25, 0.25)


@pytest.fixture
def search():
    return SearchConfig(starts=16)
