import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gmech import build_grid, build_lattice


@pytest.fixture
def lat4():
    return build_lattice(build_grid(0.0, 1.0, 4))


@pytest.fixture
def lat8():
    return build_lattice(build_grid(0.0, 1.0, 8))


@pytest.fixture
def lat16():
    return build_lattice(build_grid(0.0, 1.0, 16))
