import pytest

import barenheat as bh


@pytest.fixture(scope="session")
def ops65():
    """1D unit-interval mesh with 65 nodes, the standard test mesh."""
    return bh.build_operators(1, 64, 1.0)


@pytest.fixture(scope="session")
def ops_small():
    """Cheap 1D mesh for statistics-heavy tests."""
    return bh.build_operators(1, 8, 1.0)


@pytest.fixture(scope="session")
def unit_nl():
    return bh.linear(1.0)


@pytest.fixture(scope="session")
def cos_field(ops65):
    return bh.evaluate_on_mesh("cos(pi*x)", ops65)
