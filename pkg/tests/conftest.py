import pytest

from sewcells.catalog import (
    flat_cosymplectic_cell,
    halfspace_kenmotsu_cell,
    kenmotsu_warped_cell,
    model_cosymplectic_cell,
    standard_cells,
)


@pytest.fixture(scope="session")
def flat_cell():
    return flat_cosymplectic_cell()


@pytest.fixture(scope="session")
def model_cell():
    return model_cosymplectic_cell(1.0)


@pytest.fixture(scope="session")
def kenmotsu_cell():
    return kenmotsu_warped_cell(alpha=1.0, kappa0=-2.0)


@pytest.fixture(scope="session")
def halfspace_cell():
    return halfspace_kenmotsu_cell()


@pytest.fixture(scope="session")
def catalog_cells():
    return standard_cells()
