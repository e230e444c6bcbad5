import pytest

from qfa import topology, penalty


@pytest.fixture(scope="session")
def pegasus8():
    return topology.build_pegasus(8)


@pytest.fixture(scope="session")
def pegasus16():
    return topology.build_pegasus(16)


@pytest.fixture(scope="session")
def tile(pegasus8):
    return topology.place_tiles(pegasus8, 1, 1, layout="multiplier")[0][0]


@pytest.fixture(scope="session")
def library(tile):
    return penalty.build_specialized_library(tile)


@pytest.fixture(scope="session")
def base_pf(library):
    return library[penalty.fixing_key({})]
