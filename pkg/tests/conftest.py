import numpy as np
import pytest

from nonlocal_ok.kernel import make_kernel
from nonlocal_ok.spectral import GridSpec
from nonlocal_ok.symbols import build_table, local_table


@pytest.fixture(scope="session")
def grid1d():
    return GridSpec(1, 64)


@pytest.fixture(scope="session")
def grid2d():
    return GridSpec(2, 32)


@pytest.fixture(scope="session")
def table1d(grid1d):
    return build_table(make_kernel("power", 0.5, 1, 0.0), grid1d)


@pytest.fixture(scope="session")
def table2d(grid2d):
    return build_table(make_kernel("power", 0.5, 2, 1.5), grid2d)


@pytest.fixture(scope="session")
def local2d(grid2d):
    return local_table(grid2d)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
