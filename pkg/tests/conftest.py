import numpy as np
import pytest

from radlimit.angular import build_quadrature
from radlimit.mesh import PeriodicGrid


@pytest.fixture(scope="session")
def quad():
    return build_quadrature("octahedral-symmetric", 7)


@pytest.fixture
def grid1d():
    return PeriodicGrid(1, 32)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q
