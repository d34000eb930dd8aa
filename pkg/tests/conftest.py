import numpy as np
import pytest

from adaptive_ilg import model
from adaptive_ilg.mesh import make_lshape_initial, refine


@pytest.fixture(scope="session")
def mesh0():
    return make_lshape_initial()


@pytest.fixture(scope="session")
def mesh1(mesh0):
    return refine(mesh0, np.arange(mesh0.n_elements))


@pytest.fixture(scope="session")
def smooth():
    return model.smooth_problem()


@pytest.fixture(scope="session")
def singular():
    return model.singular_problem()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
