import numpy as np
import pytest

from moyalqft.symplectic import Metric, SymplecticStructure, random_adapted_pair, standard_structures


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def std2():
    return standard_structures(2)


@pytest.fixture
def std4():
    return standard_structures(4)


@pytest.fixture
def diag41():
    """``G = diag(4, 1)`` with the adapted ``Sigma = G^{1/2} Sigma_st G^{1/2}``."""
    g = Metric(np.diag([4.0, 1.0]))
    _, st = standard_structures(2)
    return g, SymplecticStructure(g.g_sqrt @ st.sigma @ g.g_sqrt)


def adapted_pairs(dims, seeds):
    return [random_adapted_pair(d, s) for d in dims for s in seeds]
