import numpy as np
import pytest

import spiralwave as sw


@pytest.fixture(scope="session")
def core_profile():
    return sw.solve_core_amplitude()


@pytest.fixture(scope="session")
def c1(core_profile):
    return core_profile.c1


@pytest.fixture(scope="session")
def square200():
    return sw.RectDomain(200.0, 200.0)


@pytest.fixture(scope="session")
def orbit_q45(square200, c1):
    """Periodic orbit of the composite law at q = 0.45 (shared: it is the
    most expensive single motion computation in the suite)."""
    cfg = sw.SpiralConfig((sw.Spiral(100.0, 100.0, 1),), 0.45, square200, c1)
    policy = sw.EpsilonPolicy("single_spiral_walls")
    return sw.find_periodic_orbit(cfg, "uniform", policy)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance-scale test")
