import numpy as np
import pytest

from llgorbit.demag import build_kernel
from llgorbit.energy import ExternalFieldSpec, SimParams
from llgorbit.grid import ShapeSpec, build_grid
from llgorbit.minimize import minimize

PROLATE = ShapeSpec("ellipsoid", (2.0, 1.0, 1.0))
SPHERE = ShapeSpec("ellipsoid", (1.0, 1.0, 1.0))
ROTATING = ExternalFieldSpec("uniform_rotating", (0.0, 1.0, 0.0), (0.0, 0.0, 1.0), 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20261019)


def _setup(shape, res):
    g = build_grid(shape, res)
    return g, build_kernel(g)


@pytest.fixture(scope="session")
def prolate8():
    return _setup(PROLATE, 8)


@pytest.fixture(scope="session")
def prolate5():
    return _setup(PROLATE, 5)


@pytest.fixture(scope="session")
def sphere8():
    return _setup(SPHERE, 8)


@pytest.fixture(scope="session")
def cube4():
    return _setup(ShapeSpec("cuboid"), 4)


@pytest.fixture(scope="session")
def m_eta8(prolate8):
    """Converged minimizer on the 8^3 prolate spheroid at eta = 0.1."""
    g, k = prolate8
    res = minimize(SimParams(0.1), g, k)
    assert res.converged
    return res.m


@pytest.fixture(scope="session")
def m_eta5(prolate5):
    g, k = prolate5
    res = minimize(SimParams(0.1), g, k)
    assert res.converged
    return res.m


ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
