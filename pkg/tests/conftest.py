import numpy as np
import pytest

from riemblob.synth import icosphere, planar_grid

ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def grid16():
    return planar_grid(16, 1.0)


@pytest.fixture(scope="session")
def sphere3():
    return icosphere(3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def corpus():
    """Meshes every invariant is checked on."""
    from scipy.spatial import Delaunay

    from riemblob.mesh import TriMesh

    pts = np.random.default_rng(7).uniform(0, 1, (120, 2))
    tri = Delaunay(pts)
    yield "plane8", planar_grid(8, 2.0)
    yield "plane20", planar_grid(20, 1.0)
    yield "ico0", icosphere(0)
    yield "ico2", icosphere(2, 3.0)
    yield "delaunay", TriMesh(np.column_stack([pts, np.zeros(len(pts))]), tri.simplices)
