import numpy as np
import pytest

from riemblob.errors import UsageError
from riemblob.mesh import tangent_frames
from riemblob.synth import Gaussian, icosphere, planar_grid, plant_gaussians


@pytest.mark.parametrize("n, nv, nf", [(2, 4, 2), (3, 9, 8), (10, 100, 162)])
def test_planar_grid_counts(n, nv, nf):
    m = planar_grid(n, 1.0)
    assert (m.n_vertices, m.n_faces) == (nv, nf)
    assert np.allclose(np.abs(tangent_frames(m).normal[:, 2]), 1)


@pytest.mark.parametrize("bad", [1, 0, 2.5])
def test_planar_grid_domain(bad):
    with pytest.raises(UsageError):
        planar_grid(bad)


@pytest.mark.parametrize("subdiv", range(5))
def test_icosphere(subdiv):
    m = icosphere(subdiv, 2.5)
    assert m.n_vertices == 10 * 4**subdiv + 2
    assert m.is_closed
    assert m.n_vertices - len(m.edges) + m.n_faces == 2
    assert np.max(np.abs(np.linalg.norm(m.vertices, axis=1) - 2.5)) < 1e-12


def test_icosphere_base_counts():
    m = icosphere(0)
    assert (m.n_vertices, m.n_faces) == (12, 20)
    assert icosphere(1).n_vertices == 42


@pytest.mark.parametrize("bad", [-1, 8])
def test_icosphere_domain(bad):
    with pytest.raises(UsageError):
        icosphere(bad)


def test_empty_spec_is_zero(grid16):
    s = plant_gaussians(grid16, [])
    assert s.signal.shape == (grid16.n_vertices, 1) and not s.signal.any()


def test_value_at_center(grid16):
    c = grid16.vertices[100]
    s = plant_gaussians(grid16, [Gaussian(tuple(c), 0.2, 0, 3.0)])
    assert s.signal[100, 0] == pytest.approx(3.0)
    h = grid16.mean_edge_length
    nb = grid16.neighbors(100)
    assert np.all(s.signal[nb, 0] >= 3.0 * np.exp(-(2 * h * h) / (2 * 0.2**2)) - 1e-15)


def test_superposition_and_linearity(grid16):
    g1 = Gaussian((0.2, 0.3, 0.0), 0.1, 0, 1.0)
    g2 = Gaussian((0.7, 0.6, 0.0), 0.2, 0, -2.0)
    both = plant_gaussians(grid16, [g1, g2]).signal
    sep = plant_gaussians(grid16, [g1]).signal + plant_gaussians(grid16, [g2]).signal
    np.testing.assert_allclose(both, sep, rtol=0, atol=1e-15)
    g3 = Gaussian(g1.center, g1.sigma, 0, 5.0)
    np.testing.assert_allclose(plant_gaussians(grid16, [g3]).signal,
                               5 * plant_gaussians(grid16, [g1]).signal, rtol=1e-15)


def test_channels(grid16):
    s = plant_gaussians(grid16, [Gaussian((0.5, 0.5, 0), 0.1, 1, 1.0)])
    assert s.signal.shape[1] == 2 and not s.signal[:, 0].any()
    with pytest.raises(UsageError):
        plant_gaussians(grid16, [Gaussian((0.5, 0.5, 0), 0.1, 2, 1.0)], n_channels=2)
    with pytest.raises(UsageError):
        plant_gaussians(grid16, [Gaussian((0.5, 0.5, 0), 0.0)])


def test_ground_truth_json(grid16):
    s = plant_gaussians(grid16, [Gaussian((0.5, 0.5, 0), 0.1, 0, 2.0)])
    import json

    [d] = json.loads(s.ground_truth_json())
    assert Gaussian.from_dict(d) == Gaussian((0.5, 0.5, 0.0), 0.1, 0, 2.0)
