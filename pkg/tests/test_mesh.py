import numpy as np
import pytest
from scipy.spatial import Delaunay

from riemblob.errors import ParseError, TopologyError
from riemblob.mesh import (
    TriMesh,
    cotangent_laplacian,
    load_mesh,
    load_signal,
    read_mesh,
    tangent_frame,
    tangent_frames,
    write_off,
    write_ply,
    write_signal,
)
from riemblob.synth import icosphere, planar_grid

from .conftest import corpus

CORPUS = list(corpus())
IDS = [name for name, _ in CORPUS]
MESHES = [m for _, m in CORPUS]

TETRA_OFF = """OFF
4 4 6
0 0 0
1 0 0
0 1 0
0 0 1
3 0 2 1
3 0 1 3
3 0 3 2
3 1 2 3
"""


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_tetrahedron(tmp_path):
    m = load_mesh(_write(tmp_path, "t.off", TETRA_OFF))
    assert m.n_vertices == 4 and m.n_faces == 4
    assert all(len(m.neighbors(v)) == 3 for v in range(4))
    assert m.is_closed


def test_off_header_with_counts_and_comments(tmp_path):
    text = "OFF 4 4 6\n# a comment\n" + TETRA_OFF.split("\n", 2)[2]
    assert load_mesh(_write(tmp_path, "t.off", text)).n_faces == 4


def test_repeated_vertex_names_face(tmp_path):
    text = "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 0 1\n"
    with pytest.raises(TopologyError, match="face 0"):
        load_mesh(_write(tmp_path, "bad.off", text))


def test_out_of_range_index(tmp_path):
    text = "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 7\n"
    with pytest.raises(TopologyError, match="face 0.*out of range"):
        load_mesh(_write(tmp_path, "bad.off", text))


def test_non_manifold_edge():
    v = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1]]
    f = [[0, 1, 2], [1, 0, 3], [0, 1, 4]]
    with pytest.raises(TopologyError, match=r"edge \(0, 1\)"):
        TriMesh(v, f)


def test_degenerate_face():
    v = [[0, 0, 0], [1, 0, 0], [2, 0, 0], [0, 1, 0]]
    with pytest.raises(TopologyError, match="face 0 is degenerate"):
        TriMesh(v, [[0, 1, 2], [0, 1, 3]])


@pytest.mark.parametrize(
    "text",
    ["", "PLY\n", "OFF\n3 1\n0 0 0\n1 0 0\n", "OFF\n3 1\n0 0 0\n1 0 0\n0 1 0\n4 0 1 2 2\n",
     "OFF\nx y\n"],
)
def test_malformed_off(tmp_path, text):
    with pytest.raises(ParseError):
        load_mesh(_write(tmp_path, "bad.off", text))


def test_missing_file(tmp_path):
    with pytest.raises(ParseError, match="no such file"):
        load_mesh(tmp_path / "nope.off")


def test_icosphere_round_trip(tmp_path):
    m = icosphere(2)
    p = tmp_path / "ico.off"
    write_off(p, m)
    back = load_mesh(p)
    assert back.is_closed
    np.testing.assert_array_equal(back.vertices, m.vertices)
    np.testing.assert_array_equal(back.faces, m.faces)
    counts = {}
    for f in back.faces:
        for a, b in ((f[0], f[1]), (f[1], f[2]), (f[2], f[0])):
            key = (min(a, b), max(a, b))
            counts[key] = counts.get(key, 0) + 1
    assert set(counts.values()) == {2}


@pytest.mark.parametrize("mesh", MESHES, ids=IDS)
def test_ply_round_trip_with_channels(tmp_path, mesh, rng):
    sig = rng.normal(size=(mesh.n_vertices, 3))
    p = tmp_path / "m.ply"
    write_ply(p, mesh, sig)
    back, ch = read_mesh(p)
    np.testing.assert_array_equal(back.vertices, mesh.vertices)
    np.testing.assert_array_equal(back.faces, mesh.faces)
    np.testing.assert_array_equal(ch, sig)


def test_ply_without_channels(tmp_path, grid16):
    p = tmp_path / "m.ply"
    write_ply(p, grid16)
    back, ch = read_mesh(p)
    assert ch is None and back.n_vertices == grid16.n_vertices


def test_binary_ply_rejected(tmp_path):
    p = _write(tmp_path, "b.ply", "ply\nformat binary_little_endian 1.0\nend_header\n")
    with pytest.raises(ParseError, match="ASCII"):
        read_mesh(p)


def test_signal_csv_round_trip(tmp_path, rng):
    sig = rng.normal(size=(10, 2))
    p = tmp_path / "s.csv"
    write_signal(p, sig)
    assert p.read_text().splitlines()[0] == "vertex,ch0,ch1"
    np.testing.assert_array_equal(load_signal(p, 10), sig)


def test_signal_csv_row_count_mismatch(tmp_path):
    p = tmp_path / "s.csv"
    write_signal(p, np.zeros(5))
    with pytest.raises(ParseError, match="5 rows for 6 vertices"):
        load_signal(p, 6)


# -- tangent frames --------------------------------------------------------


def test_planar_frame_normal(grid16):
    for v in range(grid16.n_vertices):
        n = tangent_frame(grid16, v).normal
        assert abs(abs(n[2]) - 1) < 1e-12 and abs(n[0]) < 1e-12 and abs(n[1]) < 1e-12


def test_sphere_normals_are_radial():
    m = icosphere(3)
    fr = tangent_frames(m)
    assert np.min(np.abs(np.sum(fr.normal * m.vertices, axis=1))) > 0.99
    # outward orientation
    assert np.all(np.sum(fr.normal * m.vertices, axis=1) > 0)


@pytest.mark.parametrize("mesh", MESHES, ids=IDS)
def test_frames_orthonormal_right_handed(mesh):
    fr = tangent_frames(mesh)
    for a in (fr.e1, fr.e2, fr.normal):
        assert np.max(np.abs(np.linalg.norm(a, axis=1) - 1)) < 1e-12
    for a, b in ((fr.e1, fr.e2), (fr.e1, fr.normal), (fr.e2, fr.normal)):
        assert np.max(np.abs(np.sum(a * b, axis=1))) < 1e-12
    np.testing.assert_allclose(np.cross(fr.e1, fr.e2), fr.normal, atol=1e-12)


@pytest.mark.parametrize("mesh", MESHES, ids=IDS)
def test_single_frame_matches_field(mesh):
    fr = tangent_frames(mesh)
    for v in (0, mesh.n_vertices // 2, mesh.n_vertices - 1):
        one = tangent_frame(mesh, v)
        np.testing.assert_allclose(one.normal, fr.normal[v], atol=1e-15)
        np.testing.assert_allclose(one.e1, fr.e1[v], atol=1e-15)


def test_isolated_vertex():
    m = TriMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0], [5, 5, 5]], [[0, 1, 2]])
    with pytest.raises(TopologyError, match="vertex 3"):
        tangent_frame(m, 3)


# -- Laplacian -------------------------------------------------------------


@pytest.mark.parametrize("mesh", MESHES, ids=IDS)
def test_laplacian_invariants(mesh):
    op = cotangent_laplacian(mesh)
    S = op.stiffness
    assert abs(S - S.T).max() <= 1e-10 * abs(S).max()
    np.testing.assert_allclose(np.asarray(S.sum(axis=1)).ravel(), 0, atol=1e-10)
    assert np.all(op.mass_diagonal > 0)
    assert op.mass_diagonal.sum() == pytest.approx(mesh.face_areas.sum(), rel=1e-12)


def test_constant_in_kernel(grid16):
    op = cotangent_laplacian(grid16)
    np.testing.assert_allclose(op.stiffness @ np.ones(grid16.n_vertices), 0, atol=1e-10)


def test_equilateral_pair_weight():
    # unit-area equilateral triangles sharing edge (0, 1)
    s = np.sqrt(4 / np.sqrt(3))
    h = s * np.sqrt(3) / 2
    v = [[0, 0, 0], [s, 0, 0], [s / 2, h, 0], [s / 2, -h, 0]]
    m = TriMesh(v, [[0, 1, 2], [1, 0, 3]])
    assert m.face_areas == pytest.approx([1.0, 1.0], rel=1e-12)
    S = cotangent_laplacian(m).stiffness.toarray()
    # oracle: opposite angles from arccos, cot = 1/tan
    angles = []
    for o in (2, 3):
        a = np.array(v[0]) - v[o]
        b = np.array(v[1]) - v[o]
        angles.append(np.arccos(a @ b / np.linalg.norm(a) / np.linalg.norm(b)))
    expected = -sum(1 / np.tan(x) for x in angles) / 2
    assert expected == pytest.approx(-1 / np.sqrt(3), rel=1e-12)
    assert S[0, 1] == pytest.approx(expected, rel=1e-12)
    assert S[2, 3] == 0


def test_mass_is_one_third_incident_area():
    m = planar_grid(3, 2.0)  # 8 right triangles of area 0.5
    M = cotangent_laplacian(m).mass_diagonal
    for v in range(m.n_vertices):
        assert M[v] == pytest.approx(len(m.vertex_faces(v)) * 0.5 / 3)


@pytest.mark.parametrize("n_points", [100, 400, 1600])
def test_linear_functions_harmonic_in_plane(n_points):
    rng = np.random.default_rng(n_points)
    pts = rng.uniform(0, 1, (n_points, 2))
    m = TriMesh(np.column_stack([pts, np.zeros(n_points)]), Delaunay(pts).simplices)
    op = cotangent_laplacian(m)
    lap = op.apply(3 * pts[:, 0] - 2 * pts[:, 1])
    interior = ~m.boundary_mask
    assert np.max(np.abs(lap[interior])) < 1e-8


def test_boundary_and_ring_distance():
    m = planar_grid(7, 1.0)
    d = m.ring_distance_to_boundary().reshape(7, 7)
    assert d[0].max() == 0 and d[3, 3] == 3 and d[1, 1] == 1
    assert np.all(np.isinf(icosphere(1).ring_distance_to_boundary()))
