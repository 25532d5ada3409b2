"""Triangle meshes: validation, adjacency, tangent frames and the cotangent Laplacian.

File formats handled here are OFF, ASCII PLY (optionally carrying signal
channels ``ch0..ch{m-1}`` as vertex properties) and the sidecar signal CSV
``vertex,ch0,...``.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import sparse

from .errors import NumericError, ParseError, TopologyError

logger = logging.getLogger(__name__)

COT_CLAMP = 1e6
DEGENERATE_AREA_FACTOR = 1e-12


class TriMesh:
    """Immutable triangulated 2-manifold, possibly with boundary.

    Parameters
    ----------
    vertices : array_like, shape (V, 3)
        Vertex positions.
    faces : array_like, shape (F, 3)
        Vertex index triples.

    Raises
    ------
    TopologyError
        If an index is out of range, a face repeats a vertex, an edge is
        shared by more than two faces, or a face has (near-)zero area.
    """

    def __init__(self, vertices, faces):
        v = np.array(vertices, dtype=np.float64)
        f = np.array(faces, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3 or v.shape[0] == 0:
            raise TopologyError("vertices must be a non-empty (V, 3) array")
        if f.ndim != 2 or f.shape[1] != 3 or f.shape[0] == 0:
            raise TopologyError("faces must be a non-empty (F, 3) array")
        if not np.all(np.isfinite(v)):
            raise TopologyError("vertex coordinates must be finite")
        nv = v.shape[0]

        bad = np.flatnonzero(np.any((f < 0) | (f >= nv), axis=1))
        if bad.size:
            raise TopologyError(f"face {bad[0]} has an index out of range [0, {nv})")
        bad = np.flatnonzero(
            (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])
        )
        if bad.size:
            raise TopologyError(f"face {bad[0]} repeats a vertex")

        half = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        und = np.sort(half, axis=1)
        edges, counts = np.unique(und, axis=0, return_counts=True)
        over = np.flatnonzero(counts > 2)
        if over.size:
            a, b = edges[over[0]]
            raise TopologyError(
                f"edge ({a}, {b}) is shared by {counts[over[0]]} faces (non-manifold)"
            )

        self._v = v
        self._f = f
        self._v.flags.writeable = False
        self._f.flags.writeable = False
        self._edges = edges
        self._edge_face_count = counts

        diag = self.bbox_diagonal
        areas = self.face_areas
        tol = DEGENERATE_AREA_FACTOR * diag * diag
        bad = np.flatnonzero(areas <= tol)
        if bad.size:
            raise TopologyError(f"face {bad[0]} is degenerate (area {areas[bad[0]]:.3g})")

    # -- basic accessors -------------------------------------------------

    @property
    def vertices(self) -> np.ndarray:
        return self._v

    @property
    def faces(self) -> np.ndarray:
        return self._f

    @property
    def n_vertices(self) -> int:
        return self._v.shape[0]

    @property
    def n_faces(self) -> int:
        return self._f.shape[0]

    @property
    def edges(self) -> np.ndarray:
        """Unique undirected edges as sorted index pairs, shape (E, 2)."""
        return self._edges

    def __repr__(self):
        return f"TriMesh(V={self.n_vertices}, F={self.n_faces}, closed={self.is_closed})"

    # -- derived geometry ------------------------------------------------

    @cached_property
    def bbox_diagonal(self) -> float:
        return float(np.linalg.norm(self._v.max(axis=0) - self._v.min(axis=0)))

    @cached_property
    def face_normals_raw(self) -> np.ndarray:
        """Unnormalized face normals (cross products, norm = 2 * area)."""
        p0, p1, p2 = (self._v[self._f[:, k]] for k in range(3))
        return np.cross(p1 - p0, p2 - p0)

    @cached_property
    def face_areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self.face_normals_raw, axis=1)

    @cached_property
    def mean_edge_length(self) -> float:
        e = self._edges
        return float(np.linalg.norm(self._v[e[:, 0]] - self._v[e[:, 1]], axis=1).mean())

    @property
    def is_closed(self) -> bool:
        return bool(np.all(self._edge_face_count == 2))

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        """Boolean mask of vertices lying on a boundary edge."""
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self._edges[self._edge_face_count == 1].ravel()] = True
        return mask

    @cached_property
    def adjacency(self) -> sparse.csr_matrix:
        """Symmetric 0/1 vertex adjacency in CSR form (sorted column indices)."""
        e = self._edges
        n = self.n_vertices
        data = np.ones(2 * len(e))
        a = sparse.csr_matrix(
            (data, (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])), shape=(n, n)
        )
        a.sort_indices()
        return a

    def neighbors(self, v: int) -> np.ndarray:
        a = self.adjacency
        return a.indices[a.indptr[v] : a.indptr[v + 1]]

    @cached_property
    def _vertex_faces_csr(self) -> sparse.csr_matrix:
        nf = self.n_faces
        rows = self._f.ravel()
        cols = np.repeat(np.arange(nf), 3)
        m = sparse.csr_matrix(
            (np.ones(3 * nf), (rows, cols)), shape=(self.n_vertices, nf)
        )
        m.sort_indices()
        return m

    def vertex_faces(self, v: int) -> np.ndarray:
        m = self._vertex_faces_csr
        return m.indices[m.indptr[v] : m.indptr[v + 1]]

    def ring_distance_to_boundary(self) -> np.ndarray:
        """Graph distance (in edges) from each vertex to the nearest boundary vertex.

        Closed meshes get ``inf`` everywhere.
        """
        dist = np.full(self.n_vertices, np.inf)
        front = np.flatnonzero(self.boundary_mask)
        dist[front] = 0
        a = self.adjacency
        d = 0
        while front.size:
            d += 1
            reach = np.unique(a[front].indices)
            reach = reach[np.isinf(dist[reach])]
            dist[reach] = d
            front = reach
        return dist


# -- tangent frames --------------------------------------------------------


@dataclass(frozen=True)
class TangentFrame:
    vertex: int
    e1: np.ndarray
    e2: np.ndarray
    normal: np.ndarray


@dataclass(frozen=True)
class FrameField:
    """Per-vertex tangent frames stored as stacked (V, 3) arrays."""

    e1: np.ndarray
    e2: np.ndarray
    normal: np.ndarray

    def __getitem__(self, v):
        return TangentFrame(int(v), self.e1[v], self.e2[v], self.normal[v])

    def __len__(self):
        return self.e1.shape[0]

    def basis(self) -> np.ndarray:
        """Tangent bases as (V, 3, 2) arrays with columns e1, e2."""
        return np.stack([self.e1, self.e2], axis=2)

    def rotated(self, angle) -> "FrameField":
        """Rotate every frame in its tangent plane by ``angle`` (scalar or per vertex)."""
        c = np.cos(np.asarray(angle, dtype=float))[..., None]
        s = np.sin(np.asarray(angle, dtype=float))[..., None]
        return FrameField(c * self.e1 + s * self.e2, -s * self.e1 + c * self.e2, self.normal)


def _complete_frames(normals: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # seed e1 with the coordinate axis least aligned with the normal
    axis = np.argmin(np.abs(normals), axis=1)
    ref = np.zeros_like(normals)
    ref[np.arange(len(normals)), axis] = 1.0
    e1 = ref - np.sum(ref * normals, axis=1, keepdims=True) * normals
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    e2 = np.cross(normals, e1)
    e2 /= np.linalg.norm(e2, axis=1, keepdims=True)
    return e1, e2


def vertex_normals(mesh: TriMesh) -> np.ndarray:
    """Area-weighted averages of incident face normals, normalized.

    Raises
    ------
    TopologyError
        If some vertex has no incident face.
    NumericError
        If the weighted normals cancel out at some vertex.
    """
    fn = mesh.face_normals_raw
    acc = np.zeros((mesh.n_vertices, 3))
    for k in range(3):
        np.add.at(acc, mesh.faces[:, k], fn)
    counts = np.bincount(mesh.faces.ravel(), minlength=mesh.n_vertices)
    iso = np.flatnonzero(counts == 0)
    if iso.size:
        raise TopologyError(f"vertex {iso[0]} is isolated (no incident faces)")
    norm = np.linalg.norm(acc, axis=1)
    bad = np.flatnonzero(norm <= 1e-300)
    if bad.size:
        raise NumericError(f"incident face normals cancel at vertex {bad[0]}")
    return acc / norm[:, None]


def tangent_frames(mesh: TriMesh) -> FrameField:
    n = vertex_normals(mesh)
    e1, e2 = _complete_frames(n)
    return FrameField(e1, e2, n)


def tangent_frame(mesh: TriMesh, v: int) -> TangentFrame:
    """Right-handed orthonormal frame (e1, e2, normal) at vertex ``v``."""
    if not 0 <= v < mesh.n_vertices:
        raise IndexError(f"vertex {v} out of range")
    fids = mesh.vertex_faces(v)
    if fids.size == 0:
        raise TopologyError(f"vertex {v} is isolated (no incident faces)")
    acc = mesh.face_normals_raw[fids].sum(axis=0)
    norm = np.linalg.norm(acc)
    if norm <= 1e-300:
        raise NumericError(f"incident face normals cancel at vertex {v}")
    n = (acc / norm)[None, :]
    e1, e2 = _complete_frames(n)
    return TangentFrame(v, e1[0], e2[0], n[0])


# -- Laplace-Beltrami ------------------------------------------------------


@dataclass(frozen=True)
class LaplaceOperator:
    """Cotangent stiffness ``S`` (positive semidefinite) and lumped mass ``M``."""

    stiffness: sparse.csr_matrix
    mass: sparse.dia_matrix

    @property
    def mass_diagonal(self) -> np.ndarray:
        return self.mass.diagonal()

    def apply(self, u):
        """Discrete Laplace-Beltrami ``-M^{-1} S u`` (negative semidefinite)."""
        u = np.asarray(u, dtype=float)
        md = self.mass_diagonal
        return -(self.stiffness @ u) / (md[:, None] if u.ndim == 2 else md)


def cotangent_laplacian(mesh: TriMesh) -> LaplaceOperator:
    v, f = mesh.vertices, mesh.faces
    n = mesh.n_vertices
    rows, cols, vals = [], [], []
    for k in range(3):
        i, j, o = f[:, (k + 1) % 3], f[:, (k + 2) % 3], f[:, k]
        a = v[i] - v[o]
        b = v[j] - v[o]
        cross = np.linalg.norm(np.cross(a, b), axis=1)
        cot = np.sum(a * b, axis=1) / cross
        n_clamped = int(np.count_nonzero(np.abs(cot) > COT_CLAMP))
        if n_clamped:
            logger.warning("clamping %d cotangent weights to +-%g", n_clamped, COT_CLAMP)
            cot = np.clip(cot, -COT_CLAMP, COT_CLAMP)
        w = -0.5 * cot
        rows += [i, j]
        cols += [j, i]
        vals += [w, w]
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    off = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    diag = -np.asarray(off.sum(axis=1)).ravel()
    stiff = (off + sparse.diags(diag)).tocsr()
    stiff.sort_indices()

    lumped = np.zeros(n)
    for k in range(3):
        np.add.at(lumped, f[:, k], mesh.face_areas / 3.0)
    return LaplaceOperator(stiff, sparse.diags(lumped))


# -- I/O -------------------------------------------------------------------


def _data_lines(path):
    with open(path, "r") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if line:
                yield line


def _read_off(path):
    lines = _data_lines(path)
    try:
        head = next(lines)
    except StopIteration:
        raise ParseError(f"{path}: empty file") from None
    tokens = head.split()
    if not tokens[0].endswith("OFF"):
        raise ParseError(f"{path}: missing OFF header")
    tokens = tokens[1:]
    try:
        if not tokens:
            tokens = next(lines).split()
        nv, nf = int(tokens[0]), int(tokens[1])
    except (StopIteration, ValueError, IndexError):
        raise ParseError(f"{path}: malformed OFF count line") from None

    verts = np.empty((nv, 3))
    faces = np.empty((nf, 3), dtype=np.int64)
    try:
        for i in range(nv):
            verts[i] = [float(t) for t in next(lines).split()[:3]]
        for i in range(nf):
            tok = next(lines).split()
            if int(tok[0]) != 3:
                raise ParseError(f"{path}: face {i} is not a triangle")
            faces[i] = [int(t) for t in tok[1:4]]
    except StopIteration:
        raise ParseError(f"{path}: file ends before all elements were read") from None
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return verts, faces


def _read_ply(path):
    with open(path, "r") as fh:
        lines = [ln.strip() for ln in fh]
    if not lines or lines[0] != "ply":
        raise ParseError(f"{path}: missing ply magic")
    elements = []  # (name, count, [property names])
    fmt = None
    i = 1
    try:
        while lines[i] != "end_header":
            tok = lines[i].split()
            if not tok or tok[0] in ("comment", "obj_info"):
                pass
            elif tok[0] == "format":
                fmt = tok[1]
            elif tok[0] == "element":
                elements.append((tok[1], int(tok[2]), []))
            elif tok[0] == "property":
                elements[-1][2].append(tok[-1])
            else:
                raise ParseError(f"{path}: unexpected header line {lines[i]!r}")
            i += 1
    except IndexError:
        raise ParseError(f"{path}: unterminated header") from None
    if fmt != "ascii":
        raise ParseError(f"{path}: only ASCII PLY is supported (got {fmt})")

    body = (ln for ln in lines[i + 1 :] if ln)
    verts = faces = channels = None
    try:
        for name, count, props in elements:
            rows = [next(body).split() for _ in range(count)]
            if name == "vertex":
                table = np.array(rows, dtype=float).reshape(count, len(props))
                col = {p: k for k, p in enumerate(props)}
                verts = table[:, [col["x"], col["y"], col["z"]]]
                chans = sorted(
                    (p for p in props if p.startswith("ch") and p[2:].isdigit()),
                    key=lambda p: int(p[2:]),
                )
                if chans:
                    channels = table[:, [col[p] for p in chans]]
            elif name == "face":
                faces = np.empty((count, 3), dtype=np.int64)
                for k, tok in enumerate(rows):
                    if int(tok[0]) != 3:
                        raise ParseError(f"{path}: face {k} is not a triangle")
                    faces[k] = [int(t) for t in tok[1:4]]
    except StopIteration:
        raise ParseError(f"{path}: file ends before all elements were read") from None
    except (ValueError, KeyError) as exc:
        raise ParseError(f"{path}: {exc}") from None
    if verts is None or faces is None:
        raise ParseError(f"{path}: vertex and face elements are required")
    return verts, faces, channels


def read_mesh(path) -> tuple[TriMesh, np.ndarray | None]:
    """Load a mesh plus any PLY-embedded signal channels (``None`` for OFF)."""
    path = Path(path)
    if not path.exists():
        raise ParseError(f"{path}: no such file")
    if path.suffix.lower() == ".ply":
        verts, faces, channels = _read_ply(path)
    else:
        verts, faces = _read_off(path)
        channels = None
    return TriMesh(verts, faces), channels


def load_mesh(path) -> TriMesh:
    return read_mesh(path)[0]


def write_off(path, mesh: TriMesh):
    with open(path, "w") as fh:
        fh.write(f"OFF\n{mesh.n_vertices} {mesh.n_faces} {len(mesh.edges)}\n")
        for p in mesh.vertices:
            fh.write(" ".join(repr(float(x)) for x in p) + "\n")
        for a, b, c in mesh.faces:
            fh.write(f"3 {a} {b} {c}\n")


def write_ply(path, mesh: TriMesh, signal=None):
    sig = None if signal is None else np.asarray(signal, dtype=float).reshape(mesh.n_vertices, -1)
    with open(path, "w") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write(f"element vertex {mesh.n_vertices}\n")
        fh.write("property double x\nproperty double y\nproperty double z\n")
        if sig is not None:
            for k in range(sig.shape[1]):
                fh.write(f"property double ch{k}\n")
        fh.write(f"element face {mesh.n_faces}\n")
        fh.write("property list uchar int vertex_indices\nend_header\n")
        for i, p in enumerate(mesh.vertices):
            vals = list(p) if sig is None else list(p) + list(sig[i])
            fh.write(" ".join(repr(float(x)) for x in vals) + "\n")
        for a, b, c in mesh.faces:
            fh.write(f"3 {a} {b} {c}\n")


def write_mesh(path, mesh: TriMesh, signal=None):
    if Path(path).suffix.lower() == ".ply":
        write_ply(path, mesh, signal)
    else:
        write_off(path, mesh)


def load_signal(path, n_vertices: int) -> np.ndarray:
    """Read a sidecar CSV ``vertex,ch0,...`` into a (V, m) array ordered by vertex."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except FileNotFoundError:
        raise ParseError(f"{path}: no such file") from None
    if not rows or not rows[0] or rows[0][0].strip() != "vertex":
        raise ParseError(f"{path}: header must start with 'vertex'")
    m = len(rows[0]) - 1
    if m < 1:
        raise ParseError(f"{path}: no signal channels")
    body = [r for r in rows[1:] if r]
    if len(body) != n_vertices:
        raise ParseError(f"{path}: {len(body)} rows for {n_vertices} vertices")
    out = np.full((n_vertices, m), np.nan)
    try:
        for r in body:
            idx = int(r[0])
            if not 0 <= idx < n_vertices or len(r) != m + 1:
                raise ParseError(f"{path}: bad row {r!r}")
            out[idx] = [float(x) for x in r[1:]]
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None
    if np.isnan(out).any():
        raise ParseError(f"{path}: missing or non-finite vertex values")
    return out


def write_signal(path, signal):
    sig = np.asarray(signal, dtype=float)
    if sig.ndim == 1:
        sig = sig[:, None]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["vertex"] + [f"ch{k}" for k in range(sig.shape[1])])
        for i, row in enumerate(sig):
            w.writerow([i] + [f"{x:.17g}" for x in row])
