"""Synthetic meshes and signals with known ground truth."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import UsageError
from .mesh import TriMesh


@dataclass(frozen=True)
class Gaussian:
    center: tuple
    sigma: float
    channel: int = 0
    amplitude: float = 1.0

    def to_dict(self):
        return {
            "center": [float(c) for c in self.center],
            "sigma": float(self.sigma),
            "channel": int(self.channel),
            "amplitude": float(self.amplitude),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["center"]), d["sigma"], d.get("channel", 0), d.get("amplitude", 1.0))


@dataclass
class SyntheticScene:
    mesh: TriMesh
    signal: np.ndarray
    ground_truth: list = field(default_factory=list)

    def ground_truth_json(self) -> str:
        return json.dumps([g.to_dict() for g in self.ground_truth], indent=2)


def planar_grid(n: int, extent: float = 1.0) -> TriMesh:
    """``n`` x ``n`` grid on z=0 over ``[0, extent]^2``, each cell split along the same diagonal."""
    if int(n) != n or n < 2:
        raise UsageError(f"planar_grid needs n >= 2, got {n}")
    if not extent > 0:
        raise UsageError(f"planar_grid needs extent > 0, got {extent}")
    n = int(n)
    xs = np.linspace(0.0, extent, n)
    gx, gy = np.meshgrid(xs, xs, indexing="xy")
    verts = np.column_stack([gx.ravel(), gy.ravel(), np.zeros(n * n)])
    idx = np.arange(n * n).reshape(n, n)
    a = idx[:-1, :-1].ravel()
    b = idx[:-1, 1:].ravel()
    c = idx[1:, 1:].ravel()
    d = idx[1:, :-1].ravel()
    faces = np.concatenate([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
    return TriMesh(verts, faces)


_PHI = (1 + 5**0.5) / 2
_ICO_VERTS = [
    (-1, _PHI, 0), (1, _PHI, 0), (-1, -_PHI, 0), (1, -_PHI, 0),
    (0, -1, _PHI), (0, 1, _PHI), (0, -1, -_PHI), (0, 1, -_PHI),
    (_PHI, 0, -1), (_PHI, 0, 1), (-_PHI, 0, -1), (-_PHI, 0, 1),
]
_ICO_FACES = [
    (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
    (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
    (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
    (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
]


def icosphere(subdiv: int, radius: float = 1.0) -> TriMesh:
    """Subdivided icosahedron, outward oriented, V = 10 * 4**subdiv + 2."""
    if int(subdiv) != subdiv or not 0 <= subdiv <= 7:
        raise UsageError(f"icosphere needs 0 <= subdiv <= 7, got {subdiv}")
    if not radius > 0:
        raise UsageError(f"icosphere needs radius > 0, got {radius}")
    verts = np.array(_ICO_VERTS, dtype=float)
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = np.array(_ICO_FACES, dtype=np.int64)
    for _ in range(int(subdiv)):
        midpoint = {}
        new_verts = list(verts)

        def mid(i, j):
            key = (i, j) if i < j else (j, i)
            if key not in midpoint:
                p = verts[i] + verts[j]
                new_verts.append(p / np.linalg.norm(p))
                midpoint[key] = len(new_verts) - 1
            return midpoint[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        verts = np.array(new_verts)
        faces = np.array(new_faces, dtype=np.int64)
    # re-project so every vertex sits at exactly `radius`
    verts = verts / np.linalg.norm(verts, axis=1, keepdims=True) * radius
    return TriMesh(verts, faces)


def plant_gaussians(mesh: TriMesh, gaussians, n_channels: int | None = None) -> SyntheticScene:
    """Sum of isotropic Gaussians (ambient distance) per channel."""
    gaussians = [g if isinstance(g, Gaussian) else Gaussian(*g) for g in gaussians]
    for g in gaussians:
        if not g.sigma > 0:
            raise UsageError(f"gaussian sigma must be positive, got {g.sigma}")
        if g.channel < 0:
            raise UsageError(f"gaussian channel must be >= 0, got {g.channel}")
    needed = max((g.channel + 1 for g in gaussians), default=1)
    m = needed if n_channels is None else n_channels
    if m < needed:
        raise UsageError(f"{m} channels requested but a gaussian uses channel {needed - 1}")
    signal = np.zeros((mesh.n_vertices, m))
    for g in gaussians:
        d2 = np.sum((mesh.vertices - np.asarray(g.center, dtype=float)) ** 2, axis=1)
        signal[:, g.channel] += g.amplitude * np.exp(-d2 / (2.0 * g.sigma**2))
    return SyntheticScene(mesh, signal, gaussians)
