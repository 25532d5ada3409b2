"""Spatio-scale extremum detection on a normalized response field."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import UsageError
from .mesh import TriMesh
from .response import ResponseField


@dataclass(frozen=True)
class Blob:
    vertex: int
    position: tuple
    t: float
    radius: float
    response: float
    polarity: str  # "max" or "min"
    kind: str
    level: int

    def to_record(self) -> dict:
        d = asdict(self)
        d["position"] = [float(x) for x in self.position]
        return d


@dataclass(frozen=True)
class DetectorConfig:
    """Detection parameters.

    ``boundary_margin`` excludes vertices within that many edge hops of a
    mesh boundary: their one-sided stencils do not resolve second
    derivatives. ``boundary_support`` additionally drops blobs whose radius
    exceeds the distance from their center to the boundary. Neither has any
    effect on closed meshes.
    """

    threshold: float = 0.0
    detect_minima: bool = True
    detect_maxima: bool = True
    suppression_overlap: float = 0.5
    boundary_margin: int = 2
    boundary_support: bool = True

    def __post_init__(self):
        if not self.threshold >= 0:
            raise UsageError(f"threshold must be >= 0, got {self.threshold}")
        if not (self.detect_minima or self.detect_maxima):
            raise UsageError("at least one of detect_minima / detect_maxima must be set")
        if not 0 <= self.suppression_overlap <= 1:
            raise UsageError(
                f"suppression_overlap must lie in [0, 1], got {self.suppression_overlap}"
            )
        if self.boundary_margin < 0:
            raise UsageError("boundary_margin must be >= 0")


def blob_radius(t):
    return np.sqrt(2.0 * np.asarray(t, dtype=float))


def _padded_neighbors(mesh: TriMesh) -> np.ndarray:
    """(V, dmax) neighbour table padded with the sentinel index V."""
    adj = mesh.adjacency
    deg = np.diff(adj.indptr)
    V = mesh.n_vertices
    out = np.full((V, max(int(deg.max()), 1)), V, dtype=np.int64)
    col = np.arange(adj.indices.size) - np.repeat(adj.indptr[:-1], deg)
    out[np.repeat(np.arange(V), deg), col] = adj.indices
    return out


def extremum_masks(values: np.ndarray, mesh: TriMesh) -> tuple[np.ndarray, np.ndarray]:
    """Strict spatio-scale maxima and minima, each a (K, V) boolean mask.

    A (v, k) entry qualifies when its value is strictly above (below) the
    values of all one-ring neighbours at levels k-1, k, k+1 and of v itself at
    k-1 and k+1. The first and last level never qualify; any NaN in the
    neighbourhood disqualifies.
    """
    F = np.asarray(values, dtype=float)
    K, V = F.shape
    is_max = np.zeros((K, V), dtype=bool)
    is_min = np.zeros((K, V), dtype=bool)
    if K < 3:
        return is_max, is_min
    nb = _padded_neighbors(mesh)
    pad_lo = np.concatenate([F, np.full((K, 1), -np.inf)], axis=1)
    pad_hi = np.concatenate([F, np.full((K, 1), np.inf)], axis=1)
    # NaN anywhere in the ring should propagate, so use max/min (not fmax/fmin)
    ring_max = pad_lo[:, nb].max(axis=2)
    ring_min = pad_hi[:, nb].min(axis=2)
    ring_nan = np.isnan(np.concatenate([F, np.zeros((K, 1))], axis=1)[:, nb]).any(axis=2)
    ring_max[ring_nan] = np.nan
    ring_min[ring_nan] = np.nan

    c = F[1:-1]
    hi = np.maximum.reduce([ring_max[:-2], ring_max[1:-1], ring_max[2:], F[:-2], F[2:]])
    lo = np.minimum.reduce([ring_min[:-2], ring_min[1:-1], ring_min[2:], F[:-2], F[2:]])
    is_max[1:-1] = c > hi
    is_min[1:-1] = c < lo
    return is_max, is_min


def suppress_overlaps(blobs, overlap: float):
    """Greedy suppression; ``blobs`` must already be sorted strongest first."""
    kept = []
    for b in blobs:
        p = np.asarray(b.position)
        if all(
            np.linalg.norm(p - np.asarray(k.position)) >= overlap * (b.radius + k.radius)
            for k in kept
        ):
            kept.append(b)
    return kept


def detect_blobs(
    field: ResponseField, mesh: TriMesh, grid, cfg: DetectorConfig | None = None
) -> list[Blob]:
    cfg = cfg or DetectorConfig()
    if not field.normalized:
        raise UsageError("detect_blobs needs a scale-normalized response field")
    scales = np.asarray(grid.scales if hasattr(grid, "scales") else grid, dtype=float)
    F = field.values
    if F.shape != (scales.size, mesh.n_vertices):
        raise UsageError(
            f"response field shape {F.shape} does not match ({scales.size}, {mesh.n_vertices})"
        )
    is_max, is_min = extremum_masks(F, mesh)
    keep = np.zeros_like(is_max)
    if cfg.detect_maxima:
        keep |= is_max
    if cfg.detect_minima:
        keep |= is_min
    keep &= np.abs(F) >= cfg.threshold
    if cfg.boundary_margin and not mesh.is_closed:
        keep &= (mesh.ring_distance_to_boundary() >= cfg.boundary_margin)[None, :]
    if cfg.boundary_support and not mesh.is_closed:
        dist, _ = cKDTree(mesh.vertices[mesh.boundary_mask]).query(mesh.vertices)
        keep &= dist[None, :] >= blob_radius(scales)[:, None]

    ks, vs = np.nonzero(keep)  # row-major: sorted by (level, vertex)
    vals = F[ks, vs]
    order = np.lexsort((vs, ks, -np.abs(vals)))
    blobs = [
        Blob(
            vertex=int(vs[i]),
            position=tuple(float(x) for x in mesh.vertices[vs[i]]),
            t=float(scales[ks[i]]),
            radius=float(blob_radius(scales[ks[i]])),
            response=float(vals[i]),
            polarity="max" if is_max[ks[i], vs[i]] else "min",
            kind=field.kind,
            level=int(ks[i]),
        )
        for i in order
    ]
    return suppress_overlaps(blobs, cfg.suppression_overlap)


# -- output ----------------------------------------------------------------

CSV_COLUMNS = ["vertex", "x", "y", "z", "t", "radius", "response", "polarity", "kind", "level"]


def _g(x):
    return f"{x:.17g}"


def write_blobs_json(path, blobs):
    records = []
    for b in blobs:
        r = b.to_record()
        for key in ("t", "radius", "response"):
            r[key] = float(_g(r[key]))
        records.append(r)
    with open(path, "w") as fh:
        json.dump(records, fh, indent=2)
        fh.write("\n")


def write_blobs_csv(path, blobs):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for b in blobs:
            x, y, z = b.position
            w.writerow(
                [b.vertex, _g(x), _g(y), _g(z), _g(b.t), _g(b.radius), _g(b.response),
                 b.polarity, b.kind, b.level]
            )


def read_blobs_json(path) -> list[Blob]:
    with open(path) as fh:
        records = json.load(fh)
    return [
        Blob(
            vertex=int(r["vertex"]),
            position=tuple(r["position"]),
            t=float(r["t"]),
            radius=float(r["radius"]),
            response=float(r["response"]),
            polarity=r["polarity"],
            kind=r["kind"],
            level=int(r.get("level", -1)),
        )
        for r in records
    ]
