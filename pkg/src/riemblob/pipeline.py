"""End-to-end detection: scale-space, Hessians, responses, extrema."""

from __future__ import annotations

from dataclasses import dataclass

from .detector import Blob, DetectorConfig, detect_blobs
from .hessian import HessianEstimator, HessianField
from .mesh import TriMesh, cotangent_laplacian
from .response import ResponseField, blob_response, scale_normalize
from .scalespace import DEFAULT_SUBSTEPS, ScaleGrid, ScaleSpace, default_scale_grid, heat_flow


@dataclass
class Detection:
    grid: ScaleGrid
    scalespace: ScaleSpace
    hessians: HessianField
    response: ResponseField
    blobs: list[Blob]


def detect(
    mesh: TriMesh,
    signal,
    grid: ScaleGrid | None = None,
    kind: str = "detsum",
    cfg: DetectorConfig | None = None,
    substeps: int = DEFAULT_SUBSTEPS,
    estimator: HessianEstimator | None = None,
) -> Detection:
    grid = grid or default_scale_grid(mesh)
    ss = heat_flow(mesh, cotangent_laplacian(mesh), signal, grid, substeps)
    est = estimator or HessianEstimator(mesh)
    H = est.hessian_levels(ss.levels)
    field = scale_normalize(blob_response(H, kind), grid)
    return Detection(grid, ss, H, field, detect_blobs(field, mesh, grid, cfg))
