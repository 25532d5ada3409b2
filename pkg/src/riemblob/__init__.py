"""Riemannian blob detection for vector-valued signals on triangulated surfaces."""

from .descriptor import Codebook, encode, make_pairs, train_codebook
from .detector import Blob, DetectorConfig, detect_blobs, suppress_overlaps
from .errors import (
    InsufficientDataError,
    NumericError,
    ParseError,
    RankDeficiencyError,
    RiemBlobError,
    SolverError,
    TopologyError,
    UsageError,
)
from .hessian import HessianEstimator, HessianField, covariant_hessian
from .mesh import (
    LaplaceOperator,
    TangentFrame,
    TriMesh,
    cotangent_laplacian,
    load_mesh,
    tangent_frame,
    tangent_frames,
)
from .pipeline import Detection, detect
from .response import (
    ResponseField,
    blob_response,
    br_mean,
    br_scalar_detsum,
    br_scalar_theorem,
    scale_normalize,
)
from .scalespace import ScaleGrid, ScaleSpace, default_scale_grid, heat_flow, make_scale_grid
from .synth import Gaussian, SyntheticScene, icosphere, planar_grid, plant_gaussians

__version__ = "0.1.0"
