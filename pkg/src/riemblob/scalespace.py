"""Heat-flow scale-space of vertex signals.

The smoothing flow ``M dL/dt = -S L`` is integrated with implicit Euler,
one sparse LU factorization per distinct step size.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import splu

from .errors import SolverError, UsageError
from .mesh import LaplaceOperator, TriMesh, cotangent_laplacian

logger = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10
DEFAULT_LEVELS = 12
DEFAULT_SUBSTEPS = 4


@dataclass(frozen=True)
class ScaleGrid:
    scales: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.scales, dtype=float)
        if t.ndim != 1 or t.size < 2:
            raise UsageError("a scale grid needs at least 2 scales")
        if not t[0] > 0 or np.any(np.diff(t) <= 0) or not np.all(np.isfinite(t)):
            raise UsageError("scales must be positive, finite and strictly increasing")
        t.flags.writeable = False
        object.__setattr__(self, "scales", t)

    def __len__(self):
        return self.scales.size

    def __getitem__(self, k):
        return float(self.scales[k])


def make_scale_grid(t_min: float, t_max: float, levels: int) -> ScaleGrid:
    """Geometric progression of ``levels`` scales from ``t_min`` to ``t_max``."""
    if int(levels) != levels or levels < 2:
        raise UsageError(f"need at least 2 levels, got {levels}")
    if not (0 < t_min < t_max) or not np.isfinite(t_max):
        raise UsageError(f"need 0 < t_min < t_max, got t_min={t_min}, t_max={t_max}")
    levels = int(levels)
    k = np.arange(levels) / (levels - 1)
    t = t_min * (t_max / t_min) ** k
    t[0], t[-1] = t_min, t_max
    return ScaleGrid(t)


def default_scale_grid(mesh: TriMesh, levels: int = DEFAULT_LEVELS) -> ScaleGrid:
    """From half the squared mean edge length up to a quarter of the bounding diagonal, squared."""
    h = mesh.mean_edge_length
    d = mesh.bbox_diagonal
    return make_scale_grid(h * h / 2.0, (d / 4.0) ** 2, levels)


@dataclass(frozen=True)
class ScaleSpace:
    """Smoothed signal per scale.

    ``levels[k]`` is the (V, m) signal at ``grid[k]``; ``signal`` is the raw
    input at t = 0.
    """

    grid: ScaleGrid
    signal: np.ndarray
    levels: tuple

    @property
    def n_channels(self) -> int:
        return self.signal.shape[1]

    def __len__(self):
        return len(self.levels)

    def __getitem__(self, k):
        return self.levels[k]

    def as_array(self) -> np.ndarray:
        """All levels stacked as (K, V, m)."""
        return np.stack(self.levels)


def as_signal(signal, n_vertices: int) -> np.ndarray:
    sig = np.array(signal, dtype=float)
    if sig.ndim == 1:
        sig = sig[:, None]
    if sig.ndim != 2 or sig.shape[0] != n_vertices:
        raise UsageError(
            f"signal has shape {np.shape(signal)}, expected ({n_vertices}, m)"
        )
    if not np.all(np.isfinite(sig)):
        raise UsageError("signal contains non-finite values")
    return sig


def _backward_error(A, a_norm, x, b):
    """Normwise relative residual ``|Ax - b| / (|A| |x| + |b|)`` per column (inf-norms)."""
    r = np.abs(A @ x - b).max(axis=0)
    scale = a_norm * np.abs(x).max(axis=0) + np.abs(b).max(axis=0)
    return r / np.maximum(scale, np.finfo(float).tiny)


def heat_flow(
    mesh: TriMesh,
    op: LaplaceOperator | None,
    signal,
    grid: ScaleGrid,
    substeps: int = DEFAULT_SUBSTEPS,
) -> ScaleSpace:
    if int(substeps) != substeps or substeps < 1:
        raise UsageError(f"substeps must be >= 1, got {substeps}")
    if op is None:
        op = cotangent_laplacian(mesh)
    sig = as_signal(signal, mesh.n_vertices)
    sig.flags.writeable = False
    M = op.mass.tocsc()
    S = op.stiffness.tocsc()
    mdiag = op.mass_diagonal

    factors = {}
    cur = sig.copy()
    levels = []
    prev_t = 0.0
    for k, t in enumerate(grid.scales):
        dt = (t - prev_t) / substeps
        key = float(dt)
        if key not in factors:
            A = (M + dt * S).tocsc()
            factors[key] = A, splu(A), abs(A).sum(axis=1).max()
        A, lu, a_norm = factors[key]
        for _ in range(int(substeps)):
            rhs = mdiag[:, None] * cur
            nxt = lu.solve(rhs)
            # one step of iterative refinement
            nxt += lu.solve(rhs - A @ nxt)
            rel = _backward_error(A, a_norm, nxt, rhs)
            bad = np.flatnonzero(~(rel <= RESIDUAL_TOL))
            if bad.size:
                raise SolverError(
                    f"heat flow solve failed at level {k}, channel {bad[0]}: "
                    f"relative residual {rel[bad[0]]:.3g}"
                )
            cur = nxt
        lvl = cur.copy()
        lvl.flags.writeable = False
        levels.append(lvl)
        prev_t = t
    logger.debug("heat flow: %d levels, %d factorizations", len(levels), len(factors))
    return ScaleSpace(grid, sig, tuple(levels))
