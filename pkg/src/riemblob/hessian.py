"""Discrete covariant Hessian of vertex signals on a triangle mesh.

Per vertex ``v`` with one-ring neighbours ``n_j`` and edge vectors
``z_j = p(n_j) - p(v)``:

1. increments ``d_j = L(n_j) - L(v)``;
2. ambient differential ``dL`` from the least-squares system ``z_j . dL = d_j``,
   then projected onto the tangent plane at ``v``;
3. covariant derivatives ``P_T (dL(n_j) - dL(v))`` along each ``z_j``;
4. the 2x3 map ``A`` solving ``A z_j = e^T P_T (dL(n_j) - dL(v))`` in the least
   squares sense, restricted to the frame: ``H = A [e1 e2]``, then symmetrized.

Every step is linear in ``L`` and depends on geometry only, so the whole
estimator is assembled once per mesh as two sparse matrices.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse

from .errors import RankDeficiencyError, UsageError
from .mesh import FrameField, TriMesh, tangent_frames

RCOND = 1e-10
MIN_NEIGHBORS = 3


def _rank(s: np.ndarray) -> np.ndarray:
    """Numerical rank from singular values along the last axis."""
    return np.sum(s > RCOND * s[..., :1], axis=-1)


def _level_array(level, n_vertices):
    lv = np.asarray(level, dtype=float)
    if lv.ndim == 1:
        lv = lv[:, None]
    if lv.ndim != 2 or lv.shape[0] != n_vertices:
        raise UsageError(f"level has shape {np.shape(level)}, expected ({n_vertices}, m)")
    return lv


# -- single-vertex reference path -----------------------------------------


def directional_derivatives(mesh: TriMesh, level, v: int):
    """Return ``(Z, d)``: edge vectors (3, k) and increments (k, m) at vertex ``v``."""
    lv = _level_array(level, mesh.n_vertices)
    nb = mesh.neighbors(v)
    Z = (mesh.vertices[nb] - mesh.vertices[v]).T
    return Z, lv[nb] - lv[v]


def estimate_differential(mesh: TriMesh, level, v: int, frame=None) -> np.ndarray:
    """Tangential differential at ``v`` as ambient 3-vectors, shape (m, 3).

    Raises
    ------
    RankDeficiencyError
        If the edge vectors at ``v`` span fewer than 2 directions.
    """
    from .mesh import tangent_frame

    Z, d = directional_derivatives(mesh, level, v)
    s = np.linalg.svd(Z, compute_uv=False)
    if Z.shape[1] < MIN_NEIGHBORS:
        raise RankDeficiencyError(f"vertex {v}: {Z.shape[1]} neighbours, need {MIN_NEIGHBORS}")
    if _rank(s) < 2:
        raise RankDeficiencyError(f"vertex {v}: fewer than 2 independent edge directions")
    frame = frame or tangent_frame(mesh, v)
    g = np.linalg.pinv(Z.T, rcond=RCOND) @ d  # (3, m)
    n = frame.normal
    g -= np.outer(n, n @ g)
    return g.T


# -- assembled operators ---------------------------------------------------


@dataclass(frozen=True)
class HessianField:
    """Per-vertex symmetric 2x2 Hessians in the vertex tangent frames.

    ``H`` has shape (V, m, 2, 2), or (K, V, m, 2, 2) for a stack of scale
    levels. ``valid`` flags vertices whose stencil supported an estimate;
    invalid entries hold NaN.
    """

    H: np.ndarray
    valid: np.ndarray
    frames: FrameField | None = None

    @property
    def n_channels(self) -> int:
        return self.H.shape[-3]

    @property
    def n_vertices(self) -> int:
        return self.H.shape[-4]

    @classmethod
    def stack(cls, fields):
        fields = list(fields)
        return cls(np.stack([f.H for f in fields]), fields[0].valid, fields[0].frames)

    def level(self, k) -> "HessianField":
        if self.H.ndim != 5:
            raise ValueError("not a multi-level field")
        return HessianField(self.H[k], self.valid, self.frames)

    def write_csv(self, path):
        if self.H.ndim != 4:
            raise ValueError("CSV dump takes a single level")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["vertex", "channel", "H11", "H12", "H22"])
            for v in np.flatnonzero(self.valid):
                for a in range(self.n_channels):
                    h = self.H[v, a]
                    w.writerow([v, a, f"{h[0, 0]:.17g}", f"{h[0, 1]:.17g}", f"{h[1, 1]:.17g}"])


class HessianEstimator:
    """Sparse linear operators for the four-step Hessian estimate on one mesh."""

    def __init__(self, mesh: TriMesh, frames: FrameField | None = None):
        self.mesh = mesh
        self.frames = frames if frames is not None else tangent_frames(mesh)
        self._build()

    def _build(self):
        mesh = self.mesh
        V = mesh.n_vertices
        adj = mesh.adjacency
        deg = np.diff(adj.indptr)
        P = mesh.vertices
        normals = self.frames.normal
        basis = self.frames.basis()  # (V, 3, 2)

        stencil_ok = deg >= MIN_NEIGHBORS
        g_rows, g_cols, g_vals = [], [], []
        h_rows, h_cols, h_vals = [], [], []

        for k in np.unique(deg):
            vs = np.flatnonzero(deg == k)
            if k == 0:
                continue
            nb = np.stack([adj.indices[adj.indptr[v] : adj.indptr[v + 1]] for v in vs])
            Z = np.transpose(P[nb] - P[vs][:, None, :], (0, 2, 1))  # (n, 3, k)
            s = np.linalg.svd(Z, compute_uv=False)
            ok = (_rank(s) >= 2) & (k >= MIN_NEIGHBORS)
            stencil_ok[vs] = ok
            # gradient: g = T pinv(Z^T) d
            Pz = np.linalg.pinv(np.transpose(Z, (0, 2, 1)), rcond=RCOND)  # (n, 3, k)
            n = normals[vs]
            T = np.eye(3)[None] - n[:, :, None] * n[:, None, :]
            G = T @ Pz  # (n, 3, k)
            comp = 3 * vs[:, None, None] + np.arange(3)[None, :, None]  # (n, 3, 1)
            g_rows += [np.broadcast_to(comp, G.shape).ravel(), np.broadcast_to(comp[..., 0], G.shape[:2]).ravel()]
            g_cols += [np.broadcast_to(nb[:, None, :], G.shape).ravel(), np.broadcast_to(vs[:, None], G.shape[:2]).ravel()]
            g_vals += [G.ravel(), -G.sum(axis=2).ravel()]

            # Hessian from gradients: H_ab = sum_j (e_a . (g_nj - g_v)) (pinv(Z)_j . e_b)
            Qz = np.linalg.pinv(Z, rcond=RCOND)  # (n, k, 3)
            E = basis[vs]  # (n, 3, 2)
            C = Qz @ E  # (n, k, 2): c_jb
            # coefficient on g_{n_j}[c] for entry (a, b): E[c, a] * C[j, b]
            coef = np.einsum("nca,njb->nabjc", E, C)  # (n, 2, 2, k, 3)
            out = 4 * vs[:, None, None, None, None] + (
                2 * np.arange(2)[:, None] + np.arange(2)[None, :]
            )[None, :, :, None, None]
            gcol = 3 * nb[:, None, None, :, None] + np.arange(3)[None, None, None, None, :]
            shape = coef.shape
            h_rows.append(np.broadcast_to(out, shape).ravel())
            h_cols.append(np.broadcast_to(gcol, shape).ravel())
            h_vals.append(coef.ravel())
            self_coef = -coef.sum(axis=3)  # (n, 2, 2, 3)
            vcol = 3 * vs[:, None, None, None] + np.arange(3)[None, None, None, :]
            h_rows.append(np.broadcast_to(out[..., 0, :], self_coef.shape).ravel())
            h_cols.append(np.broadcast_to(vcol, self_coef.shape).ravel())
            h_vals.append(self_coef.ravel())

        def _assemble(rows, cols, vals, shape):
            if not rows:
                return sparse.csr_matrix(shape)
            return sparse.csr_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=shape
            )

        self.gradient_operator = _assemble(g_rows, g_cols, g_vals, (3 * V, V))
        self.hessian_from_gradient = _assemble(h_rows, h_cols, h_vals, (4 * V, 3 * V))
        self.stencil_ok = stencil_ok
        # a Hessian needs valid gradients at the vertex and across its one-ring
        bad = (~stencil_ok).astype(float)
        bad_nb = adj @ bad
        self.valid = stencil_ok & (bad_nb == 0)

    @cached_property
    def hessian_operator(self) -> sparse.csr_matrix:
        """Composite (4V x V) map from vertex values to raw (unsymmetrized) Hessian entries."""
        return (self.hessian_from_gradient @ self.gradient_operator).tocsr()

    def differential(self, level) -> np.ndarray:
        """Tangential differentials, shape (V, m, 3); rows of invalid stencils are NaN."""
        lv = _level_array(level, self.mesh.n_vertices)
        g = (self.gradient_operator @ lv).reshape(self.mesh.n_vertices, 3, -1)
        g = np.transpose(g, (0, 2, 1)).copy()
        g[~self.stencil_ok] = np.nan
        return g

    def hessian(self, level) -> HessianField:
        lv = _level_array(level, self.mesh.n_vertices)
        raw = (self.hessian_operator @ lv).reshape(self.mesh.n_vertices, 2, 2, -1)
        raw = np.transpose(raw, (0, 3, 1, 2))
        H = 0.5 * (raw + np.swapaxes(raw, -1, -2))
        H[~self.valid] = np.nan
        return HessianField(H, self.valid, self.frames)

    def hessian_levels(self, levels) -> HessianField:
        """Hessians of every level of a scale-space (or any sequence of (V, m) arrays)."""
        return HessianField.stack(self.hessian(lv) for lv in levels)


def covariant_hessian(mesh: TriMesh, level, frames: FrameField | None = None) -> HessianField:
    return HessianEstimator(mesh, frames).hessian(level)


def vertex_hessian(mesh: TriMesh, level, v: int, frame=None) -> np.ndarray:
    """Single-vertex reference evaluation, shape (m, 2, 2).

    Follows the four steps literally with dense per-vertex solves; used to
    cross-check the assembled operators.
    """
    from .mesh import tangent_frame

    frame = frame or tangent_frame(mesh, v)
    lv = _level_array(level, mesh.n_vertices)
    nb = mesh.neighbors(v)
    g_v = estimate_differential(mesh, lv, v, frame)  # (m, 3)
    g_n = np.stack([estimate_differential(mesh, lv, int(u)) for u in nb])  # (k, m, 3)
    Z = (mesh.vertices[nb] - mesh.vertices[v]).T
    n = frame.normal
    delta = g_n - g_v[None]
    delta -= (delta @ n)[..., None] * n  # project onto T_v
    E = np.column_stack([frame.e1, frame.e2])
    out = np.empty((lv.shape[1], 2, 2))
    Zp = np.linalg.pinv(Z, rcond=RCOND)
    for a in range(lv.shape[1]):
        W = E.T @ delta[:, a, :].T  # (2, k)
        A = W @ Zp  # (2, 3)
        Hm = A @ E
        out[a] = 0.5 * (Hm + Hm.T)
    return out
