"""Blob response functions computed from per-vertex Hessians.

Kinds
-----
``detsum``
    Sum over channels of ``det H^a``. Default scalar response; for a single
    channel it is the classical determinant response.
``theorem``
    The double-sum form ``sum_ij sum_a (H^a_ij H^a_ji - H^a_ii H^a_jj)``;
    equals ``-2 * detsum`` on 2-manifolds. Kept for cross-checking.
``mean``
    Euclidean norm of the channel traces, ``||(tr H^1, ..., tr H^m)||``.
``det`` / ``trace``
    Single-channel classical responses (``trace`` is signed).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .errors import UsageError
from .hessian import HessianField

SCALAR_KINDS = ("detsum", "theorem", "det")
LINEAR_KINDS = ("mean", "trace")
KINDS = SCALAR_KINDS + LINEAR_KINDS


@dataclass(frozen=True)
class ResponseField:
    """Response values, shape (K, V); NaN marks vertices without a valid Hessian."""

    kind: str
    values: np.ndarray
    normalized: bool = False

    @property
    def mask(self) -> np.ndarray:
        """True where the value is usable."""
        return np.isfinite(self.values)

    @property
    def n_levels(self) -> int:
        return self.values.shape[0]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["level", "vertex", "response"])
            for k, row in enumerate(self.values):
                for v in np.flatnonzero(np.isfinite(row)):
                    w.writerow([k, v, f"{row[v]:.17g}"])


def _hessians(H) -> np.ndarray:
    arr = H.H if isinstance(H, HessianField) else np.asarray(H, dtype=float)
    if arr.shape[-2:] != (2, 2):
        raise UsageError(f"Hessians must end in (2, 2), got {arr.shape}")
    return arr


def _field(kind, values):
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[None, :]
    return ResponseField(kind, values)


def _det(h):
    return h[..., 0, 0] * h[..., 1, 1] - h[..., 0, 1] * h[..., 1, 0]


def _trace(h):
    return h[..., 0, 0] + h[..., 1, 1]


def br_scalar_detsum(H) -> ResponseField:
    h = _hessians(H)
    return _field("detsum", _det(h).sum(axis=-1))


def br_scalar_theorem(H) -> ResponseField:
    h = _hessians(H)
    # sum_ij H_ij H_ji - sum_ij H_ii H_jj, summed over channels
    cross = np.einsum("...ij,...ji->...", h, h)
    diag = np.diagonal(h, axis1=-2, axis2=-1)
    square = diag.sum(axis=-1) ** 2
    return _field("theorem", (cross - square).sum(axis=-1))


def br_mean(H) -> ResponseField:
    h = _hessians(H)
    return _field("mean", np.sqrt(np.sum(_trace(h) ** 2, axis=-1)))


def _single_channel(h):
    if h.shape[-3] != 1:
        raise UsageError(f"grayscale responses need one channel, got {h.shape[-3]}")
    return h[..., 0, :, :]


def br_det(H) -> ResponseField:
    """Classical determinant response for a single-channel Hessian field."""
    return _field("det", _det(_single_channel(_hessians(H))))


def br_trace(H) -> ResponseField:
    """Classical (signed) trace response for a single-channel Hessian field."""
    return _field("trace", _trace(_single_channel(_hessians(H))))


_DISPATCH = {
    "detsum": br_scalar_detsum,
    "theorem": br_scalar_theorem,
    "mean": br_mean,
    "det": br_det,
    "trace": br_trace,
}


def blob_response(H, kind: str = "detsum") -> ResponseField:
    try:
        fn = _DISPATCH[kind]
    except KeyError:
        raise UsageError(f"unknown response kind {kind!r}; expected one of {KINDS}") from None
    return fn(H)


def scale_normalize(field: ResponseField, grid) -> ResponseField:
    """Multiply by ``t**2`` (determinant-type kinds) or ``t`` (trace-type kinds) per level."""
    if field.normalized:
        raise UsageError("response field is already scale-normalized")
    t = np.asarray(grid.scales if hasattr(grid, "scales") else grid, dtype=float)
    if t.size != field.n_levels:
        raise UsageError(f"{field.n_levels} response levels but {t.size} scales")
    power = 2 if field.kind in SCALAR_KINDS else 1
    return replace(field, values=field.values * (t**power)[:, None], normalized=True)
