"""Figures written next to the CSV/JSON outputs of a detection run."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from mpl_toolkits.mplot3d.art3d import Poly3DCollection  # noqa: E402

FIG_WIDTH = 6.0
MAX_PROFILE_BLOBS = 8


def _save(fig, path):
    path = Path(path)
    fig.tight_layout()
    # fixed metadata keeps reruns byte-stable
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def _is_planar(mesh, tol=1e-9):
    z = mesh.vertices[:, 2]
    return float(np.ptp(z)) <= tol * max(mesh.bbox_diagonal, 1.0)


def plot_response_map(mesh, field, level, blobs, path, title=None):
    """Response at one scale level over the mesh, detected blob centers overlaid."""
    vals = field.values[level]
    finite = np.isfinite(vals)
    vmax = np.max(np.abs(vals[finite])) if finite.any() else 1.0
    vmax = vmax or 1.0
    cmap = plt.get_cmap("coolwarm")
    norm = matplotlib.colors.Normalize(-vmax, vmax)
    shown = [b for b in blobs if b.level == level] or list(blobs)

    if _is_planar(mesh):
        fig, ax = plt.subplots(figsize=(FIG_WIDTH, FIG_WIDTH * 0.85))
        x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
        tpc = ax.tripcolor(x, y, mesh.faces, np.where(finite, vals, 0.0),
                           shading="gouraud", cmap=cmap, norm=norm)
        for b in shown:
            ax.add_patch(plt.Circle(b.position[:2], b.radius, fill=False, color="k", lw=1.2))
            ax.plot(*b.position[:2], "k+", ms=8)
        ax.set_aspect("equal")
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        fig.colorbar(tpc, ax=ax, label="normalized response")
    else:
        fig = plt.figure(figsize=(FIG_WIDTH, FIG_WIDTH))
        ax = fig.add_subplot(projection="3d")
        fv = np.where(finite, vals, 0.0)[mesh.faces].mean(axis=1)
        poly = Poly3DCollection(mesh.vertices[mesh.faces], facecolors=cmap(norm(fv)),
                                edgecolor="none")
        ax.add_collection3d(poly)
        if shown:
            P = np.array([b.position for b in shown])
            ax.scatter(P[:, 0], P[:, 1], P[:, 2], c="w", edgecolors="k", s=40, depthshade=False)
        lo, hi = mesh.vertices.min(axis=0), mesh.vertices.max(axis=0)
        ax.set_xlim(lo[0], hi[0])
        ax.set_ylim(lo[1], hi[1])
        ax.set_zlim(lo[2], hi[2])
        ax.set_box_aspect(hi - lo)
        fig.colorbar(matplotlib.cm.ScalarMappable(norm, cmap), ax=ax, shrink=0.7,
                     label="normalized response")
    ax.set_title(title or f"{field.kind} response, level {level}")
    return _save(fig, path)


def plot_scale_profiles(field, grid, blobs, path):
    """Normalized response against scale at each of the strongest blob centers."""
    fig, ax = plt.subplots(figsize=(FIG_WIDTH, FIG_WIDTH * 0.6))
    t = np.asarray(grid.scales)
    for b in list(blobs)[:MAX_PROFILE_BLOBS]:
        ax.plot(t, field.values[:, b.vertex], marker="o", ms=3, label=f"v{b.vertex}")
        ax.axvline(b.t, color=ax.lines[-1].get_color(), ls=":", lw=0.8)
    ax.set_xscale("log")
    ax.set_xlabel("scale t")
    ax.set_ylabel("normalized response")
    if blobs:
        ax.legend(fontsize="small", frameon=False)
    ax.set_title(f"{field.kind} scale profiles")
    return _save(fig, path)


def render_detection(mesh, detection, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    blobs = detection.blobs
    level = blobs[0].level if blobs else len(detection.grid) // 2
    return [
        plot_response_map(mesh, detection.response, level, blobs, out_dir / "response.png"),
        plot_scale_profiles(detection.response, detection.grid, blobs, out_dir / "scale_profiles.png"),
    ]
