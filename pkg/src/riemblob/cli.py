"""Command-line entry point: ``riemblob {detect,scale-space,hessian,descriptors,synth}``.

Every flag mirrors a key of the optional JSON ``--config`` document; flags
given on the command line win. Exit codes: 0 ok, 2 usage, 3 parse,
4 numeric/solver, 5 insufficient data.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from . import detector, descriptor, report
from .errors import InsufficientDataError, ParseError, RiemBlobError, UsageError
from .hessian import HessianEstimator
from .mesh import cotangent_laplacian, load_signal, read_mesh, write_mesh, write_signal
from .pipeline import detect
from .response import KINDS
from .scalespace import DEFAULT_LEVELS, DEFAULT_SUBSTEPS, default_scale_grid, heat_flow, make_scale_grid
from .synth import Gaussian, icosphere, planar_grid, plant_gaussians

logger = logging.getLogger("riemblob")

RESPONSE_CHOICES = ("detsum", "theorem", "mean")

# config key -> default; None means "derive from the mesh" or "not set"
DEFAULTS = {
    "mesh": None,
    "signal": None,
    "out": ".",
    "response": "detsum",
    "tmin": None,
    "tmax": None,
    "levels": DEFAULT_LEVELS,
    "substeps": DEFAULT_SUBSTEPS,
    "threshold": 0.0,
    "polarity": "both",
    "overlap": 0.5,
    "boundary_margin": 2,
    "plots": True,
    "seed": 0,
    "words": 16,
    "max_pairs": descriptor.DEFAULT_MAX_PAIRS,
    "train": False,
    "codebook": None,
    "blobs": None,
    "level": None,
}


def _version():
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "unknown"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common(p, multi=False):
    p.add_argument("--config", help="JSON document whose keys mirror the flags")
    if multi:
        p.add_argument("--mesh", action="append", help="mesh file (OFF or ASCII PLY); repeatable")
        p.add_argument("--signal", action="append", help="sidecar signal CSV, paired with --mesh")
    else:
        p.add_argument("--mesh", help="mesh file (OFF or ASCII PLY)")
        p.add_argument("--signal", help="sidecar signal CSV (optional for PLY with ch* properties)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--tmin", type=float)
    p.add_argument("--tmax", type=float)
    p.add_argument("--levels", type=int)
    p.add_argument("--substeps", type=int)
    p.add_argument("-v", "--verbose", action="store_true")


def _detector_flags(p):
    p.add_argument("--response", choices=RESPONSE_CHOICES)
    p.add_argument("--threshold", type=float)
    p.add_argument("--polarity", choices=("both", "max", "min"))
    p.add_argument("--overlap", type=float, help="suppression overlap factor in [0, 1]")
    p.add_argument("--boundary-margin", dest="boundary_margin", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="riemblob", description="Riemannian blob detection on triangle meshes")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("detect", help="detect blobs; writes blobs.json, blobs.csv, manifest.json")
    _common(p)
    _detector_flags(p)
    p.add_argument("--no-plots", dest="plots", action="store_false", default=None)

    p = sub.add_parser("scale-space", help="dump every scale level as sidecar CSV")
    _common(p)

    p = sub.add_parser("hessian", help="dump per-vertex Hessians as CSV")
    _common(p)
    p.add_argument("--level", type=int, help="dump only this level index")

    p = sub.add_parser("descriptors", help="blob-pair bag-of-words descriptors per surface")
    _common(p, multi=True)
    _detector_flags(p)
    p.add_argument("--blobs", action="append", help="precomputed blobs.json; repeatable")
    p.add_argument("--train", action="store_true", default=None, help="train a codebook")
    p.add_argument("--codebook", help="codebook JSON to encode against")
    p.add_argument("--words", type=int)
    p.add_argument("--max-pairs", dest="max_pairs", type=int)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("synth", help="write a synthetic mesh, signal and ground truth")
    p.add_argument("kind", choices=("plane", "icosphere"))
    p.add_argument("--n", type=int, default=64, help="grid vertices per side (plane)")
    p.add_argument("--extent", type=float, default=1.0, help="side length (plane)")
    p.add_argument("--subdiv", type=int, default=3, help="subdivision level (icosphere)")
    p.add_argument("--radius", type=float, default=1.0, help="sphere radius (icosphere)")
    p.add_argument("--bump", type=float, help="amplitude of one Gaussian at --center")
    p.add_argument("--sigma", type=float, help="bump width (default: 1/8 of the bounding diagonal)")
    p.add_argument("--center", help="bump center 'x,y,z' (default: mesh centroid, snapped to a vertex)")
    p.add_argument("--gaussians", help="JSON list of {center, sigma, channel, amplitude}")
    p.add_argument("--channels", type=int, help="number of signal channels")
    p.add_argument("--format", choices=("off", "ply"), default="off")
    p.add_argument("--name", default="scene", help="output file stem")
    p.add_argument("--out", default=".")
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


def resolve_config(args) -> dict:
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ParseError(f"config {args.config}: {exc}") from None
        if not isinstance(loaded, dict):
            raise ParseError(f"config {args.config}: top level must be an object")
        unknown = sorted(set(loaded) - set(DEFAULTS))
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        cfg.update(loaded)
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    _validate(cfg)
    return cfg


def _validate(cfg):
    if cfg["response"] not in KINDS:
        raise UsageError(f"unknown response kind {cfg['response']!r}")
    if cfg["polarity"] not in ("both", "max", "min"):
        raise UsageError(f"polarity must be both, max or min; got {cfg['polarity']!r}")
    if int(cfg["levels"]) < 2:
        raise UsageError("levels must be >= 2")
    if int(cfg["substeps"]) < 1:
        raise UsageError("substeps must be >= 1")
    if float(cfg["threshold"]) < 0:
        raise UsageError("threshold must be >= 0")
    if not 0 <= float(cfg["overlap"]) <= 1:
        raise UsageError("overlap must lie in [0, 1]")
    if int(cfg["words"]) < 2:
        raise UsageError("words must be >= 2")
    if int(cfg["max_pairs"]) < 1:
        raise UsageError("max_pairs must be >= 1")
    for key in ("tmin", "tmax"):
        if cfg[key] is not None and not float(cfg[key]) > 0:
            raise UsageError(f"{key} must be > 0")
    if cfg["tmin"] is not None and cfg["tmax"] is not None and not cfg["tmin"] < cfg["tmax"]:
        raise UsageError("tmin must be < tmax")


def _load_surface(mesh_path, signal_path):
    if mesh_path is None:
        raise UsageError("--mesh is required")
    mesh, channels = read_mesh(mesh_path)
    if signal_path is not None:
        signal = load_signal(signal_path, mesh.n_vertices)
    elif channels is not None:
        signal = channels
    else:
        raise UsageError(f"{mesh_path}: no signal given and the mesh carries no ch* channels")
    return mesh, signal


def _grid(mesh, cfg):
    default = default_scale_grid(mesh, int(cfg["levels"]))
    tmin = cfg["tmin"] if cfg["tmin"] is not None else default[0]
    tmax = cfg["tmax"] if cfg["tmax"] is not None else default[-1]
    return make_scale_grid(tmin, tmax, int(cfg["levels"]))


def _detector_config(cfg):
    pol = cfg["polarity"]
    return detector.DetectorConfig(
        threshold=float(cfg["threshold"]),
        detect_minima=pol in ("both", "min"),
        detect_maxima=pol in ("both", "max"),
        suppression_overlap=float(cfg["overlap"]),
        boundary_margin=int(cfg["boundary_margin"]),
    )


def _mesh_stats(mesh):
    return {
        "vertices": mesh.n_vertices,
        "faces": mesh.n_faces,
        "closed": mesh.is_closed,
        "mean_edge_length": mesh.mean_edge_length,
        "bbox_diagonal": mesh.bbox_diagonal,
    }


def _write_manifest(out, command, cfg, started, **extra):
    manifest = {
        "command": command,
        "version": _version(),
        "config": cfg,
        "elapsed_seconds": time.perf_counter() - started,
        **extra,
    }
    with open(Path(out) / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _out_dir(cfg):
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_detect(cfg):
    started = time.perf_counter()
    mesh, signal = _load_surface(cfg["mesh"], cfg["signal"])
    grid = _grid(mesh, cfg)
    out = _out_dir(cfg)
    res = detect(mesh, signal, grid, cfg["response"], _detector_config(cfg), int(cfg["substeps"]))
    detector.write_blobs_json(out / "blobs.json", res.blobs)
    detector.write_blobs_csv(out / "blobs.csv", res.blobs)
    figures = []
    if cfg["plots"]:
        figures = [p.name for p in report.render_detection(mesh, res, out)]
    _write_manifest(
        out, "detect", cfg, started,
        mesh_stats=_mesh_stats(mesh),
        channels=int(res.scalespace.n_channels),
        scales=[float(t) for t in grid.scales],
        n_blobs=len(res.blobs),
        figures=figures,
    )
    logger.info("%d blobs written to %s", len(res.blobs), out)
    return 0


def cmd_scale_space(cfg):
    started = time.perf_counter()
    mesh, signal = _load_surface(cfg["mesh"], cfg["signal"])
    grid = _grid(mesh, cfg)
    out = _out_dir(cfg)
    ss = heat_flow(mesh, cotangent_laplacian(mesh), signal, grid, int(cfg["substeps"]))
    files = []
    for k, lvl in enumerate(ss.levels):
        name = f"level_{k:02d}.csv"
        write_signal(out / name, lvl)
        files.append(name)
    _write_manifest(out, "scale-space", cfg, started, mesh_stats=_mesh_stats(mesh),
                    scales=[float(t) for t in grid.scales], files=files)
    return 0


def cmd_hessian(cfg):
    started = time.perf_counter()
    mesh, signal = _load_surface(cfg["mesh"], cfg["signal"])
    grid = _grid(mesh, cfg)
    out = _out_dir(cfg)
    ss = heat_flow(mesh, cotangent_laplacian(mesh), signal, grid, int(cfg["substeps"]))
    est = HessianEstimator(mesh)
    levels = range(len(grid)) if cfg["level"] is None else [int(cfg["level"])]
    files = []
    for k in levels:
        if not 0 <= k < len(grid):
            raise UsageError(f"level {k} out of range [0, {len(grid)})")
        name = f"hessian_level_{k:02d}.csv"
        est.hessian(ss.levels[k]).write_csv(out / name)
        files.append(name)
    _write_manifest(out, "hessian", cfg, started, mesh_stats=_mesh_stats(mesh),
                    scales=[float(t) for t in grid.scales], files=files,
                    invalid_vertices=int(np.count_nonzero(~est.valid)))
    return 0


def _as_list(x):
    if x is None:
        return []
    return list(x) if isinstance(x, (list, tuple)) else [x]


def cmd_descriptors(cfg):
    started = time.perf_counter()
    out = _out_dir(cfg)
    meshes, signals, blob_files = _as_list(cfg["mesh"]), _as_list(cfg["signal"]), _as_list(cfg["blobs"])
    if signals and len(signals) != len(meshes):
        raise UsageError(f"{len(meshes)} --mesh but {len(signals)} --signal")
    if not meshes and not blob_files:
        raise UsageError("need at least one surface (--mesh or --blobs)")
    if not cfg["train"] and cfg["codebook"] is None:
        raise UsageError("pass --train or --codebook")

    surfaces = []  # (surface_id, blobs)
    det_cfg = _detector_config(cfg)
    for i, mp in enumerate(meshes):
        mesh, signal = _load_surface(mp, signals[i] if signals else None)
        res = detect(mesh, signal, _grid(mesh, cfg), cfg["response"], det_cfg, int(cfg["substeps"]))
        surfaces.append((Path(mp).stem, res.blobs))
    for bp in blob_files:
        try:
            surfaces.append((Path(bp).stem if Path(bp).stem != "blobs" else Path(bp).parent.name,
                             detector.read_blobs_json(bp)))
        except (OSError, ValueError, KeyError) as exc:
            raise ParseError(f"{bp}: {exc}") from None

    pairs = [(sid, descriptor.make_pairs(b, int(cfg["max_pairs"]))) for sid, b in surfaces]
    words = int(cfg["words"])
    if cfg["train"]:
        corpus = [f for _, fs in pairs for f in fs]
        try:
            codebook = descriptor.train_codebook(corpus, words, int(cfg["seed"]))
        except InsufficientDataError as exc:
            stats = ", ".join(f"{sid}: {len(b)} blobs/{len(fs)} pairs"
                              for (sid, b), (_, fs) in zip(surfaces, pairs))
            raise InsufficientDataError(f"{exc} [{stats}]") from None
        codebook.save(out / "codebook.json")
    else:
        try:
            codebook = descriptor.Codebook.load(cfg["codebook"])
        except OSError as exc:
            raise ParseError(f"{cfg['codebook']}: {exc}") from None
    rows = []
    for sid, fs in pairs:
        if not fs:
            logger.warning("surface %s has no blob pairs; emitting a zero descriptor", sid)
        rows.append((sid, descriptor.encode(fs, codebook)))
    descriptor.write_descriptors_csv(out / "descriptors.csv", rows, codebook.n_words)
    _write_manifest(out, "descriptors", cfg, started,
                    surfaces=[{"id": sid, "blobs": len(b), "pairs": len(fs)}
                              for (sid, b), (_, fs) in zip(surfaces, pairs)],
                    trained=bool(cfg["train"]))
    return 0


def cmd_synth(args):
    if args.kind == "plane":
        mesh = planar_grid(args.n, args.extent)
    else:
        mesh = icosphere(args.subdiv, args.radius)
    gaussians = []
    if args.gaussians:
        try:
            with open(args.gaussians) as fh:
                gaussians = [Gaussian.from_dict(d) for d in json.load(fh)]
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise ParseError(f"{args.gaussians}: {exc}") from None
    if args.bump is not None:
        if args.center:
            try:
                center = tuple(float(c) for c in args.center.split(","))
            except ValueError:
                raise UsageError(f"bad --center {args.center!r}") from None
            if len(center) != 3:
                raise UsageError("--center needs three comma-separated numbers")
        else:
            centroid = mesh.vertices.mean(axis=0)
            center = tuple(mesh.vertices[np.argmin(np.linalg.norm(mesh.vertices - centroid, axis=1))])
        sigma = args.sigma if args.sigma is not None else mesh.bbox_diagonal / 8.0
        gaussians.append(Gaussian(center, sigma, 0, args.bump))
    if args.channels is not None and args.channels < 1:
        raise UsageError("--channels must be >= 1")
    scene = plant_gaussians(mesh, gaussians, args.channels)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    mesh_path = out / f"{args.name}.{args.format}"
    write_mesh(mesh_path, mesh, scene.signal if args.format == "ply" else None)
    write_signal(out / f"{args.name}.csv", scene.signal)
    with open(out / f"{args.name}_truth.json", "w") as fh:
        fh.write(scene.ground_truth_json() + "\n")
    logger.info("wrote %s (V=%d)", mesh_path, mesh.n_vertices)
    return 0


COMMANDS = {
    "detect": cmd_detect,
    "scale-space": cmd_scale_space,
    "hessian": cmd_hessian,
    "descriptors": cmd_descriptors,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(
            level=logging.INFO if args.verbose else logging.WARNING,
            format="%(levelname)s %(name)s: %(message)s",
        )
        if args.command == "synth":
            return cmd_synth(args)
        return COMMANDS[args.command](resolve_config(args))
    except RiemBlobError as exc:
        msg = " ".join(str(exc).split())
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
