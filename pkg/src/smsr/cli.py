"""Command line interface.

Subcommands: ``reconstruct`` (tracks -> shapes + poses + report),
``evaluate`` (reconstruction vs ground truth), ``synth`` (seeded fixtures)
and ``export`` (shapes -> per-frame PLY point clouds).

Exit codes: 0 on success, 2 when an iterative solver aborts (divergence),
1 for every other failure (bad flags, missing or malformed files, degenerate
inputs).  Error messages are tagged with the stage that failed.

The environment variable ``SMSR_THREADS`` caps the number of BLAS threads;
it must be read before numpy is first imported, which is why this module
touches the environment at import time.
"""

from __future__ import annotations

import os


def _apply_thread_cap() -> None:
    value = os.environ.get("SMSR_THREADS", "").strip()
    if value.isdigit() and int(value) > 0:
        for name in (
            "OMP_NUM_THREADS",
            "OPENBLAS_NUM_THREADS",
            "MKL_NUM_THREADS",
            "NUMEXPR_NUM_THREADS",
        ):
            os.environ.setdefault(name, value)


_apply_thread_cap()  # keep above the numpy-backed imports

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import tracks_io
from .errors import DivergenceError, SmsrError, StageFailure
from .evaluation import e3d, rms_error
from .pipeline import reconstruct, search_basis_count
from .synthetic import add_noise, generate_low_rank_scene, orthographic_project
from .types import SolverConfig

__all__ = ["main"]


def _parse_k_range(text: str) -> list[int]:
    """Parse 'a..b' (inclusive) into a list of candidate basis counts."""
    parts = text.split("..")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected 'a..b', got {text!r}")
    try:
        low, high = int(parts[0]), int(parts[1])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers in 'a..b', got {text!r}")
    if low < 1 or high < low:
        raise argparse.ArgumentTypeError(f"need 1 <= a <= b, got {text!r}")
    return list(range(low, high + 1))


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smsr",
        description="Sparse non-rigid structure from motion on tracked 2D points.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    rec = commands.add_parser(
        "reconstruct", help="recover poses and 3D shapes from a tracks file"
    )
    rec.add_argument("tracks", type=Path, help="NRSFM-TRACKS v1 input file")
    rec.add_argument("--config", type=Path, help="solver configuration JSON")
    rec.add_argument("--K", type=_positive_int, help="number of basis shapes (default: automatic)")
    rec.add_argument("--search-K", type=_parse_k_range, metavar="A..B",
                     help="grid-search the basis count, keep the best reprojection")
    rec.add_argument("--d", type=_positive_int, help="DCT resolution of the trajectory model")
    rec.add_argument("--mu", type=float, help="initial ADMM penalty")
    rec.add_argument("--rho", type=float, help="ADMM penalty growth factor")
    rec.add_argument("--tol", type=float, help="ADMM relative residual tolerance")
    rec.add_argument("--max-iters", type=_positive_int, help="ADMM iteration cap")
    rec.add_argument("--skip-smoothing", action="store_true",
                     help="skip the trajectory smoothing stage")
    rec.add_argument("--force-smoothing", action="store_true",
                     help="smooth even very large inputs (no automatic skip)")
    rec.add_argument("--seed", type=int, help="seed recorded in the configuration")
    rec.add_argument("--out", type=Path, default=Path("."),
                     help="output directory (default: current directory)")
    rec.set_defaults(handler=_cmd_reconstruct)

    ev = commands.add_parser(
        "evaluate", help="compare a reconstruction against ground-truth shapes"
    )
    ev.add_argument("reconstruction", type=Path, help="NRSFM-SHAPES v1 file under test")
    ev.add_argument("truth", type=Path, help="NRSFM-SHAPES v1 ground truth")
    ev.add_argument("--no-reflection", action="store_true",
                    help="forbid reflections in the alignment")
    ev.add_argument("--error-power", type=int, choices=(1, 2), default=2,
                    help="per-point distance power in e3d (default 2)")
    ev.add_argument("--sequence-alignment", action="store_true",
                    help="fit one alignment to the whole clip instead of per frame")
    ev.set_defaults(handler=_cmd_evaluate)

    syn = commands.add_parser("synth", help="generate a seeded synthetic fixture")
    syn.add_argument("--T", type=_positive_int, required=True, help="frame count")
    syn.add_argument("--N", type=_positive_int, required=True, help="point count")
    syn.add_argument("--K", type=_positive_int, default=1, help="basis shape count")
    syn.add_argument("--d-motion", type=_positive_int, default=0,
                     help="DCT resolution of the generated coefficients (default: T/10 rule)")
    syn.add_argument("--deform-scale", type=float, default=0.3,
                     help="peak magnitude of the non-rigid coefficients (0 = rigid)")
    syn.add_argument("--noise", type=float, default=0.0,
                     help="relative Gaussian track noise (fraction of the RMS magnitude)")
    syn.add_argument("--max-angle", type=float, default=30.0,
                     help="camera sweep amplitude in degrees")
    syn.add_argument("--seed", type=int, default=0, help="generator seed")
    syn.add_argument("--out", type=Path, required=True,
                     help="output prefix; writes PREFIX.tracks.txt/.shapes.txt/.poses.txt")
    syn.set_defaults(handler=_cmd_synth)

    exp = commands.add_parser("export", help="export shapes as per-frame ASCII PLY files")
    exp.add_argument("shapes", type=Path, help="NRSFM-SHAPES v1 input file")
    exp.add_argument("--out", type=Path, default=Path("."), help="output directory")
    exp.set_defaults(handler=_cmd_export)
    return parser


def _config_from_args(args: argparse.Namespace) -> SolverConfig:
    config = tracks_io.load_config(args.config) if args.config else SolverConfig()
    overrides = {}
    if args.K is not None:
        overrides["K"] = args.K
    if args.d is not None:
        overrides["d"] = args.d
    if args.mu is not None:
        overrides["mu0"] = args.mu
    if args.rho is not None:
        overrides["rho"] = args.rho
    if args.tol is not None:
        overrides["admm_tol"] = args.tol
    if args.max_iters is not None:
        overrides["admm_max_iters"] = args.max_iters
    if args.skip_smoothing:
        overrides["skip_smoothing"] = True
    if args.seed is not None:
        overrides["seed"] = args.seed
    return replace(config, **overrides) if overrides else config


def _cmd_reconstruct(args: argparse.Namespace) -> int:
    tracks = tracks_io.load_tracks(args.tracks)
    config = _config_from_args(args)
    if args.search_K:
        result, tried = search_basis_count(
            tracks, config, args.search_K, force_smoothing=args.force_smoothing
        )
        for k in sorted(tried):
            print(f"K={k}: reprojection {tried[k]:.6e}")
    else:
        result = reconstruct(tracks, config, force_smoothing=args.force_smoothing)
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    tracks_io.save_shapes(result.shapes, out / "shapes.txt")
    tracks_io.save_poses(result.poses, out / "poses.txt")
    tracks_io.save_report(result.report, out / "report.json")
    report = result.report
    print(
        f"wrote shapes.txt, poses.txt, report.json to {out} "
        f"(K={report.basis_count}, reprojection {report.reprojection_error:.6e})"
    )
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    recon = tracks_io.load_shapes(args.reconstruction)
    truth = tracks_io.load_shapes(args.truth)
    alignment = "sequence" if args.sequence_alignment else "frame"
    allow_reflection = not args.no_reflection
    error, per_frame = e3d(
        recon, truth,
        allow_reflection=allow_reflection,
        alignment=alignment,
        error_power=args.error_power,
    )
    rms = rms_error(recon, truth, allow_reflection=allow_reflection, alignment=alignment)
    print(json.dumps(
        {"e3d": error, "rms": rms, "per_frame": [float(v) for v in per_frame]},
        sort_keys=True,
    ))
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    frames, points = args.T, args.N
    dct_count = args.d_motion
    if dct_count == 0:
        from .trajectory_smoothing import default_dct_count

        dct_count = default_dct_count(frames, args.K)
    shapes, poses = generate_low_rank_scene(
        frames, points, args.K, dct_count,
        seed=args.seed, deform_scale=args.deform_scale, max_angle_deg=args.max_angle,
    )
    tracks = orthographic_project(shapes, poses)
    if args.noise > 0:
        tracks = add_noise(tracks, args.noise, seed=args.seed)
    prefix: Path = args.out
    if prefix.parent != Path(""):
        prefix.parent.mkdir(parents=True, exist_ok=True)
    tracks_path = prefix.with_name(prefix.name + ".tracks.txt")
    shapes_path = prefix.with_name(prefix.name + ".shapes.txt")
    poses_path = prefix.with_name(prefix.name + ".poses.txt")
    tracks_io.save_tracks(tracks, tracks_path)
    tracks_io.save_shapes(shapes, shapes_path)
    tracks_io.save_poses(poses, poses_path)
    print(f"wrote {tracks_path}, {shapes_path}, {poses_path}")
    return 0


def _cmd_export(args: argparse.Namespace) -> int:
    shapes = tracks_io.load_shapes(args.shapes)
    written = tracks_io.export_ply(shapes, args.out)
    print(f"wrote {len(written)} PLY files to {args.out}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    command = getattr(args, "command", "cli")
    try:
        return args.handler(args)
    except StageFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2 if isinstance(exc.cause, DivergenceError) else 1
    except DivergenceError as exc:
        print(f"error: [{command}] {exc}", file=sys.stderr)
        return 2
    except (OSError, SmsrError, ValueError) as exc:
        print(f"error: [{command}] {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
