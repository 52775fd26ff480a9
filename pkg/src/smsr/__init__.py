"""Sparse non-rigid structure from motion.

Recovers per-frame camera poses and a time-varying 3D shape from 2D point
tracks seen by an orthographic camera, assuming the shape mixes a small
number of basis shapes along smooth trajectories.  Ships with a synthetic
benchmark generator, evaluation metrics and a command line front end.

Submodule imports are lazy so that the CLI can cap the BLAS thread pool via
SMSR_THREADS before numpy loads.
"""

from __future__ import annotations

import importlib

__version__ = "0.1.0"

_EXPORTS = {
    # types
    "TrackTable": "types",
    "CameraPoseSequence": "types",
    "ShapeSequence": "types",
    "MotionMatrix": "types",
    "TrajectoryModel": "types",
    "CorrectiveGram": "types",
    "SolverConfig": "types",
    "ReconstructionReport": "types",
    "vec": "types",
    "unvec": "types",
    "kron_row": "types",
    # file formats
    "load_tracks": "tracks_io",
    "save_tracks": "tracks_io",
    "load_shapes": "tracks_io",
    "save_shapes": "tracks_io",
    "load_poses": "tracks_io",
    "save_poses": "tracks_io",
    "register_to_centroid": "tracks_io",
    "load_config": "tracks_io",
    "save_config": "tracks_io",
    "save_report": "tracks_io",
    "export_ply": "tracks_io",
    # pipeline
    "reconstruct": "pipeline",
    "search_basis_count": "pipeline",
    "PipelineResult": "pipeline",
    # metrics
    "e3d": "evaluation",
    "rms_error": "evaluation",
    "procrustes_align": "evaluation",
    # synthetic scenes
    "generate_low_rank_scene": "synthetic",
    "orthographic_project": "synthetic",
    "add_noise": "synthetic",
}

__all__ = sorted(_EXPORTS) + ["__version__"]


def __getattr__(name: str):
    try:
        module = _EXPORTS[name]
    except KeyError:
        raise AttributeError(f"module 'smsr' has no attribute {name!r}") from None
    value = getattr(importlib.import_module(f".{module}", __name__), name)
    globals()[name] = value
    return value


def __dir__():
    return sorted(set(globals()) | set(_EXPORTS))
