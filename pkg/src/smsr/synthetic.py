"""Seeded synthetic scenes for benchmarks and tests.

Scenes follow the same low-rank model the solver assumes: K random basis
shapes mixed by smooth trajectories (the first coefficient is pinned to one so
a dominant rigid component always exists), viewed by a camera sweeping
sinusoidally about the vertical axis.  All randomness comes from numpy's
PCG64 generator seeded explicitly, so every fixture is reproducible bit for
bit.
"""

from __future__ import annotations

import math

import numpy as np

from .tracks_io import register_to_centroid
from .trajectory_smoothing import dct_basis
from .types import CameraPoseSequence, ShapeSequence, TrackTable

__all__ = [
    "generate_low_rank_scene",
    "orthographic_project",
    "add_noise",
]


def generate_low_rank_scene(
    frames: int,
    points: int,
    basis_count: int,
    dct_count: int,
    seed: int = 0,
    deform_scale: float = 0.3,
    max_angle_deg: float = 30.0,
) -> tuple[ShapeSequence, CameraPoseSequence]:
    """Generate a smooth low-rank scene and its camera path.

    Basis shapes are uniform on [-1, 1]; mixing coefficients come from the
    first ``dct_count`` DCT vectors with the first coefficient identically one
    and the others scaled to peak at ``deform_scale`` (zero gives a rigid
    scene).  The camera rotates about the vertical axis through one sinusoidal
    sweep of amplitude ``max_angle_deg``.
    """
    if frames < 1 or points < 1 or basis_count < 1:
        raise ValueError("frames, points and basis_count must be positive")
    if not basis_count <= dct_count <= frames:
        raise ValueError(
            f"need basis_count <= dct_count <= frames, got "
            f"({basis_count}, {dct_count}, {frames})"
        )
    if deform_scale < 0:
        raise ValueError("deform_scale must be nonnegative")
    rng = np.random.default_rng(seed)
    basis = rng.uniform(-1.0, 1.0, size=(3 * basis_count, points))

    omega = dct_basis(frames, dct_count)
    weights = np.zeros((dct_count, basis_count))
    weights[0, 0] = math.sqrt(frames)  # omega[:, 0] is 1/sqrt(T): coefficient 1 everywhere
    for k in range(1, basis_count):
        column = rng.uniform(-1.0, 1.0, size=dct_count)
        profile = omega @ column
        peak = float(np.abs(profile).max())
        if peak > 0:
            weights[:, k] = column * (deform_scale / peak)
    coefficients = omega @ weights

    shapes = np.einsum(
        "tk,kan->tan", coefficients, basis.reshape(basis_count, 3, points)
    )

    if frames == 1:
        angles = np.zeros(1)
    else:
        sweep = np.arange(frames, dtype=np.float64) / (frames - 1)
        angles = math.radians(max_angle_deg) * np.sin(2.0 * np.pi * sweep)
    cos, sin = np.cos(angles), np.sin(angles)
    blocks = np.zeros((frames, 2, 3))
    blocks[:, 0, 0] = cos
    blocks[:, 0, 2] = sin
    blocks[:, 1, 1] = 1.0
    return ShapeSequence(shapes), CameraPoseSequence(blocks)


def orthographic_project(shapes: ShapeSequence, poses: CameraPoseSequence) -> TrackTable:
    """Project each frame through its camera block and register the centroid."""
    if shapes.frames != poses.frames:
        raise ValueError("shapes and poses disagree on the frame count")
    tracks = np.einsum("tab,tbn->tan", poses.blocks, shapes.shapes)
    table = TrackTable(tracks.reshape(2 * shapes.frames, shapes.points), centered=False)
    return register_to_centroid(table)


def add_noise(tracks: TrackTable, sigma_rel: float, seed: int = 0) -> TrackTable:
    """Add white Gaussian noise scaled to the RMS track magnitude.

    The noise standard deviation is ``sigma_rel`` times the root mean square
    of all track entries; the centroid is registered again afterwards.
    """
    if sigma_rel < 0:
        raise ValueError("sigma_rel must be nonnegative")
    if sigma_rel == 0:
        return tracks if tracks.centered else register_to_centroid(tracks)
    rng = np.random.default_rng(seed)
    rms = math.sqrt(float(np.mean(tracks.data**2)))
    noisy = tracks.data + rng.normal(0.0, sigma_rel * rms, size=tracks.data.shape)
    return register_to_centroid(TrackTable(noisy, centered=False))
