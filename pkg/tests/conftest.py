"""Shared fixtures: a seeded generator and two small reference scenes.

The scenes are session-scoped because several files exercise the same
geometry; everything is deterministic, so sharing them is safe.
"""

from __future__ import annotations

import numpy as np
import pytest

from smsr.synthetic import generate_low_rank_scene, orthographic_project
from smsr.tracks_io import register_to_centroid
from smsr.types import TrackTable


@pytest.fixture
def rng():
    return np.random.default_rng(20240819)


@pytest.fixture(scope="session")
def rigid_scene():
    """Rigid sparse benchmark layout: 50 frames, 40 points, one basis shape."""
    shapes, poses = generate_low_rank_scene(50, 40, 1, 5, seed=0, deform_scale=0.0)
    return shapes, poses, orthographic_project(shapes, poses)


@pytest.fixture(scope="session")
def bending_scene():
    """Small non-rigid scene: 30 frames, 20 points, two basis shapes."""
    shapes, poses = generate_low_rank_scene(30, 20, 2, 5, seed=3, deform_scale=0.4)
    return shapes, poses, orthographic_project(shapes, poses)


@pytest.fixture
def track_factory(rng):
    def make(frames: int, points: int, centered: bool = True) -> TrackTable:
        table = TrackTable(rng.standard_normal((2 * frames, points)))
        return register_to_centroid(table) if centered else table

    return make
