"""Benchmark generator: low-rank scenes, projection, noise injection."""

from __future__ import annotations

import numpy as np
import pytest

from smsr.shape_recovery import rearrange_shape
from smsr.synthetic import add_noise, generate_low_rank_scene, orthographic_project
from smsr.types import CameraPoseSequence, ShapeSequence


def test_generator_is_deterministic():
    first = generate_low_rank_scene(12, 9, 2, 4, seed=42)
    second = generate_low_rank_scene(12, 9, 2, 4, seed=42)
    assert np.array_equal(first[0].shapes, second[0].shapes)
    assert np.array_equal(first[1].blocks, second[1].blocks)
    other = generate_low_rank_scene(12, 9, 2, 4, seed=43)
    assert not np.array_equal(first[0].shapes, other[0].shapes)


def test_zero_deformation_freezes_the_shape():
    shapes, poses = generate_low_rank_scene(20, 15, 2, 4, seed=1, deform_scale=0.0)
    assert np.max(np.abs(shapes.shapes - shapes.shapes[0])) <= 1e-12
    tracks = orthographic_project(shapes, poses)
    spectrum = np.linalg.svd(tracks.data, compute_uv=False)
    assert spectrum[3] <= 1e-10 * spectrum[0]


def test_mean_removed_rearranged_rank_is_basis_count():
    shapes, _ = generate_low_rank_scene(40, 25, 3, 6, seed=8, deform_scale=0.5)
    flat = rearrange_shape(shapes)
    centered = flat - flat.mean(axis=0, keepdims=True)
    spectrum = np.linalg.svd(centered, compute_uv=False)
    assert spectrum[3] <= 1e-10 * spectrum[0]


def test_generated_poses_are_orthonormal_and_move():
    _, poses = generate_low_rank_scene(30, 10, 1, 3, seed=2)
    products = np.einsum("tab,tcb->tac", poses.blocks, poses.blocks)
    assert np.max(np.abs(products - np.eye(2))) <= 1e-12
    assert np.max(np.abs(poses.blocks - poses.blocks[0])) > 0.1


def test_rotation_amplitude_is_bounded():
    _, wide = generate_low_rank_scene(50, 8, 1, 3, seed=3, max_angle_deg=30.0)
    _, narrow = generate_low_rank_scene(50, 8, 1, 3, seed=3, max_angle_deg=5.0)
    # narrower sweep keeps every pose closer to the first one
    wide_span = np.max(np.linalg.norm(wide.blocks - wide.blocks[0], axis=(1, 2)))
    narrow_span = np.max(np.linalg.norm(narrow.blocks - narrow.blocks[0], axis=(1, 2)))
    assert narrow_span < wide_span


def test_generator_validates_dimensions():
    with pytest.raises(ValueError):
        generate_low_rank_scene(10, 5, 3, 2, seed=0)  # K > d_motion
    with pytest.raises(ValueError):
        generate_low_rank_scene(4, 5, 1, 6, seed=0)  # d_motion > T
    with pytest.raises(ValueError):
        generate_low_rank_scene(10, 5, 1, 3, seed=0, deform_scale=-0.1)


def test_projection_with_plain_cameras_takes_xy_rows(rng):
    shapes = ShapeSequence(rng.standard_normal((3, 3, 7)))
    poses = CameraPoseSequence(np.tile(np.eye(3)[:2], (3, 1, 1)))
    tracks = orthographic_project(shapes, poses)
    raw = shapes.shapes[:, :2].reshape(6, 7)
    centered = raw - raw.mean(axis=1, keepdims=True)
    assert np.max(np.abs(tracks.data - centered)) <= 1e-12
    assert tracks.centered


def test_projection_of_zero_shapes_is_zero(rigid_scene):
    _, poses, _ = rigid_scene
    zero = ShapeSequence(np.zeros((poses.frames, 3, 5)))
    assert not orthographic_project(zero, poses).data.any()


def test_projection_dimension_guard(rng, rigid_scene):
    _, poses, _ = rigid_scene
    with pytest.raises(ValueError):
        orthographic_project(ShapeSequence(rng.standard_normal((3, 3, 5))), poses)


def test_noise_zero_sigma_is_identity(rigid_scene):
    _, _, tracks = rigid_scene
    assert np.array_equal(add_noise(tracks, 0.0).data, tracks.data)


def test_noise_is_reproducible(rigid_scene):
    _, _, tracks = rigid_scene
    assert np.array_equal(add_noise(tracks, 0.01, seed=5).data, add_noise(tracks, 0.01, seed=5).data)
    assert not np.array_equal(add_noise(tracks, 0.01, seed=5).data, add_noise(tracks, 0.01, seed=6).data)


def test_noise_magnitude_matches_target():
    shapes, poses = generate_low_rank_scene(100, 100, 2, 10, seed=9)
    tracks = orthographic_project(shapes, poses)
    sigma_rel = 0.02
    noisy = add_noise(tracks, sigma_rel, seed=1)
    target = sigma_rel * np.sqrt(np.mean(tracks.data**2))
    measured = float(np.std(noisy.data - tracks.data))
    assert abs(measured - target) <= 0.05 * target


def test_noise_keeps_registration(rigid_scene):
    _, _, tracks = rigid_scene
    noisy = add_noise(tracks, 0.03, seed=4)
    assert noisy.centered
    assert np.max(np.abs(noisy.data.sum(axis=1))) <= 1e-9 * noisy.points
