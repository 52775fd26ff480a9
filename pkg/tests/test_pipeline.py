"""Whole-pipeline behavior: stage wiring, report contents, K search."""

from __future__ import annotations

import numpy as np
import pytest

import smsr.pipeline as pipeline_module
from smsr.errors import SmsrError, StageFailure
from smsr.evaluation import e3d
from smsr.pipeline import PipelineResult, reconstruct, search_basis_count
from smsr.synthetic import add_noise, generate_low_rank_scene, orthographic_project
from smsr.types import SolverConfig, TrackTable


def test_rigid_reconstruction_matches_truth(rigid_scene):
    truth, _, tracks = rigid_scene
    result = reconstruct(tracks, SolverConfig(K=1))
    error, _ = e3d(result.shapes, truth)
    assert error <= 0.01
    assert result.report.basis_count == 1
    scale = np.linalg.norm(result.centered_tracks.data)
    assert result.report.reprojection_error <= 1e-4 * scale


def test_auto_basis_count_in_report(bending_scene):
    _, _, tracks = bending_scene
    result = reconstruct(tracks)
    assert result.report.basis_count == 2
    assert result.report.config.K == 0  # config echoes the request, not the pick


def test_nonrigid_reconstruction_quality(bending_scene):
    truth, _, tracks = bending_scene
    result = reconstruct(tracks, SolverConfig(K=2))
    error, _ = e3d(result.shapes, truth)
    assert error <= 0.10
    assert result.report.admm_relative_residual <= 1e-4
    orth = np.einsum("tab,tcb->tac", result.poses.blocks, result.poses.blocks)
    assert np.max(np.abs(orth - np.eye(2))) <= 1e-8


def test_report_bookkeeping(bending_scene):
    _, _, tracks = bending_scene
    result = reconstruct(tracks, SolverConfig(K=2))
    report = result.report
    assert set(report.iterations) == {"gram_pg", "gauss_newton", "admm"}
    assert {"pose", "smoothing", "shape", "total"} <= set(report.wall_time)
    assert report.dct_count is not None and report.dct_count >= 2
    for key in (
        "smoothing_skipped",
        "smoothing_auto_skipped",
        "pg_converged",
        "gn_converged",
        "admm_converged",
        "degenerate_frames",
        "rigid_warm_start_selected",
    ):
        assert key in report.flags
    assert not report.flags["smoothing_skipped"]
    assert result.smoothing is not None
    assert result.coefficients.shape == (tracks.frames,)


def test_skip_smoothing_flag(bending_scene):
    _, _, tracks = bending_scene
    result = reconstruct(tracks, SolverConfig(K=2, skip_smoothing=True))
    assert result.smoothing is None
    assert result.report.flags["smoothing_skipped"]
    assert not result.report.flags["smoothing_auto_skipped"]
    assert result.report.dct_count is None
    assert "gauss_newton" not in result.report.iterations


def test_auto_skip_on_large_inputs(monkeypatch, bending_scene):
    _, _, tracks = bending_scene
    monkeypatch.setattr(pipeline_module, "AUTO_SKIP_CELLS", 10)
    skipped = reconstruct(tracks)
    assert skipped.report.flags["smoothing_auto_skipped"]
    assert skipped.smoothing is None
    forced = reconstruct(tracks, force_smoothing=True)
    assert not forced.report.flags["smoothing_skipped"]
    assert forced.smoothing is not None


def test_smoothing_reduces_fit_objective_under_noise(bending_scene):
    _, _, tracks = bending_scene
    noisy = add_noise(tracks, 0.01, seed=7)
    result = reconstruct(noisy, SolverConfig(K=2))
    fit = result.smoothing
    assert fit is not None
    assert fit.objectives[-1] < fit.objectives[0]


def test_pipeline_is_deterministic(bending_scene):
    _, _, tracks = bending_scene
    first = reconstruct(tracks, SolverConfig(K=2))
    second = reconstruct(tracks, SolverConfig(K=2))
    assert np.array_equal(first.shapes.shapes, second.shapes.shapes)
    assert np.array_equal(first.poses.blocks, second.poses.blocks)
    a = first.report.to_dict()
    b = second.report.to_dict()
    a.pop("wall_time"), b.pop("wall_time")
    assert a == b


def test_stage_failures_are_tagged():
    # a track table too narrow for the requested rank fails in the pose stage
    bad = TrackTable(np.random.default_rng(0).standard_normal((8, 4)))
    with pytest.raises(StageFailure) as info:
        reconstruct(bad, SolverConfig(K=2))
    assert info.value.stage == "pose"
    assert "[pose]" in str(info.value)


def test_search_picks_generated_basis_count():
    shapes, poses = generate_low_rank_scene(40, 30, 2, 5, seed=21, deform_scale=0.4)
    tracks = orthographic_project(shapes, poses)
    best, tried = search_basis_count(tracks, candidates=range(1, 4))
    assert set(tried) == {1, 2, 3}
    assert best.report.basis_count in (2, 3)  # K=1 cannot explain the bending
    assert tried[best.report.basis_count] == min(tried.values())
    error, _ = e3d(best.shapes, shapes)
    assert error <= 0.10


def test_search_validates_candidates(bending_scene):
    _, _, tracks = bending_scene
    with pytest.raises(SmsrError):
        search_basis_count(tracks, candidates=())
    with pytest.raises(SmsrError):
        search_basis_count(tracks, candidates=[0, 1])


def test_search_tie_goes_to_smaller_k(monkeypatch, bending_scene):
    _, _, tracks = bending_scene

    calls = []

    def fake_reconstruct(table, config=None, force_smoothing=False):
        calls.append(config.K)
        real = reconstruct(table, config, force_smoothing)
        report = real.report

        class Stub:
            pass

        stub = Stub()
        stub.report = type(report)(
            reprojection_error=1.0,  # identical for every K
            iterations=report.iterations,
            wall_time=report.wall_time,
            config=report.config,
            basis_count=report.basis_count,
            dct_count=report.dct_count,
            admm_relative_residual=report.admm_relative_residual,
            flags=report.flags,
        )
        return stub

    monkeypatch.setattr(pipeline_module, "reconstruct", fake_reconstruct)
    best, tried = pipeline_module.search_basis_count(tracks, candidates=[2, 1])
    assert calls == [1, 2]  # candidates visited in sorted order
    assert best.report.basis_count == 1
    assert tried == {1: 1.0, 2: 1.0}


def test_result_is_complete(rigid_scene):
    _, _, tracks = rigid_scene
    result = reconstruct(tracks, SolverConfig(K=1))
    assert isinstance(result, PipelineResult)
    assert result.shapes.frames == tracks.frames
    assert result.shapes.points == tracks.points
    assert result.admm.iterations == result.report.iterations["admm"]
    assert result.centered_tracks.centered
