"""Value objects and the vec / kron_row helpers."""

from __future__ import annotations

import numpy as np
import pytest

from smsr.errors import ConfigError
from smsr.types import (
    CameraPoseSequence,
    CorrectiveGram,
    MotionMatrix,
    ReconstructionReport,
    ShapeSequence,
    SolverConfig,
    TrackTable,
    TrajectoryModel,
    kron_row,
    unvec,
    vec,
)


def test_vec_stacks_columns():
    assert np.array_equal(vec(np.array([[1.0, 3.0], [2.0, 4.0]])), [1.0, 2.0, 3.0, 4.0])


def test_vec_zero_matrix():
    assert np.array_equal(vec(np.zeros((2, 3))), np.zeros(6))


def test_vec_rejects_non_matrix():
    with pytest.raises(ValueError):
        vec(np.zeros(4))


def test_vec_unvec_round_trip(rng):
    m = rng.standard_normal((3, 2))
    assert np.array_equal(unvec(vec(m), 3, 2), m)
    m = rng.standard_normal((4, 4))
    assert np.array_equal(unvec(vec(m), 4, 4), m)


def test_unvec_size_mismatch():
    with pytest.raises(ValueError):
        unvec(np.zeros(5), 2, 3)


def test_kron_row_selects_single_entry():
    row = kron_row(np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    assert np.array_equal(row, [0.0, 0.0, 1.0, 0.0])
    f = np.array([[1.0, 2.0], [2.0, 5.0]])
    assert row @ vec(f) == f[0, 1]


def test_kron_row_trace_like_sum():
    assert kron_row(np.ones(2), np.ones(2)) @ vec(np.eye(2)) == 2.0


def test_kron_row_matches_quadratic_form(rng):
    """r @ vec(F) must equal a F b' for random rows and symmetric F."""
    for _ in range(100):
        a = rng.standard_normal(4)
        b = rng.standard_normal(4)
        f = rng.standard_normal((4, 4))
        f = f + f.T
        direct = float(a @ f @ b)
        assert abs(float(kron_row(a, b) @ vec(f)) - direct) <= 1e-12 * (1.0 + abs(direct))


def test_kron_row_length_mismatch():
    with pytest.raises(ValueError):
        kron_row(np.ones(2), np.ones(3))


def test_track_table_shape_checks():
    with pytest.raises(ValueError):
        TrackTable(np.zeros((3, 4)))  # odd row count
    with pytest.raises(ValueError):
        TrackTable(np.zeros((0, 4)))
    with pytest.raises(ValueError):
        TrackTable(np.zeros((2, 0)))
    with pytest.raises(ValueError):
        TrackTable(np.array([[np.nan, 0.0], [0.0, 0.0]]))


def test_track_table_centered_flag_is_verified():
    data = np.array([[1.0, 2.0], [0.5, -0.5]])
    with pytest.raises(ValueError):
        TrackTable(data, centered=True)
    TrackTable(data - data.mean(axis=1, keepdims=True), centered=True)


def test_track_table_views_and_immutability():
    table = TrackTable(np.arange(8.0).reshape(4, 2))
    assert table.frames == 2 and table.points == 2
    blocks = table.frame_blocks()
    assert blocks.shape == (2, 2, 2)
    assert np.array_equal(blocks.reshape(4, 2), table.data)
    with pytest.raises(ValueError):
        table.data[0, 0] = 7.0


def test_pose_sequence_requires_orthonormal_rows():
    good = np.tile(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]), (3, 1, 1))
    assert CameraPoseSequence(good).frames == 3
    bad = good.copy()
    bad[1, 0, 0] = 2.0
    with pytest.raises(ValueError):
        CameraPoseSequence(bad)


def test_pose_sequence_accepts_block_list():
    blocks = [np.eye(3)[:2] for _ in range(2)]
    seq = CameraPoseSequence(blocks)
    assert seq.blocks.shape == (2, 2, 3)
    with pytest.raises(ValueError):
        seq.blocks[0, 0, 0] = 2.0


def test_shape_sequence_checks():
    seq = ShapeSequence(np.zeros((2, 3, 4)))
    assert seq.frames == 2 and seq.points == 4
    with pytest.raises(ValueError):
        ShapeSequence(np.zeros((2, 4, 3)))
    with pytest.raises(ValueError):
        ShapeSequence(np.full((1, 3, 2), np.inf))


def test_motion_matrix_dimensions():
    assert MotionMatrix(np.zeros((4, 6))).basis_count == 2
    assert MotionMatrix(np.zeros((4, 6))).frames == 2
    with pytest.raises(ValueError):
        MotionMatrix(np.zeros((4, 5)))
    with pytest.raises(ValueError):
        MotionMatrix(np.zeros((3, 6)))


def test_trajectory_model_contracts(rng):
    omega, _ = np.linalg.qr(rng.standard_normal((6, 3)))
    model = TrajectoryModel(omega, np.eye(3)[:, :2], np.zeros((6, 5)))
    assert model.frames == 6 and model.dct_count == 3 and model.basis_count == 2
    assert np.allclose(model.coefficients, omega @ model.trajectory)
    with pytest.raises(ValueError):
        TrajectoryModel(omega * 1.1, np.eye(3)[:, :2], np.zeros((6, 5)))
    with pytest.raises(ValueError):
        TrajectoryModel(omega, np.eye(3), np.zeros((8, 5)))  # basis rows off
    with pytest.raises(ValueError):
        TrajectoryModel(omega, np.zeros((3, 4)), np.zeros((12, 5)))  # K > d


def test_corrective_gram_validation():
    CorrectiveGram(np.eye(3))
    CorrectiveGram(np.diag([1.0, 1.0, 1.0, 0.0, 0.0, 0.0]))
    with pytest.raises(ValueError):
        CorrectiveGram(np.eye(4))  # side not a multiple of three
    lopsided = np.eye(3)
    lopsided[0, 1] = 1e-6
    with pytest.raises(ValueError):
        CorrectiveGram(lopsided)
    with pytest.raises(ValueError):
        CorrectiveGram(-np.eye(3))
    with pytest.raises(ValueError):
        CorrectiveGram(np.eye(6))  # rank above three


def test_solver_config_defaults():
    cfg = SolverConfig()
    assert (cfg.mu0, cfg.rho, cfg.mu_max) == (1.0, 1.02, 1e6)
    assert (cfg.admm_max_iters, cfg.admm_tol) == (300, 1e-6)
    assert (cfg.pg_max_iters, cfg.pg_tol) == (500, 1e-8)
    assert (cfg.gn_max_iters, cfg.gn_tol) == (20, 1e-6)
    assert cfg.K == 0 and cfg.d == 0 and cfg.seed == 0
    assert not cfg.skip_smoothing


def test_solver_config_rejects_bad_values():
    for kwargs in (
        {"K": -1},
        {"d": -2},
        {"mu0": 0.0},
        {"rho": 0.5},
        {"mu_max": 0.5},
        {"admm_tol": 0.0},
        {"pg_tol": -1e-9},
        {"pg_max_iters": 0},
        {"gn_max_iters": 0},
    ):
        with pytest.raises(ConfigError):
            SolverConfig(**kwargs)


def test_solver_config_mapping_round_trip():
    cfg = SolverConfig(K=2, rho=1.05, skip_smoothing=True, seed=9)
    assert SolverConfig.from_mapping(cfg.to_dict()) == cfg


def test_solver_config_mapping_rejects_unknown_and_mistyped():
    with pytest.raises(ConfigError):
        SolverConfig.from_mapping({"Kmax": 3})
    with pytest.raises(ConfigError):
        SolverConfig.from_mapping({"K": 1.5})
    with pytest.raises(ConfigError):
        SolverConfig.from_mapping({"K": True})
    with pytest.raises(ConfigError):
        SolverConfig.from_mapping({"skip_smoothing": 1})
    with pytest.raises(ConfigError):
        SolverConfig.from_mapping({"rho": "fast"})


def test_report_round_trip_and_validation():
    report = ReconstructionReport(
        reprojection_error=0.5,
        iterations={"admm": 10},
        wall_time={"total": 0.1},
        config=SolverConfig(),
        basis_count=2,
        dct_count=4,
        admm_relative_residual=1e-7,
        flags={"pg_converged": True},
    )
    payload = report.to_dict()
    assert payload["basis_count"] == 2
    assert payload["config"]["rho"] == 1.02
    assert payload["e3d"] is None and payload["rms"] is None
    assert payload["flags"] == {"pg_converged": True}
    with pytest.raises(ValueError):
        ReconstructionReport(
            reprojection_error=-1.0,
            iterations={},
            wall_time={},
            config=SolverConfig(),
            basis_count=1,
            dct_count=None,
            admm_relative_residual=0.0,
            flags={},
        )
    with pytest.raises(ValueError):
        ReconstructionReport(
            reprojection_error=0.0,
            iterations={},
            wall_time={},
            config=SolverConfig(),
            basis_count=0,
            dct_count=None,
            admm_relative_residual=0.0,
            flags={},
        )
