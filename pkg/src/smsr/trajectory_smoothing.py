"""Low-frequency smoothing of the mixing-coefficient trajectories.

The mixing coefficients of the K basis shapes are modeled as a combination of
the first d orthonormal DCT vectors; a damped Gauss-Newton search adjusts the
DCT coefficients so that the subspace spanned by the resulting motion matrix
reproduces the tracks as closely as possible.  Replaying the tracks through
the fitted model suppresses off-subspace noise before shape recovery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tracks_io import register_to_centroid
from .types import CameraPoseSequence, MotionMatrix, SolverConfig, TrackTable, TrajectoryModel

__all__ = [
    "TrajectoryFit",
    "dct_basis",
    "default_dct_count",
    "assemble_motion",
    "basis_from_motion",
    "reprojection_residual",
    "fit_shape_trajectory",
    "smooth_measurements",
]

_PINV_CUTOFF = 1e-10  # singular values below cutoff * sigma_max count as zero


@dataclass(frozen=True)
class TrajectoryFit:
    """Result of fit_shape_trajectory: the fitted model plus the objective
    trace over accepted Gauss-Newton steps (index 0 is the starting point)."""

    model: TrajectoryModel
    objectives: tuple[float, ...]
    iterations: int
    converged: bool


def dct_basis(frames: int, count: int) -> np.ndarray:
    """First ``count`` orthonormal DCT basis vectors sampled on ``frames`` points.

    Column j (0-based) is cos(pi (2t - 1) j / (2 frames)) over t = 1..frames,
    scaled so the columns are exactly orthonormal; column 0 is constant.
    """
    if not 1 <= count <= frames:
        raise ValueError(f"need 1 <= count <= frames, got count={count}, frames={frames}")
    t = np.arange(1, frames + 1, dtype=np.float64)[:, None]
    j = np.arange(count, dtype=np.float64)[None, :]
    basis = np.cos(np.pi * (2.0 * t - 1.0) * j / (2.0 * frames))
    scales = np.full(count, math.sqrt(2.0 / frames))
    scales[0] = math.sqrt(1.0 / frames)
    return basis * scales


def default_dct_count(frames: int, basis_count: int) -> int:
    """Default trajectory resolution: a tenth of the frame count, at least the
    number of basis shapes, at most the frame count."""
    return min(max(math.ceil(0.1 * frames), basis_count), frames)


def assemble_motion(
    poses: CameraPoseSequence, omega: np.ndarray, trajectory: np.ndarray
) -> MotionMatrix:
    """Build the 2T x 3K motion matrix from poses and mixing coefficients.

    Frame i contributes the row pair [c_i1 R_i, ..., c_iK R_i] where c_i is
    row i of omega @ trajectory.
    """
    omega = np.asarray(omega, dtype=np.float64)
    trajectory = np.asarray(trajectory, dtype=np.float64)
    if omega.ndim != 2 or trajectory.ndim != 2 or omega.shape[1] != trajectory.shape[0]:
        raise ValueError("omega and trajectory dimensions are inconsistent")
    if omega.shape[0] != poses.frames:
        raise ValueError(
            f"omega has {omega.shape[0]} rows but poses cover {poses.frames} frames"
        )
    coefficients = omega @ trajectory
    blocks = np.einsum("tk,tab->takb", coefficients, poses.blocks)
    frames, k = coefficients.shape
    return MotionMatrix(blocks.reshape(2 * frames, 3 * k))


def basis_from_motion(motion: MotionMatrix, tracks: TrackTable) -> np.ndarray:
    """Least-squares basis shapes B = pinv(M) W (3K x N).

    Rank deficiency is handled by the pseudoinverse: singular values below
    1e-10 of the largest are treated as zero.
    """
    if motion.data.shape[0] != tracks.data.shape[0]:
        raise ValueError("motion and tracks disagree on the frame count")
    return np.linalg.pinv(motion.data, rcond=_PINV_CUTOFF) @ tracks.data


def reprojection_residual(tracks: TrackTable, motion: MotionMatrix) -> tuple[float, np.ndarray]:
    """Squared distance of W from the column space of the motion matrix.

    Returns (||W - M pinv(M) W||_F^2, residual matrix).
    """
    replayed = motion.data @ basis_from_motion(motion, tracks)
    residual = tracks.data - replayed
    return float(np.sum(residual**2)), residual


def fit_shape_trajectory(
    tracks: TrackTable,
    poses: CameraPoseSequence,
    dct_count: int,
    basis_count: int,
    config: SolverConfig | None = None,
    freeze_low_block: bool = False,
) -> TrajectoryFit:
    """Fit DCT coefficients of the mixing trajectories by damped Gauss-Newton.

    Starts from the identity stack (row block k equals the k-th unit vector)
    and minimizes the squared reprojection residual of the induced motion
    subspace.  The Jacobian comes from forward finite differences; a
    Levenberg-style damping parameter is multiplied by ten on every rejected
    step and divided by ten on every accepted one.  Only steps that lower the
    objective are accepted, so the recorded trace is nonincreasing.

    ``freeze_low_block=True`` keeps the leading K x K identity block fixed and
    optimizes the remaining rows only.
    """
    cfg = config if config is not None else SolverConfig()
    if not 1 <= basis_count <= dct_count:
        raise ValueError(
            f"need 1 <= K <= d, got K={basis_count}, d={dct_count}"
        )
    frames = tracks.frames
    if poses.frames != frames:
        raise ValueError("tracks and poses disagree on the frame count")
    omega = dct_basis(frames, dct_count)

    x0 = np.zeros((dct_count, basis_count))
    x0[:basis_count, :basis_count] = np.eye(basis_count)
    if freeze_low_block:
        free = np.zeros(x0.size, dtype=bool)
        free.reshape(dct_count, basis_count)[basis_count:, :] = True
    else:
        free = np.ones(x0.size, dtype=bool)

    def residual_vector(flat: np.ndarray) -> np.ndarray:
        motion = assemble_motion(poses, omega, flat.reshape(dct_count, basis_count))
        return reprojection_residual(tracks, motion)[1].ravel()

    x = x0.ravel().copy()
    residual = residual_vector(x)
    value = float(residual @ residual)
    objectives = [value]
    damping = 1e-3
    iterations = 0
    converged = False
    n_free = int(free.sum())
    if value == 0.0 or n_free == 0:
        converged = True
    else:
        for _ in range(cfg.gn_max_iters):
            iterations += 1
            jac = np.empty((residual.size, n_free))
            for col, index in enumerate(np.flatnonzero(free)):
                h = 1e-6 * (1.0 + abs(x[index]))
                probe = x.copy()
                probe[index] += h
                jac[:, col] = (residual_vector(probe) - residual) / h
            gradient = jac.T @ residual
            hessian = jac.T @ jac
            accepted = False
            relative_drop = 0.0
            while damping <= 1e12:
                try:
                    delta = np.linalg.solve(
                        hessian + damping * np.eye(n_free), -gradient
                    )
                except np.linalg.LinAlgError:
                    damping *= 10.0
                    continue
                candidate = x.copy()
                candidate[free] = x[free] + delta
                trial = residual_vector(candidate)
                trial_value = float(trial @ trial)
                if trial_value < value:
                    relative_drop = (value - trial_value) / value
                    x, residual, value = candidate, trial, trial_value
                    objectives.append(value)
                    damping = max(damping / 10.0, 1e-12)
                    accepted = True
                    break
                damping *= 10.0
            if not accepted:
                converged = True  # no descent direction left: at a local minimum
                break
            if relative_drop < cfg.gn_tol:
                converged = True
                break

    trajectory = x.reshape(dct_count, basis_count)
    motion = assemble_motion(poses, omega, trajectory)
    basis = basis_from_motion(motion, tracks)
    model = TrajectoryModel(omega, trajectory, basis)
    return TrajectoryFit(model, tuple(objectives), iterations, converged)


def smooth_measurements(
    tracks: TrackTable, poses: CameraPoseSequence, model: TrajectoryModel
) -> TrackTable:
    """Replay the tracks through the fitted trajectory model.

    Recomputes the basis shapes for the given tracks, synthesizes the modeled
    shapes S_t = sum_k c_tk B_k, projects them through the poses, and
    re-registers the centroid.  The result is the input's projection onto the
    fitted motion subspace.
    """
    if model.frames != tracks.frames or poses.frames != tracks.frames:
        raise ValueError("tracks, poses and model disagree on the frame count")
    motion = assemble_motion(poses, model.omega, model.trajectory)
    basis = basis_from_motion(motion, tracks)
    triplets = basis.reshape(model.basis_count, 3, tracks.points)
    shapes = np.einsum("tk,kan->tan", model.coefficients, triplets)
    replayed = np.einsum("tab,tbn->tan", poses.blocks, shapes)
    table = TrackTable(replayed.reshape(2 * tracks.frames, tracks.points), centered=False)
    return register_to_centroid(table)
