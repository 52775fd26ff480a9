"""Reconstruction accuracy metrics.

Both metrics align the reconstruction to the ground truth with a similarity
transform before measuring, because the reconstruction is only defined up to
scale, rotation (optionally reflection) and translation.  The alignment policy
is per frame by default; ``alignment="sequence"`` fits one transform to the
whole clip and ``alignment="none"`` compares raw coordinates.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError
from .types import ShapeSequence

__all__ = [
    "SimilarityTransform",
    "procrustes_align",
    "e3d",
    "rms_error",
]

_ALIGNMENTS = ("frame", "sequence", "none")


@dataclass(frozen=True)
class SimilarityTransform:
    """A similarity map x -> scale * rotation @ x + translation[:, None]."""

    scale: float
    rotation: np.ndarray
    translation: np.ndarray

    def apply(self, points: np.ndarray) -> np.ndarray:
        return self.scale * self.rotation @ points + self.translation[:, None]


def procrustes_align(
    points: np.ndarray, target: np.ndarray, allow_reflection: bool = True
) -> tuple[np.ndarray, SimilarityTransform]:
    """Best similarity transform taking ``points`` onto ``target`` (both 3xN).

    Minimizes ||target - (s R points + t)||_F over positive scale, rotation R
    (reflections allowed unless ``allow_reflection`` is false) and translation.
    A degenerate cloud (all points coincident) yields the identity transform,
    shifted to match centroids, with a warning.
    """
    points = np.asarray(points, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if points.shape != target.shape or points.ndim != 2 or points.shape[0] != 3:
        raise ValueError(
            f"procrustes_align needs two 3xN clouds, got {points.shape} and {target.shape}"
        )
    if np.array_equal(points, target):
        # the exact optimum; skipping the SVD keeps equal inputs at error zero
        return points.copy(), SimilarityTransform(1.0, np.eye(3), np.zeros(3))
    p_mean = points.mean(axis=1, keepdims=True)
    t_mean = target.mean(axis=1, keepdims=True)
    p_centered = points - p_mean
    t_centered = target - t_mean
    spread = float(np.sum(p_centered**2))
    if spread < 1e-300:
        warnings.warn(
            "degenerate point cloud (all points coincident); returning identity alignment",
            RuntimeWarning,
            stacklevel=2,
        )
        transform = SimilarityTransform(1.0, np.eye(3), (t_mean - p_mean).ravel())
        return transform.apply(points), transform

    u, s, vt = np.linalg.svd(t_centered @ p_centered.T)
    signs = np.ones(3)
    if not allow_reflection and np.linalg.det(u @ vt) < 0:
        signs[-1] = -1.0
    rotation = (u * signs) @ vt
    scale = float(np.sum(s * signs)) / spread
    if scale <= 0:  # anti-correlated clouds under the rotation-only constraint
        scale = 1.0
    translation = (t_mean - scale * rotation @ p_mean).ravel()
    transform = SimilarityTransform(scale, rotation, translation)
    return transform.apply(points), transform


def _check_pair(recon: ShapeSequence, truth: ShapeSequence, alignment: str) -> None:
    if recon.shapes.shape != truth.shapes.shape:
        raise ValueError(
            f"shape sequences disagree: {recon.shapes.shape} vs {truth.shapes.shape}"
        )
    if alignment not in _ALIGNMENTS:
        raise ValueError(f"alignment must be one of {_ALIGNMENTS}, got {alignment!r}")


def _aligned_frames(
    recon: ShapeSequence, truth: ShapeSequence, allow_reflection: bool, alignment: str
) -> np.ndarray:
    if alignment == "none":
        return recon.shapes
    if alignment == "frame":
        return np.stack([
            procrustes_align(recon.shapes[t], truth.shapes[t], allow_reflection)[0]
            for t in range(recon.frames)
        ])
    # one transform fitted on the concatenation of all frames
    flat_recon = np.concatenate(list(recon.shapes), axis=1)
    flat_truth = np.concatenate(list(truth.shapes), axis=1)
    _, transform = procrustes_align(flat_recon, flat_truth, allow_reflection)
    return np.stack([transform.apply(recon.shapes[t]) for t in range(recon.frames)])


def e3d(
    recon: ShapeSequence,
    truth: ShapeSequence,
    allow_reflection: bool = True,
    alignment: str = "frame",
    error_power: int = 2,
) -> tuple[float, np.ndarray]:
    """Normalized mean 3D error against ground truth.

    After alignment, each point contributes its Euclidean distance to the
    ground-truth point raised to ``error_power`` (2 by default, i.e. squared
    distance).  The total is averaged over all points and frames and divided
    by sigma, the per-axis ground-truth standard deviation (population
    convention) averaged over axes and frames.

    Returns (error, per-frame errors); the error is the mean of the per-frame
    values.
    """
    _check_pair(recon, truth, alignment)
    if error_power not in (1, 2):
        raise ValueError("error_power must be 1 or 2")
    sigma = float(truth.shapes.std(axis=2).sum()) / (3.0 * truth.frames)
    if sigma <= 0:
        raise DegenerateInputError("ground truth has zero variance; e3d undefined")
    aligned = _aligned_frames(recon, truth, allow_reflection, alignment)
    distances = np.sqrt(np.sum((truth.shapes - aligned) ** 2, axis=1))
    contributions = distances if error_power == 1 else distances**2
    per_frame = contributions.sum(axis=1) / (sigma * truth.points)
    return float(per_frame.mean()), per_frame


def rms_error(
    recon: ShapeSequence,
    truth: ShapeSequence,
    allow_reflection: bool = True,
    alignment: str = "frame",
) -> float:
    """Mean over frames of ||X_t - G_t||_F / ||G_t||_F after alignment."""
    _check_pair(recon, truth, alignment)
    norms = np.linalg.norm(truth.shapes, axis=(1, 2))
    if np.any(norms == 0):
        frame = int(np.argmin(norms))
        raise DegenerateInputError(f"ground-truth frame {frame} is all zeros; rms undefined")
    aligned = _aligned_frames(recon, truth, allow_reflection, alignment)
    ratios = np.linalg.norm(truth.shapes - aligned, axis=(1, 2)) / norms
    return float(ratios.mean())
