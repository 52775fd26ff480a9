"""Value types and small linear-algebra helpers shared by the whole pipeline.

Every type here is an immutable value object: array payloads are copied on
construction and marked read-only, so instances can be shared freely between
threads and reused across pipeline stages without defensive copies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Any, Iterable, Mapping

import numpy as np

from .errors import ConfigError

__all__ = [
    "TrackTable",
    "CameraPoseSequence",
    "ShapeSequence",
    "MotionMatrix",
    "TrajectoryModel",
    "CorrectiveGram",
    "SolverConfig",
    "ReconstructionReport",
    "vec",
    "unvec",
    "kron_row",
]


def _frozen(values: Any, dtype=np.float64) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def vec(m: np.ndarray) -> np.ndarray:
    """Stack the columns of a matrix into one vector (column-major order)."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"vec expects a matrix, got ndim={m.ndim}")
    return m.ravel(order="F")


def unvec(v: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Inverse of :func:`vec`: rebuild a ``rows x cols`` matrix column by column."""
    v = np.asarray(v, dtype=np.float64).ravel()
    if v.size != rows * cols:
        raise ValueError(f"unvec: {v.size} values cannot fill a {rows}x{cols} matrix")
    return v.reshape((rows, cols), order="F")


def kron_row(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row vector ``r`` such that ``r @ vec(F) == a @ F @ b.T`` for square F.

    With ``p = len(a)``, entry ``(j*p + i)`` of the result is ``b[j] * a[i]``
    (0-based), matching the column-major convention of :func:`vec`.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size != b.size:
        raise ValueError(f"kron_row: length mismatch ({a.size} vs {b.size})")
    return np.kron(b, a)


@dataclass(frozen=True)
class TrackTable:
    """Stack of 2D point tracks under an orthographic camera.

    ``data`` has 2T rows and N columns; rows ``2i`` and ``2i+1`` (0-based) hold
    the x- and y-image coordinates of all N points in frame ``i``.  ``centered``
    asserts that every row has zero mean (the centroid has been registered out).
    """

    data: np.ndarray
    centered: bool = False

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] % 2 != 0 or data.shape[0] == 0:
            raise ValueError(f"track table needs 2T x N data, got shape {data.shape}")
        if data.shape[1] == 0:
            raise ValueError("track table needs at least one point")
        if not np.all(np.isfinite(data)):
            raise ValueError("track table entries must be finite")
        if self.centered:
            bound = 1e-9 * data.shape[1] * (float(np.abs(data).max()) + 1.0)
            worst = float(np.abs(data.sum(axis=1)).max())
            if worst > bound:
                raise ValueError(
                    f"centered track table has row sum {worst:.3e} exceeding {bound:.3e}"
                )
        object.__setattr__(self, "data", _frozen(data))

    @property
    def frames(self) -> int:
        return self.data.shape[0] // 2

    @property
    def points(self) -> int:
        return self.data.shape[1]

    def frame_blocks(self) -> np.ndarray:
        """The same data viewed as (T, 2, N)."""
        return self.data.reshape(self.frames, 2, self.points)


@dataclass(frozen=True)
class CameraPoseSequence:
    """Per-frame orthographic camera poses: T blocks of shape 2x3 with
    orthonormal rows (the first two rows of a world-to-camera rotation)."""

    blocks: np.ndarray

    def __post_init__(self):
        blocks = self.blocks
        if not isinstance(blocks, np.ndarray):
            blocks = np.stack([np.asarray(b, dtype=np.float64) for b in blocks])
        blocks = np.asarray(blocks, dtype=np.float64)
        if blocks.ndim != 3 or blocks.shape[1:] != (2, 3) or blocks.shape[0] == 0:
            raise ValueError(f"pose sequence needs shape (T, 2, 3), got {blocks.shape}")
        if not np.all(np.isfinite(blocks)):
            raise ValueError("pose entries must be finite")
        gram = np.einsum("tij,tkj->tik", blocks, blocks)
        worst = float(np.abs(gram - np.eye(2)).max())
        if worst > 1e-8:
            raise ValueError(f"pose rows not orthonormal (max deviation {worst:.3e})")
        object.__setattr__(self, "blocks", _frozen(blocks))

    @property
    def frames(self) -> int:
        return self.blocks.shape[0]


@dataclass(frozen=True)
class ShapeSequence:
    """Time-varying 3D shape: T frames of 3xN world coordinates."""

    shapes: np.ndarray

    def __post_init__(self):
        shapes = self.shapes
        if not isinstance(shapes, np.ndarray):
            shapes = np.stack([np.asarray(s, dtype=np.float64) for s in shapes])
        shapes = np.asarray(shapes, dtype=np.float64)
        if shapes.ndim != 3 or shapes.shape[1] != 3 or 0 in shapes.shape:
            raise ValueError(f"shape sequence needs shape (T, 3, N), got {shapes.shape}")
        if not np.all(np.isfinite(shapes)):
            raise ValueError("shape entries must be finite")
        object.__setattr__(self, "shapes", _frozen(shapes))

    @property
    def frames(self) -> int:
        return self.shapes.shape[0]

    @property
    def points(self) -> int:
        return self.shapes.shape[2]


@dataclass(frozen=True)
class MotionMatrix:
    """Stacked per-frame motion blocks (2T x 3K): row pair i is the frame-i
    camera block replicated across the K shape-basis slots and scaled by the
    frame's mixing coefficients."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] % 2 != 0 or data.shape[1] % 3 != 0:
            raise ValueError(f"motion matrix needs 2T x 3K data, got {data.shape}")
        if 0 in data.shape:
            raise ValueError("motion matrix must be non-empty")
        if not np.all(np.isfinite(data)):
            raise ValueError("motion matrix entries must be finite")
        object.__setattr__(self, "data", _frozen(data))

    @property
    def frames(self) -> int:
        return self.data.shape[0] // 2

    @property
    def basis_count(self) -> int:
        return self.data.shape[1] // 3


@dataclass(frozen=True)
class TrajectoryModel:
    """Low-frequency model of the shape mixing coefficients.

    ``omega`` is a T x d matrix with orthonormal DCT columns, ``trajectory``
    the d x K coefficient block, and ``basis`` the 3K x N stack of basis
    shapes.  The mixing coefficients C = omega @ trajectory are always derived,
    never stored.
    """

    omega: np.ndarray
    trajectory: np.ndarray
    basis: np.ndarray

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=np.float64)
        traj = np.asarray(self.trajectory, dtype=np.float64)
        basis = np.asarray(self.basis, dtype=np.float64)
        if omega.ndim != 2 or traj.ndim != 2 or basis.ndim != 2:
            raise ValueError("trajectory model parts must all be matrices")
        frames, d = omega.shape
        k = traj.shape[1]
        if traj.shape[0] != d:
            raise ValueError(f"trajectory block is {traj.shape}, expected ({d}, K)")
        if not (1 <= k <= d <= frames):
            raise ValueError(f"need 1 <= K <= d <= T, got K={k}, d={d}, T={frames}")
        if basis.shape[0] != 3 * k:
            raise ValueError(f"basis stack is {basis.shape}, expected ({3 * k}, N)")
        worst = float(np.abs(omega.T @ omega - np.eye(d)).max())
        if worst > 1e-12:
            raise ValueError(f"omega columns not orthonormal (max deviation {worst:.3e})")
        object.__setattr__(self, "omega", _frozen(omega))
        object.__setattr__(self, "trajectory", _frozen(traj))
        object.__setattr__(self, "basis", _frozen(basis))

    @property
    def frames(self) -> int:
        return self.omega.shape[0]

    @property
    def dct_count(self) -> int:
        return self.omega.shape[1]

    @property
    def basis_count(self) -> int:
        return self.trajectory.shape[1]

    @property
    def coefficients(self) -> np.ndarray:
        """Mixing coefficients C = omega @ trajectory, shape (T, K)."""
        return self.omega @ self.trajectory


@dataclass(frozen=True)
class CorrectiveGram:
    """Gram matrix of one corrective-transform column triplet: 3K x 3K,
    symmetric, positive semidefinite, rank at most 3."""

    matrix: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.matrix, dtype=np.float64)
        if f.ndim != 2 or f.shape[0] != f.shape[1] or f.shape[0] % 3 != 0 or f.shape[0] == 0:
            raise ValueError(f"corrective Gram must be square 3K x 3K, got {f.shape}")
        if not np.all(np.isfinite(f)):
            raise ValueError("corrective Gram entries must be finite")
        if float(np.abs(f - f.T).max()) > 1e-10:
            raise ValueError("corrective Gram must be symmetric within 1e-10")
        lam = np.linalg.eigvalsh(f)
        if lam[0] < -1e-8:
            raise ValueError(f"corrective Gram has eigenvalue {lam[0]:.3e} < -1e-8")
        if f.shape[0] > 3 and lam[-4] > 1e-8 * max(lam[-1], 0.0):
            raise ValueError("corrective Gram has numerical rank above 3")
        object.__setattr__(self, "matrix", _frozen(f))

    @property
    def basis_count(self) -> int:
        return self.matrix.shape[0] // 3


@dataclass(frozen=True)
class SolverConfig:
    """All tunables of one reconstruction run.

    ``K=0`` and ``d=0`` mean "choose automatically".  The remaining fields are
    the stopping controls of the three iterative stages: proximal gradient on
    the corrective Gram (pg_*), Gauss-Newton trajectory smoothing (gn_*) and
    the ADMM shape solver (mu0, rho, mu_max, admm_*).
    """

    K: int = 0
    d: int = 0
    mu0: float = 1.0
    rho: float = 1.02
    mu_max: float = 1e6
    admm_max_iters: int = 300
    admm_tol: float = 1e-6
    pg_max_iters: int = 500
    pg_tol: float = 1e-8
    gn_max_iters: int = 20
    gn_tol: float = 1e-6
    skip_smoothing: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.K < 0 or self.d < 0:
            raise ConfigError("K and d must be nonnegative (0 means automatic)")
        if self.mu0 <= 0:
            raise ConfigError("mu0 must be positive")
        if self.rho < 1:
            raise ConfigError("rho must be >= 1")
        if self.mu_max < self.mu0:
            raise ConfigError("mu_max must be >= mu0")
        for name in ("admm_tol", "pg_tol", "gn_tol"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("admm_max_iters", "pg_max_iters", "gn_max_iters"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1")

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Any]) -> "SolverConfig":
        """Build a config from a JSON-style mapping; unknown keys are rejected."""
        known = {f.name: f.type for f in fields(cls)}
        unknown = sorted(set(mapping) - set(known))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        kwargs: dict[str, Any] = {}
        for name, value in mapping.items():
            if name in ("skip_smoothing",):
                if not isinstance(value, bool):
                    raise ConfigError(f"{name} must be a boolean, got {value!r}")
                kwargs[name] = value
            elif name in ("K", "d", "seed", "admm_max_iters", "pg_max_iters", "gn_max_iters"):
                if isinstance(value, bool) or not isinstance(value, int):
                    raise ConfigError(f"{name} must be an integer, got {value!r}")
                kwargs[name] = value
            else:
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise ConfigError(f"{name} must be a number, got {value!r}")
                kwargs[name] = float(value)
        return cls(**kwargs)

    def to_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class ReconstructionReport:
    """Metrics and bookkeeping of one pipeline run.

    ``e3d``/``rms``/``per_frame_errors`` stay ``None`` unless ground truth was
    supplied.  ``iterations`` and ``wall_time`` are keyed by stage name, and
    ``flags`` records convergence and skip decisions.
    """

    reprojection_error: float
    iterations: Mapping[str, int]
    wall_time: Mapping[str, float]
    config: SolverConfig
    basis_count: int
    dct_count: int | None
    admm_relative_residual: float
    flags: Mapping[str, bool]
    e3d: float | None = None
    rms: float | None = None
    per_frame_errors: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.reprojection_error < 0 or not math.isfinite(self.reprojection_error):
            raise ValueError("reprojection_error must be finite and nonnegative")
        if self.basis_count < 1:
            raise ValueError("basis_count must be at least 1")
        if self.e3d is not None and self.e3d < 0:
            raise ValueError("e3d must be nonnegative")
        if self.rms is not None and self.rms < 0:
            raise ValueError("rms must be nonnegative")
        object.__setattr__(self, "iterations", dict(self.iterations))
        object.__setattr__(self, "wall_time", dict(self.wall_time))
        object.__setattr__(self, "flags", dict(self.flags))
        if self.per_frame_errors is not None:
            object.__setattr__(self, "per_frame_errors",
                               tuple(float(v) for v in self.per_frame_errors))

    def to_dict(self) -> dict[str, Any]:
        return {
            "e3d": self.e3d,
            "rms": self.rms,
            "per_frame_errors": (None if self.per_frame_errors is None
                                 else list(self.per_frame_errors)),
            "reprojection_error": self.reprojection_error,
            "iterations": dict(self.iterations),
            "wall_time": dict(self.wall_time),
            "config": self.config.to_dict(),
            "basis_count": self.basis_count,
            "dct_count": self.dct_count,
            "admm_relative_residual": self.admm_relative_residual,
            "flags": dict(self.flags),
        }


def as_pose_array(poses: CameraPoseSequence | np.ndarray | Iterable[np.ndarray]) -> np.ndarray:
    """Coerce poses to a plain (T, 2, 3) float array."""
    if isinstance(poses, CameraPoseSequence):
        return poses.blocks
    arr = np.asarray(poses, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[1:] != (2, 3):
        raise ValueError(f"expected (T, 2, 3) pose blocks, got {arr.shape}")
    return arr
