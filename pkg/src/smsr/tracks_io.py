"""Plain-text file formats and registration utilities.

Three whitespace-separated text formats share one set of conventions: a single
header line carrying a format tag and the dimensions, one matrix row per line,
values written with 17 significant digits (lossless for float64), and blank
lines or lines starting with ``#`` ignored everywhere.

=================  ==========================  =========================
format tag         header                      data lines
=================  ==========================  =========================
NRSFM-TRACKS v1    ``NRSFM-TRACKS v1 T N``     2T rows of N values
                                               (x then y, per frame)
NRSFM-SHAPES v1    ``NRSFM-SHAPES v1 T N``     3T rows of N values
                                               (X, Y, Z rows per frame)
NRSFM-POSES v1     ``NRSFM-POSES v1 T``        2T rows of 3 values
=================  ==========================  =========================
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from .errors import ConfigError, TrackFileError
from .types import (
    CameraPoseSequence,
    ReconstructionReport,
    ShapeSequence,
    SolverConfig,
    TrackTable,
)

__all__ = [
    "load_tracks",
    "save_tracks",
    "load_shapes",
    "save_shapes",
    "load_poses",
    "save_poses",
    "register_to_centroid",
    "load_config",
    "save_config",
    "save_report",
    "export_ply",
]

_TRACKS_TAG = "NRSFM-TRACKS"
_SHAPES_TAG = "NRSFM-SHAPES"
_POSES_TAG = "NRSFM-POSES"
_VERSION = "v1"


def _significant_lines(path: Path):
    """Yield (1-based line number, stripped text) skipping blanks and comments."""
    with open(path, "r", encoding="ascii") as fh:
        for number, raw in enumerate(fh, start=1):
            text = raw.strip()
            if not text or text.startswith("#"):
                continue
            yield number, text


def _parse_header(path: Path, tag: str, line: str, number: int, dims: int) -> list[int]:
    parts = line.split()
    if len(parts) != 2 + dims or parts[0] != tag or parts[1] != _VERSION:
        raise TrackFileError(
            f"expected header '{tag} {_VERSION}' with {dims} dimension(s), got {line!r}",
            path=path, line=number,
        )
    out = []
    for token in parts[2:]:
        try:
            value = int(token)
        except ValueError:
            raise TrackFileError(f"bad dimension {token!r} in header", path=path, line=number)
        if value < 1:
            raise TrackFileError(f"dimensions must be positive, got {value}", path=path, line=number)
        out.append(value)
    return out


def _parse_row(path: Path, line: str, number: int, width: int) -> np.ndarray:
    tokens = line.split()
    if len(tokens) != width:
        raise TrackFileError(
            f"expected {width} values, got {len(tokens)}", path=path, line=number
        )
    try:
        row = np.array([float(t) for t in tokens], dtype=np.float64)
    except ValueError:
        raise TrackFileError(f"non-numeric value in row: {line!r}", path=path, line=number)
    if not np.all(np.isfinite(row)):
        raise TrackFileError("non-finite value in row", path=path, line=number)
    return row


def _read_matrix(path: str | os.PathLike, tag: str, dims: int,
                 rows_per_frame: int, row_width: int | None):
    """Read one of the three formats; returns (dims list, data matrix)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"missing input file: {path}")
    lines = _significant_lines(path)
    try:
        number, text = next(lines)
    except StopIteration:
        raise TrackFileError("file holds no header line", path=path)
    header = _parse_header(path, tag, text, number, dims)
    frames = header[0]
    width = row_width if row_width is not None else header[1]
    expected = rows_per_frame * frames
    data = np.empty((expected, width), dtype=np.float64)
    filled = 0
    for number, text in lines:
        if filled == expected:
            raise TrackFileError(
                f"unexpected extra data (file declares {expected} rows)",
                path=path, line=number,
            )
        data[filled] = _parse_row(path, text, number, width)
        filled += 1
    if filled != expected:
        raise TrackFileError(
            f"file declares {expected} data rows but holds {filled}", path=path
        )
    return header, data


def _format_row(row: np.ndarray) -> str:
    return " ".join(f"{v:.17g}" for v in row)


def _write_matrix(path: str | os.PathLike, header: str, data: np.ndarray) -> None:
    path = Path(path)
    with open(path, "w", encoding="ascii") as fh:
        fh.write(header + "\n")
        for row in data:
            fh.write(_format_row(row) + "\n")


def load_tracks(path: str | os.PathLike) -> TrackTable:
    """Parse a NRSFM-TRACKS v1 file into a (non-centered) track table."""
    _, data = _read_matrix(path, _TRACKS_TAG, 2, 2, None)
    return TrackTable(data, centered=False)


def save_tracks(tracks: TrackTable, path: str | os.PathLike) -> None:
    header = f"{_TRACKS_TAG} {_VERSION} {tracks.frames} {tracks.points}"
    _write_matrix(path, header, tracks.data)


def load_shapes(path: str | os.PathLike) -> ShapeSequence:
    """Parse a NRSFM-SHAPES v1 file."""
    (frames, points), data = _read_matrix(path, _SHAPES_TAG, 2, 3, None)
    return ShapeSequence(data.reshape(frames, 3, points))


def save_shapes(shapes: ShapeSequence, path: str | os.PathLike) -> None:
    header = f"{_SHAPES_TAG} {_VERSION} {shapes.frames} {shapes.points}"
    _write_matrix(path, header, shapes.shapes.reshape(3 * shapes.frames, shapes.points))


def load_poses(path: str | os.PathLike) -> CameraPoseSequence:
    """Parse a NRSFM-POSES v1 file."""
    (frames,), data = _read_matrix(path, _POSES_TAG, 1, 2, 3)
    return CameraPoseSequence(data.reshape(frames, 2, 3))


def save_poses(poses: CameraPoseSequence, path: str | os.PathLike) -> None:
    header = f"{_POSES_TAG} {_VERSION} {poses.frames}"
    _write_matrix(path, header, poses.blocks.reshape(2 * poses.frames, 3))


def register_to_centroid(tracks: TrackTable) -> TrackTable:
    """Subtract each row's mean so every frame is centered on its 2D centroid.

    Idempotent; the result is flagged ``centered``.
    """
    data = tracks.data - tracks.data.mean(axis=1, keepdims=True)
    return TrackTable(data, centered=True)


def load_config(path: str | os.PathLike) -> SolverConfig:
    """Load a solver configuration from JSON; unknown keys are rejected."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"missing input file: {path}")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})")
    if not isinstance(payload, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return SolverConfig.from_mapping(payload)


def save_config(config: SolverConfig, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def save_report(report: ReconstructionReport, path: str | os.PathLike) -> None:
    """Write a reconstruction report as pretty-printed JSON."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def export_ply(shapes: ShapeSequence, directory: str | os.PathLike) -> list[Path]:
    """Write one ASCII PLY point cloud per frame into ``directory``.

    Files are named ``frame_0001.ply`` .. ``frame_TTTT.ply``; vertices are
    written as double-precision x/y/z properties.  Returns the written paths.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for index in range(shapes.frames):
        cloud = shapes.shapes[index]
        path = directory / f"frame_{index + 1:04d}.ply"
        with open(path, "w", encoding="ascii") as fh:
            fh.write("ply\n")
            fh.write("format ascii 1.0\n")
            fh.write(f"element vertex {shapes.points}\n")
            fh.write("property double x\n")
            fh.write("property double y\n")
            fh.write("property double z\n")
            fh.write("end_header\n")
            for j in range(shapes.points):
                fh.write(f"{cloud[0, j]:.17g} {cloud[1, j]:.17g} {cloud[2, j]:.17g}\n")
        written.append(path)
    return written
