"""End-to-end reconstruction: tracks in, poses + shapes + report out."""

from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import dataclass, replace
from typing import Iterable

import numpy as np

from .errors import SmsrError, StageFailure
from .pose_estimation import (
    recover_corrective,
    recover_poses,
    build_orthogonality_system,
    rigid_warm_start,
    select_basis_count,
    solve_gram_proximal,
    truncated_factorization,
)
from .shape_recovery import AdmmState, admm_recover
from .tracks_io import register_to_centroid
from .trajectory_smoothing import (
    TrajectoryFit,
    default_dct_count,
    fit_shape_trajectory,
    smooth_measurements,
)
from .types import (
    CameraPoseSequence,
    ReconstructionReport,
    ShapeSequence,
    SolverConfig,
    TrackTable,
)

__all__ = ["PipelineResult", "reconstruct", "search_basis_count", "AUTO_SKIP_CELLS"]

# smoothing is skipped automatically above this many track cells (T * N)
AUTO_SKIP_CELLS = 5_000_000


@dataclass(frozen=True)
class PipelineResult:
    """Everything one reconstruction run produced."""

    shapes: ShapeSequence
    poses: CameraPoseSequence
    coefficients: np.ndarray
    smoothing: TrajectoryFit | None
    admm: AdmmState
    report: ReconstructionReport
    centered_tracks: TrackTable


@contextmanager
def _stage(name: str):
    try:
        yield
    except StageFailure:
        raise
    except Exception as exc:  # tag the failing stage for the CLI
        raise StageFailure(name, exc) from exc


def _temporal_variation(motion: np.ndarray, corrective: np.ndarray) -> float:
    """Frame-to-frame wobble of the corrected motion rows.

    Crude stand-in for the smoothing objective: the true pose track changes
    slowly between frames, spurious solutions of the constraint system jump.
    """
    corrected = motion @ corrective
    rows = corrected.reshape(-1, 2, corrected.shape[1])
    return float(np.linalg.norm(np.diff(rows, axis=0)) ** 2)


def reconstruct(
    tracks: TrackTable,
    config: SolverConfig | None = None,
    force_smoothing: bool = False,
) -> PipelineResult:
    """Run the full pipeline on one track table.

    Stages: centroid registration; basis-count selection (when K is 0);
    truncated factorization; corrective-Gram solve and pose extraction;
    trajectory smoothing (skippable, and skipped automatically on inputs
    larger than AUTO_SKIP_CELLS track cells unless ``force_smoothing``);
    ADMM shape recovery.  The report's reprojection error measures the final
    solution against the registered input tracks.
    """
    cfg = config if config is not None else SolverConfig()
    timings: dict[str, float] = {}
    counts: dict[str, int] = {}
    flags: dict[str, bool] = {}
    start_total = time.perf_counter()

    with _stage("input"):
        centered = register_to_centroid(tracks)

    start = time.perf_counter()
    with _stage("pose"):
        basis_count = cfg.K if cfg.K > 0 else select_basis_count(centered)
        pair = truncated_factorization(centered, basis_count)
        system = build_orthogonality_system(pair)
        # the constraint system leaves a mixing ambiguity for K > 1, so a
        # second candidate seeded from the rigid reading competes with the
        # cold-started solve; the smoothing fit (or the temporal-variation
        # surrogate when smoothing is off) picks the winner
        solves = [solve_gram_proximal(system, None, cfg)]
        if basis_count > 1:
            solves.append(
                solve_gram_proximal(system, rigid_warm_start(centered, pair, cfg), cfg)
            )
        correctives = [recover_corrective(s.gram) for s in solves]
        recoveries = [recover_poses(pair, q) for q in correctives]
    timings["pose"] = time.perf_counter() - start

    cells = centered.frames * centered.points
    auto_skip = cells > AUTO_SKIP_CELLS and not force_smoothing
    do_smooth = not cfg.skip_smoothing and not auto_skip
    flags["smoothing_skipped"] = not do_smooth
    flags["smoothing_auto_skipped"] = auto_skip and not cfg.skip_smoothing

    smoothing: TrajectoryFit | None = None
    dct_count: int | None = None
    working = centered
    start = time.perf_counter()
    if do_smooth:
        with _stage("smoothing"):
            wanted = cfg.d if cfg.d > 0 else default_dct_count(centered.frames, basis_count)
            dct_count = min(max(wanted, basis_count), centered.frames)
            fits = [
                fit_shape_trajectory(centered, r.poses, dct_count, basis_count, cfg)
                for r in recoveries
            ]
            pick = min(range(len(fits)), key=lambda i: fits[i].objectives[-1])
            smoothing = fits[pick]
            working = smooth_measurements(
                centered, recoveries[pick].poses, smoothing.model
            )
        counts["gauss_newton"] = smoothing.iterations
        flags["gn_converged"] = smoothing.converged
    else:
        with _stage("pose"):
            pick = min(
                range(len(correctives)),
                key=lambda i: _temporal_variation(pair.motion, correctives[i]),
            )
    timings["smoothing"] = time.perf_counter() - start

    gram = solves[pick]
    recovery = recoveries[pick]
    counts["gram_pg"] = gram.iterations
    flags["pg_converged"] = gram.converged
    flags["degenerate_frames"] = bool(recovery.degenerate_frames)
    flags["rigid_warm_start_selected"] = pick == 1

    start = time.perf_counter()
    with _stage("shape"):
        shapes, admm_state = admm_recover(working, recovery.poses, cfg)
    timings["shape"] = time.perf_counter() - start
    counts["admm"] = admm_state.iterations
    flags["admm_converged"] = (
        bool(admm_state.residuals) and admm_state.residuals[-1] <= cfg.admm_tol
    )

    with _stage("report"):
        replayed = np.einsum(
            "tab,tbn->tan", recovery.poses.blocks, shapes.shapes
        ).reshape(2 * centered.frames, centered.points)
        reprojection = float(np.linalg.norm(centered.data - replayed))
        timings["total"] = time.perf_counter() - start_total
        report = ReconstructionReport(
            reprojection_error=reprojection,
            iterations=counts,
            wall_time=timings,
            config=cfg,
            basis_count=basis_count,
            dct_count=dct_count,
            admm_relative_residual=(
                admm_state.residuals[-1] if admm_state.residuals else 0.0
            ),
            flags=flags,
        )
    return PipelineResult(
        shapes=shapes,
        poses=recovery.poses,
        coefficients=recovery.coefficients,
        smoothing=smoothing,
        admm=admm_state,
        report=report,
        centered_tracks=centered,
    )


def search_basis_count(
    tracks: TrackTable,
    config: SolverConfig | None = None,
    candidates: Iterable[int] = (),
    force_smoothing: bool = False,
) -> tuple[PipelineResult, dict[int, float]]:
    """Rerun the pipeline over candidate basis counts, keep the best.

    The winner is the run with the smallest reprojection error against the
    input tracks; ties go to the smaller K.  Returns (best result, the
    reprojection error of every candidate tried).
    """
    cfg = config if config is not None else SolverConfig()
    tried: dict[int, float] = {}
    best: PipelineResult | None = None
    candidates = sorted(set(int(k) for k in candidates))
    if not candidates:
        raise SmsrError("search_basis_count needs at least one candidate K")
    if candidates[0] < 1:
        raise SmsrError("candidate basis counts must be positive")
    for k in candidates:
        result = reconstruct(tracks, replace(cfg, K=k), force_smoothing=force_smoothing)
        tried[k] = result.report.reprojection_error
        if best is None or result.report.reprojection_error < best.report.reprojection_error:
            best = result
    assert best is not None
    return best, tried
