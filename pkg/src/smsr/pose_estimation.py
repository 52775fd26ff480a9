"""Camera pose recovery from a centered track table.

The stages, in order: rank-3K factorization of the track matrix, assembly of
the per-frame row-orthogonality constraints on the corrective Gram matrix,
projected gradient descent onto the rank-3 PSD cone followed by Gauss-Newton
refinement of the rank-3 factor, eigen square root of the Gram, and per-frame
polar projection to orthonormal pose blocks with scalar scale coefficients.

The constraint system pins each solution only up to the mixing ambiguity of
the factorization, so a warm start from the rigid (single basis) reading of
the data is provided for the caller to seed a second solve; picking between
the resulting pose candidates is the pipeline's job.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DegenerateInputError
from .types import CameraPoseSequence, CorrectiveGram, SolverConfig, TrackTable, unvec

__all__ = [
    "FactoredPair",
    "OrthogonalitySystem",
    "GramSolve",
    "PoseRecovery",
    "select_basis_count",
    "truncated_factorization",
    "build_orthogonality_system",
    "lipschitz_constant",
    "rank3_psd_project",
    "solve_gram_proximal",
    "rigid_warm_start",
    "recover_corrective",
    "recover_poses",
]


@dataclass(frozen=True)
class FactoredPair:
    """Balanced rank-3K factorization of a track matrix: motion (2T x 3K)
    times basis (3K x N), with the singular-value square roots split evenly."""

    motion: np.ndarray
    basis: np.ndarray

    def __post_init__(self):
        motion = np.asarray(self.motion, dtype=np.float64)
        basis = np.asarray(self.basis, dtype=np.float64)
        if motion.ndim != 2 or basis.ndim != 2 or motion.shape[1] != basis.shape[0]:
            raise ValueError("factored pair dimensions are inconsistent")
        if motion.shape[0] % 2 != 0 or motion.shape[1] % 3 != 0:
            raise ValueError(f"motion factor must be 2T x 3K, got {motion.shape}")
        object.__setattr__(self, "motion", motion)
        object.__setattr__(self, "basis", basis)

    @property
    def frames(self) -> int:
        return self.motion.shape[0] // 2

    @property
    def basis_count(self) -> int:
        return self.motion.shape[1] // 3


@dataclass(frozen=True)
class OrthogonalitySystem:
    """Linear system A vec(F) = 0 encoding equal-norm and orthogonality of the
    two corrected motion rows of every frame; A has 2T rows and (3K)^2 columns."""

    matrix: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.matrix, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] % 2 != 0:
            raise ValueError(f"orthogonality system must have 2T rows, got {a.shape}")
        size = int(round(np.sqrt(a.shape[1])))
        if size * size != a.shape[1] or size % 3 != 0:
            raise ValueError(f"column count {a.shape[1]} is not a square of 3K")
        object.__setattr__(self, "matrix", a)

    @property
    def frames(self) -> int:
        return self.matrix.shape[0] // 2

    @property
    def gram_size(self) -> int:
        return int(round(np.sqrt(self.matrix.shape[1])))


@dataclass(frozen=True)
class GramSolve:
    """Result of solve_gram_proximal: the Gram estimate plus the recorded
    objective trace (one entry per accepted iterate, starting at the projected
    initial point)."""

    gram: CorrectiveGram
    objectives: tuple[float, ...]
    iterations: int
    converged: bool


@dataclass(frozen=True)
class PoseRecovery:
    """Per-frame poses, their scale coefficients, and the indices of frames
    whose coefficient was too small to trust (pose copied from the previous
    frame)."""

    poses: CameraPoseSequence
    coefficients: np.ndarray
    degenerate_frames: tuple[int, ...]


def _require_centered(tracks: TrackTable, who: str) -> None:
    if not tracks.centered:
        raise ValueError(f"{who} expects a centroid-registered track table")


def select_basis_count(tracks: TrackTable, energy_threshold: float = 0.999) -> int:
    """Pick the number of basis shapes from the singular spectrum of W.

    Returns the smallest K whose top 3K singular values carry at least
    ``energy_threshold`` of the total squared spectrum, clamped to the range
    representable by the track dimensions.
    """
    _require_centered(tracks, "select_basis_count")
    if not 0.0 < energy_threshold <= 1.0:
        raise ValueError("energy_threshold must lie in (0, 1]")
    spectrum = np.linalg.svd(tracks.data, compute_uv=False)
    total = float(np.sum(spectrum**2))
    if total == 0.0:
        raise DegenerateInputError("track table is all zeros; no basis count exists")
    energy = np.cumsum(spectrum**2) / total
    k_max = max(1, min(tracks.data.shape) // 3)
    for k in range(1, k_max + 1):
        if 3 * k <= spectrum.size and energy[3 * k - 1] >= energy_threshold:
            return k
    return k_max


def truncated_factorization(tracks: TrackTable, basis_count: int) -> FactoredPair:
    """Best rank-3K factorization of the track matrix, balanced split.

    The motion factor absorbs the square roots of the top singular values and
    the basis factor the other half, so both carry comparable scale.
    """
    _require_centered(tracks, "truncated_factorization")
    rank = 3 * basis_count
    if basis_count < 1:
        raise ValueError("basis_count must be at least 1")
    if rank > min(tracks.data.shape):
        raise ValueError(
            f"rank 3K={rank} exceeds min(2T, N)={min(tracks.data.shape)}"
        )
    u, s, vt = np.linalg.svd(tracks.data, full_matrices=False)
    root = np.sqrt(s[:rank])
    return FactoredPair(u[:, :rank] * root, root[:, None] * vt[:rank])


def _kron_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # row t equals kron_row(a[t], b[t]) = b[t] (x) a[t]
    return (b[:, :, None] * a[:, None, :]).reshape(a.shape[0], -1)


def build_orthogonality_system(pair: FactoredPair) -> OrthogonalitySystem:
    """Stack the two metric constraints of every frame into one matrix.

    For frame i with uncorrected motion rows (m1, m2): row 2i enforces
    m1 F m1' = m2 F m2' (equal norms) and row 2i+1 enforces m1 F m2' = 0
    (orthogonality), both as linear functionals of vec(F).
    """
    first = pair.motion[0::2]
    second = pair.motion[1::2]
    rows = np.empty((2 * pair.frames, pair.motion.shape[1] ** 2), dtype=np.float64)
    rows[0::2] = _kron_rows(first, first) - _kron_rows(second, second)
    rows[1::2] = _kron_rows(first, second)
    return OrthogonalitySystem(rows)


def lipschitz_constant(system: OrthogonalitySystem) -> float:
    """Largest eigenvalue of A'A (the squared top singular value of A)."""
    top = float(np.linalg.norm(system.matrix, 2))
    if top == 0.0:
        raise DegenerateInputError("orthogonality system is all zeros")
    return top**2


def _rank3_psd(f: np.ndarray) -> np.ndarray:
    sym = 0.5 * (f + f.T)
    lam, vecs = np.linalg.eigh(sym)
    top = np.clip(lam[-3:], 0.0, None)
    lead = vecs[:, -3:]
    return (lead * top) @ lead.T


def rank3_psd_project(f: np.ndarray) -> CorrectiveGram:
    """Nearest rank-3 positive-semidefinite matrix in Frobenius norm.

    The input is symmetrized first; the top three eigenvalues are clamped to
    zero from below and all others dropped.  Idempotent.
    """
    f = np.asarray(f, dtype=np.float64)
    if f.ndim != 2 or f.shape[0] != f.shape[1]:
        raise ValueError(f"projection needs a square matrix, got {f.shape}")
    if not np.all(np.isfinite(f)):
        raise ValueError("projection input must be finite")
    return CorrectiveGram(_rank3_psd(f))


def _duplication(size: int) -> np.ndarray:
    """Matrix D with vec(F) = D @ vech(F) for symmetric F (column-major vec)."""
    half = size * (size + 1) // 2
    d = np.zeros((size * size, half), dtype=np.float64)
    col = 0
    for j in range(size):
        for i in range(j, size):
            d[j * size + i, col] = 1.0
            d[i * size + j, col] = 1.0
            col += 1
    return d


def _default_gram_init(system: OrthogonalitySystem) -> np.ndarray:
    """Least-squares starting point: the symmetric null-space element of the
    constraint system closest to the identity, or identity at unit trace when
    the numerical null space is empty."""
    size = system.gram_size
    dup = _duplication(size)
    null = scipy.linalg.null_space(system.matrix @ dup, rcond=1e-10)
    if null.size:
        span = dup @ null  # columns: symmetric null directions in vec coordinates
        target = np.eye(size).ravel(order="F")
        coefficients, *_ = np.linalg.lstsq(span, target, rcond=None)
        candidate = unvec(span @ coefficients, size, size)
        if np.linalg.norm(candidate) > 1e-12:
            return candidate
    return np.eye(size) / size


def _normalize_trace(f: np.ndarray) -> np.ndarray | None:
    trace = float(np.trace(f))
    if trace <= 1e-300:
        return None
    return f * (3.0 / trace)


def _system_tensor(a: np.ndarray, size: int) -> np.ndarray:
    """Reshape A so row r applied to vec(F) reads sum(tensor[r] * F)."""
    return np.ascontiguousarray(a.reshape(a.shape[0], size, size, order="F"))


def _rank3_factor(f: np.ndarray) -> np.ndarray:
    """Factor Q (size x 3) whose Gram QQ' is the top-3 eigenpart of f."""
    lam, vecs = np.linalg.eigh((f + f.T) / 2.0)
    return vecs[:, -3:] * np.sqrt(np.clip(lam[-3:], 0.0, None))


def _trace3_factor(q: np.ndarray) -> np.ndarray | None:
    """Rescale a factor so its Gram has trace 3; None for a vanishing factor."""
    norm = float(np.linalg.norm(q))
    if norm <= 1e-150:
        return None
    return q * (np.sqrt(3.0) / norm)


def _polish_factor(
    a3: np.ndarray, q0: np.ndarray, max_iters: int = 150
) -> tuple[np.ndarray, list[float], float, bool]:
    """Descend ||A vec(QQ')||^2 over factors Q with trace(QQ') pinned to 3.

    Damped Gauss-Newton with the analytic Jacobian of the quartic; every
    trial point is rescaled onto the trace sphere before evaluation so the
    scale gauge cannot fake descent by shrinking Q.  Returns the final
    factor, the accepted objective values (starting at the initial one),
    the Gram displacement of the last accepted step, and whether the loop
    exited stationary (no damping level descends) rather than at the cap.
    """
    q = _trace3_factor(np.asarray(q0, dtype=np.float64))
    if q is None:
        return np.zeros((a3.shape[1], 3)), [0.0], 0.0, True

    def evaluate(qm: np.ndarray) -> tuple[np.ndarray, float]:
        r = np.einsum("rab,ab->r", a3, qm @ qm.T)
        return r, float(r @ r)

    residual, value = evaluate(q)
    values = [value]
    damping = 1e-3
    displacement = 0.0
    stationary = False
    identity = np.eye(q.size)
    for _ in range(max_iters):
        if value == 0.0:
            stationary = True
            break
        grown = np.einsum("rab,bj->raj", a3, q) + np.einsum("rab,aj->rbj", a3, q)
        jac = grown.reshape(a3.shape[0], -1)
        gradient = jac.T @ residual
        hessian = jac.T @ jac
        accepted = False
        while damping <= 1e12:
            try:
                step = np.linalg.solve(hessian + damping * identity, gradient)
            except np.linalg.LinAlgError:
                damping *= 10.0
                continue
            candidate = _trace3_factor(q - step.reshape(q.shape))
            if candidate is None:
                damping *= 10.0
                continue
            cand_residual, cand_value = evaluate(candidate)
            if cand_value < value:
                displacement = float(
                    np.linalg.norm(candidate @ candidate.T - q @ q.T)
                )
                q, residual, value = candidate, cand_residual, cand_value
                values.append(value)
                damping = max(damping / 10.0, 1e-15)
                accepted = True
                break
            damping *= 10.0
        if not accepted:
            stationary = True
            break
    return q, values, displacement, stationary


def solve_gram_proximal(
    system: OrthogonalitySystem,
    f0: np.ndarray | None = None,
    config: SolverConfig | None = None,
) -> GramSolve:
    """Solve min ||A vec(F)||^2 over rank-3 PSD Grams of trace 3.

    Two phases.  First, projected gradient descent: a gradient step of
    length 1/L (L the largest eigenvalue of A'A), projection onto the
    rank-3 PSD cone, and a rescale to trace 3 that pins the scale gauge and
    keeps the zero matrix out of reach; a step that would raise the
    objective is rejected, which freezes the iterate and trips the
    displacement stopping rule.  Second, the rank-3 factor of the iterate
    is refined by damped Gauss-Newton on the factor itself, restarted from
    the initial point and from seeded random factors as well; the best
    refined Gram by objective is returned.  The refinement is what actually
    reaches the solution set when the basis count exceeds one: the fixed
    1/L step crawls there too slowly to be usable, while the factor
    parametrization turns the same objective into a small quartic problem.

    Parameters
    ----------
    system : OrthogonalitySystem
        Stacked metric constraints.
    f0 : ndarray, optional
        Symmetric starting matrix.  Default: the symmetric null-space element
        closest to the identity (identity at unit trace as fallback).
    config : SolverConfig, optional
        Supplies ``pg_max_iters``, ``pg_tol``, and the restart seed.

    Returns
    -------
    GramSolve
        Final Gram, the objective trace along the winning descent path,
        total iteration count, convergence flag.
    """
    cfg = config if config is not None else SolverConfig()
    a = system.matrix
    size = system.gram_size
    if f0 is None:
        start = _default_gram_init(system)
    else:
        start = np.asarray(f0, dtype=np.float64)
        if start.shape != (size, size):
            raise ValueError(f"f0 must be {size}x{size}, got {start.shape}")

    first = _normalize_trace(_rank3_psd(start))
    if first is None:
        first = _normalize_trace(np.eye(size))
    current = first
    ata = a.T @ a
    top = float(np.linalg.norm(a, 2))
    step = 1.0 / top**2 if top > 0.0 else 0.0

    def objective(f: np.ndarray) -> float:
        return float(np.sum((a @ f.ravel(order="F")) ** 2))

    pg_trace = [objective(current)]
    pg_converged = False
    iterations = 0
    for _ in range(cfg.pg_max_iters):
        iterations += 1
        flat = current.ravel(order="F")
        stepped = flat - step * (ata @ flat) if step else flat
        candidate = _normalize_trace(_rank3_psd(unvec(stepped, size, size)))
        if candidate is None:
            break  # gradient step annihilated the PSD part; keep current iterate
        value = objective(candidate)
        if value > pg_trace[-1] * (1.0 + 1e-12) + 1e-300:
            pg_converged = True  # no feasible descent left at this step length
            break
        displacement = float(np.linalg.norm(candidate - current))
        current = candidate
        pg_trace.append(value)
        if displacement <= cfg.pg_tol * (1.0 + float(np.linalg.norm(current))):
            pg_converged = True
            break

    a3 = _system_tensor(a, size)
    rng = np.random.default_rng(cfg.seed)
    starts = [("descent", _rank3_factor(current)), ("initial", _rank3_factor(first))]
    starts += [
        (f"restart{i}", rng.standard_normal((size, 3))) for i in range(2)
    ]
    polished = [(tag,) + _polish_factor(a3, q0) for tag, q0 in starts]
    tag, q, values, last_move, stationary = min(polished, key=lambda item: item[2][-1])

    final = _trace3_factor(q)
    if final is None:
        gram = current
        trace = tuple(pg_trace)
        converged = pg_converged
    else:
        gram = final @ final.T
        if tag == "descent":
            trace = tuple(pg_trace) + tuple(values[1:])
        elif values[0] >= pg_trace[0]:
            trace = (pg_trace[0],) + tuple(v for v in values if v <= pg_trace[0])
        else:
            trace = tuple(values)
        polish_moved = len(values) > 1
        converged = stationary or (
            not polish_moved and pg_converged
        ) or last_move <= cfg.pg_tol * (1.0 + float(np.linalg.norm(gram)))
        iterations += len(values) - 1
    return GramSolve(CorrectiveGram(gram), trace, iterations, converged)


def rigid_warm_start(
    tracks: TrackTable,
    pair: FactoredPair,
    config: SolverConfig | None = None,
) -> np.ndarray:
    """Gram warm start built from the rigid reading of the sequence.

    The basis-count-1 subproblem has no mixing ambiguity, so its metric
    upgrade is reliable; its per-frame poses and scales approximate the
    dominant-component motion whenever the mean shape outweighs the
    deformations.  Fitting the full motion factor onto those scaled poses by
    least squares gives a corrective factor in the right solution branch,
    returned here as a trace-3 Gram for use as ``f0``.
    """
    cfg = config if config is not None else SolverConfig()
    rigid_pair = truncated_factorization(tracks, 1)
    rigid_system = build_orthogonality_system(rigid_pair)
    solve = solve_gram_proximal(rigid_system, None, cfg)
    corrective = recover_corrective(solve.gram)
    recovery = recover_poses(rigid_pair, corrective)
    scales = np.asarray(recovery.coefficients, dtype=np.float64)
    target = (scales[:, None, None] * recovery.poses.blocks).reshape(-1, 3)
    factor, *_ = np.linalg.lstsq(pair.motion, target, rcond=None)
    gram = _normalize_trace(factor @ factor.T)
    if gram is None:
        raise DegenerateInputError("rigid warm start produced a zero Gram")
    return gram


def recover_corrective(gram: CorrectiveGram) -> np.ndarray:
    """Factor the Gram as Q Q' with Q of shape (3K, 3) via its eigen square root.

    Columns are ordered by decreasing eigenvalue.  A Gram of rank below 3
    (degenerate motion) yields zero-padded columns and a warning.
    """
    lam, vecs = np.linalg.eigh(gram.matrix)
    top = lam[-3:][::-1]
    lead = vecs[:, -3:][:, ::-1]
    scale = max(float(top[0]), 0.0)
    usable = top > 1e-12 * max(scale, 1e-300)
    if not np.all(usable):
        warnings.warn(
            "corrective Gram has rank below 3; zero-padding the missing columns",
            RuntimeWarning,
            stacklevel=2,
        )
    roots = np.sqrt(np.clip(top, 0.0, None))
    return lead * roots


def recover_poses(pair: FactoredPair, corrective: np.ndarray) -> PoseRecovery:
    """Turn corrected motion rows into orthonormal pose blocks and scales.

    For every frame the corrected 2x3 block P_i is split into a scale
    c_i = sqrt of the mean squared row norm and the nearest row-orthonormal
    matrix to P_i / c_i (polar factor).  Frames whose scale is negligible
    against the largest one inherit the previous frame's pose and are
    reported in ``degenerate_frames``.
    """
    corrective = np.asarray(corrective, dtype=np.float64)
    if corrective.shape != (pair.motion.shape[1], 3):
        raise ValueError(
            f"corrective must be {pair.motion.shape[1]}x3, got {corrective.shape}"
        )
    projected = (pair.motion @ corrective).reshape(pair.frames, 2, 3)
    scales = np.sqrt(np.sum(projected**2, axis=(1, 2)) / 2.0)
    cutoff = 1e-12 * float(scales.max()) if scales.size else 0.0
    blocks = np.empty_like(projected)
    previous = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    degenerate: list[int] = []
    for i in range(pair.frames):
        if scales[i] <= cutoff:
            blocks[i] = previous
            degenerate.append(i)
            continue
        u, _, vt = np.linalg.svd(projected[i] / scales[i], full_matrices=False)
        blocks[i] = u @ vt
        previous = blocks[i]
    coefficients = scales.copy()
    coefficients.setflags(write=False)
    return PoseRecovery(CameraPoseSequence(blocks), coefficients, tuple(degenerate))
