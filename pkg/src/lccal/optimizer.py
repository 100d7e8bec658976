"""Co-planar constraint solver for the LiDAR-to-camera extrinsic.

Every extracted board point, chained LiDAR -> camera -> world, must land on
the board plane z = 0. The solver minimizes the robustified sum of squared
z-coordinates over a 6-parameter chart (axis-angle increment + translation)
with Levenberg-style damping.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .camera import BoardPose
from .geometry import Frame, PointCloud, RigidTransform, orthonormalize, rotvec_to_matrix


@dataclass(frozen=True, eq=False)
class CalibrationFrame:
    """One synchronized observation: extracted board points + camera board pose."""

    board_points: PointCloud  # LiDAR frame
    board_pose: BoardPose

    def __post_init__(self):
        if self.board_points.frame is not Frame.LIDAR:
            raise ValueError("board points must be in the LiDAR frame")
        if len(self.board_points) == 0:
            raise ValueError("board points must be non-empty")


@dataclass(frozen=True, eq=False)
class ObservabilityReport:
    distinct_orientation_count: int
    normal_gram_eigenvalues: np.ndarray  # descending, >= 0
    rank_estimate: int
    warning: str | None = None


class DegeneracyWarning(UserWarning):
    """The frame set does not constrain all six extrinsic degrees of freedom."""


@dataclass(frozen=True)
class SolverOptions:
    max_iterations: int = 100
    parameter_tolerance: float = 1e-12
    residual_tolerance: float = 1e-14
    damping_init: float = 1e-4
    huber_delta: float = 0.06  # meters; 3x the default RANSAC threshold
    min_points: int = 50
    initial_guess: RigidTransform | None = None

    def __post_init__(self):
        if min(self.parameter_tolerance, self.residual_tolerance, self.damping_init,
               self.huber_delta) <= 0:
            raise ValueError("tolerances must be positive")


@dataclass(frozen=True, eq=False)
class ExtrinsicEstimate:
    transform: RigidTransform  # LiDAR -> camera
    rms_residual: float
    iterations: int
    converged: bool
    observability: ObservabilityReport


def _frame_plane(frame: CalibrationFrame) -> tuple[np.ndarray, float]:
    """Board plane in the camera frame as (normal row a, offset c): z_W = a.P_C + c."""
    T = frame.board_pose.transform
    return T.rotation[2], float(T.translation[2])


def coplanar_residuals(
    x: RigidTransform, frames: list[CalibrationFrame]
) -> np.ndarray:
    """World-frame z of every extracted point under extrinsic x.

    Order is deterministic: frame order, then point order within each frame.
    """
    out = []
    for frame in frames:
        a, c = _frame_plane(frame)
        pc = frame.board_points.points @ x.rotation.T + x.translation
        out.append(pc @ a + c)
    return np.concatenate(out)


def _residuals_jacobian(
    R: np.ndarray, t: np.ndarray, frames: list[CalibrationFrame]
) -> tuple[np.ndarray, np.ndarray]:
    res = []
    jac = []
    for frame in frames:
        a, c = _frame_plane(frame)
        rp = frame.board_points.points @ R.T
        res.append(rp @ a + t @ a + c)
        # left perturbation R <- exp(dw)R: dr = dw . (Rp x a); translation: dr = a . dt
        J = np.empty((len(rp), 6))
        J[:, :3] = np.cross(rp, a)
        J[:, 3:] = a
        jac.append(J)
    return np.concatenate(res), np.vstack(jac)


def _huber_cost_weights(r: np.ndarray, delta: float) -> tuple[float, np.ndarray]:
    absr = np.abs(r)
    small = absr <= delta
    cost = float(np.sum(r[small] ** 2) + np.sum(2 * delta * absr[~small] - delta**2))
    w = np.where(small, 1.0, delta / np.maximum(absr, 1e-300))
    return cost, w


def observability_check(frames: list[CalibrationFrame]) -> ObservabilityReport:
    """Rank analysis of the board-plane normals across frames.

    Each frame constrains translation only along its board normal; the Gram
    matrix of the camera-frame normals tells which directions are pinned.
    """
    normals = np.array([_frame_plane(f)[0] for f in frames])
    gram = normals.T @ normals
    eig = np.sort(np.linalg.eigvalsh(gram))[::-1]
    eig = np.clip(eig, 0.0, None)
    rank = int(np.sum(eig > 1e-6))

    distinct: list[np.ndarray] = []
    for n in normals:
        if all(
            np.degrees(np.arccos(np.clip(abs(n @ d), -1.0, 1.0))) >= 5.0
            for d in distinct
        ):
            distinct.append(n)
    count = len(distinct)
    warning = None
    if count < 3:
        free = 3 - rank
        warning = (
            f"only {count} distinct board orientation(s); extrinsic is rank-deficient "
            f"(rank {rank} of 3 translation directions constrained, {free} free)"
        )
    return ObservabilityReport(count, eig, rank, warning)


def solve_extrinsics(
    frames: list[CalibrationFrame], opts: SolverOptions | None = None
) -> ExtrinsicEstimate:
    """Damped least squares on the co-planar constraint.

    Levenberg damping is adjusted multiplicatively (x10 on a rejected step,
    /10 on acceptance); residuals pass through a Huber loss so stray points
    that survived extraction cannot dominate.
    """
    if not frames:
        raise ValueError("frames must be non-empty")
    opts = opts or SolverOptions()
    total = sum(len(f.board_points) for f in frames)
    if total < opts.min_points:
        from .errors import InsufficientPointsError

        raise InsufficientPointsError(
            f"{total} points across frames, need >= {opts.min_points}"
        )

    init = opts.initial_guess or RigidTransform.identity(Frame.LIDAR, Frame.CAMERA)
    R = init.rotation.copy()
    t = init.translation.copy()
    lam = opts.damping_init
    r, J = _residuals_jacobian(R, t, frames)
    cost, w = _huber_cost_weights(r, opts.huber_delta)
    converged = False
    iterations = 0
    for iterations in range(1, opts.max_iterations + 1):
        Jw = J * w[:, None]
        H = J.T @ Jw
        g = Jw.T @ r
        accepted = False
        for _ in range(50):
            try:
                step = np.linalg.solve(H + lam * np.eye(6), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            R_new = orthonormalize(rotvec_to_matrix(step[:3]) @ R)
            t_new = t + step[3:]
            r_new, J_new = _residuals_jacobian(R_new, t_new, frames)
            cost_new, w_new = _huber_cost_weights(r_new, opts.huber_delta)
            if cost_new <= cost:
                accepted = True
                lam = max(lam / 10.0, 1e-15)
                break
            lam *= 10.0
        if not accepted:
            # damping escalation exhausted: no step decreases the cost, so the
            # relative residual decrease is 0 < residual_tolerance
            converged = True
            break
        rel_decrease = (cost - cost_new) / max(cost, 1e-300)
        R, t, r, J, cost, w = R_new, t_new, r_new, J_new, cost_new, w_new
        if np.linalg.norm(step) < opts.parameter_tolerance or rel_decrease < opts.residual_tolerance:
            converged = True
            break

    report = observability_check(frames)
    if report.warning is not None:
        warnings.warn(report.warning, DegeneracyWarning, stacklevel=2)
    transform = RigidTransform(orthonormalize(R), t, Frame.LIDAR, Frame.CAMERA)
    rms = float(np.sqrt(np.mean(r**2)))
    return ExtrinsicEstimate(transform, rms, iterations, converged, report)
