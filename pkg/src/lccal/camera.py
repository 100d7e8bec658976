"""Board pose estimation from checkerboard corners and the pinhole distance prior.

Corners arrive already detected (row-major board order); this module never
touches raster images. The world frame is attached to the board: interior
corner (row, col) sits at (col * square_size, row * square_size, 0).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .errors import BehindCameraError, DegenerateDistanceError, PoseEstimationError
from .geometry import Frame, RigidTransform, matrix_to_rotvec, orthonormalize, rotvec_to_matrix


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    image_width: int
    image_height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.image_width and 0 <= self.cy < self.image_height):
            raise ValueError("principal point must lie inside the image")

    @property
    def focal_mean(self) -> float:
        return 0.5 * (self.fx + self.fy)


@dataclass(frozen=True)
class BoardSpec:
    rows: int  # interior corners per column
    cols: int  # interior corners per row
    square_size: float  # meters

    def __post_init__(self):
        if self.rows < 2 or self.cols < 2:
            raise ValueError("board needs at least 2x2 interior corners")
        if self.square_size <= 0:
            raise ValueError("square_size must be positive")

    def corner_grid(self) -> np.ndarray:
        """World-frame corner positions, row-major, shape (rows*cols, 3)."""
        rows, cols = np.mgrid[0 : self.rows, 0 : self.cols]
        xy = np.stack(
            [cols.ravel() * self.square_size, rows.ravel() * self.square_size], axis=1
        )
        return np.hstack([xy, np.zeros((xy.shape[0], 1))])


@dataclass(frozen=True)
class BoardPose:
    """Camera-to-world transform plus the mean corner reprojection residual."""

    transform: RigidTransform  # camera -> world
    residual_px: float

    def __post_init__(self):
        if self.transform.source is not Frame.CAMERA or self.transform.target is not Frame.WORLD:
            raise ValueError("board pose must map camera -> world")
        if self.residual_px < 0:
            raise ValueError("residual must be non-negative")


def project_point(K: CameraIntrinsics, p: np.ndarray) -> tuple[float, float]:
    p = np.asarray(p, dtype=float).reshape(3)
    if p[2] <= 0:
        raise BehindCameraError(f"point has z = {p[2]:.6g} <= 0")
    return (K.fx * p[0] / p[2] + K.cx, K.fy * p[1] / p[2] + K.cy)


def project_points(K: CameraIntrinsics, pts: np.ndarray) -> np.ndarray:
    pts = np.asarray(pts, dtype=float).reshape(-1, 3)
    if np.any(pts[:, 2] <= 0):
        raise BehindCameraError("point set contains z <= 0")
    uv = pts[:, :2] / pts[:, 2:3]
    uv[:, 0] = K.fx * uv[:, 0] + K.cx
    uv[:, 1] = K.fy * uv[:, 1] + K.cy
    return uv


def _normalization(pts: np.ndarray) -> np.ndarray:
    """Similarity normalization (Hartley) for 2-D points; returns 3x3 matrix."""
    centroid = pts.mean(axis=0)
    d = np.linalg.norm(pts - centroid, axis=1).mean()
    if d < 1e-12:
        raise PoseEstimationError("degenerate point configuration (all coincident)")
    s = np.sqrt(2.0) / d
    return np.array(
        [[s, 0.0, -s * centroid[0]], [0.0, s, -s * centroid[1]], [0.0, 0.0, 1.0]]
    )


def _homography_dlt(world_xy: np.ndarray, pixels: np.ndarray) -> np.ndarray:
    Tw = _normalization(world_xy)
    Tp = _normalization(pixels)
    wh = np.hstack([world_xy, np.ones((len(world_xy), 1))]) @ Tw.T
    ph = np.hstack([pixels, np.ones((len(pixels), 1))]) @ Tp.T
    n = len(world_xy)
    A = np.zeros((2 * n, 9))
    A[0::2, 0:3] = wh
    A[0::2, 6:9] = -ph[:, 0:1] * wh
    A[1::2, 3:6] = wh
    A[1::2, 6:9] = -ph[:, 1:2] * wh
    _, s, Vt = np.linalg.svd(A)
    if s[-2] < 1e-9 * s[0]:
        raise PoseEstimationError("homography system is rank-deficient")
    H = Vt[-1].reshape(3, 3)
    # a homography collapsing the plane onto a line (collinear pixels) is
    # singular even when the DLT system itself is well-determined
    if abs(np.linalg.det(H / np.linalg.norm(H))) < 1e-10:
        raise PoseEstimationError("homography is singular (collinear observations)")
    return np.linalg.inv(Tp) @ H @ Tw


def estimate_board_pose(
    K: CameraIntrinsics, spec: BoardSpec, corners: np.ndarray
) -> BoardPose:
    """Recover the board pose from pixel corner observations.

    DLT homography from the planar corner grid to pixels, decomposed with the
    known intrinsics, then nonlinear refinement of the corner reprojection.
    """
    corners = np.asarray(corners, dtype=float).reshape(-1, 2)
    world = spec.corner_grid()
    if corners.shape[0] != world.shape[0]:
        raise PoseEstimationError(
            f"expected {world.shape[0]} corners, got {corners.shape[0]}"
        )
    H = _homography_dlt(world[:, :2], corners)

    Kmat = np.array([[K.fx, 0.0, K.cx], [0.0, K.fy, K.cy], [0.0, 0.0, 1.0]])
    B = np.linalg.inv(Kmat) @ H
    scale = 2.0 / (np.linalg.norm(B[:, 0]) + np.linalg.norm(B[:, 1]))
    if not np.isfinite(scale):
        raise PoseEstimationError("homography decomposition diverged")
    r1, r2, t = scale * B[:, 0], scale * B[:, 1], scale * B[:, 2]
    if t[2] < 0:  # board must sit in front of the camera
        r1, r2, t = -r1, -r2, -t
    R_cw = orthonormalize(np.column_stack([r1, r2, np.cross(r1, r2)]))

    # refine world->camera over rotvec + translation
    def residuals(x: np.ndarray) -> np.ndarray:
        R = rotvec_to_matrix(x[:3])
        pc = world @ R.T + x[3:]
        if np.any(pc[:, 2] <= 0):
            return np.full(2 * len(world), 1e6)
        return (project_points(K, pc) - corners).ravel()

    x0 = np.concatenate([matrix_to_rotvec(R_cw), t])
    sol = least_squares(residuals, x0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
    R_cw = orthonormalize(rotvec_to_matrix(sol.x[:3]))
    t_cw = sol.x[3:]
    res_px = float(np.linalg.norm(sol.fun.reshape(-1, 2), axis=1).mean())

    world_from_camera = RigidTransform(R_cw, t_cw, Frame.WORLD, Frame.CAMERA).inverse()
    return BoardPose(world_from_camera, res_px)


def estimate_board_distance(
    K: CameraIntrinsics, spec: BoardSpec, corners: np.ndarray
) -> float:
    """Board-to-camera range prior from similar triangles.

    l = f * w' / w, with w the pixel distance of an adjacent corner pair and
    w' = square_size its metric counterpart. The median over all horizontally
    and vertically adjacent pairs is used; this is only a selection prior and
    underestimates range for tilted boards.
    """
    corners = np.asarray(corners, dtype=float).reshape(spec.rows, spec.cols, 2)
    gaps = []
    gaps.append(np.linalg.norm(np.diff(corners, axis=1), axis=2).ravel())  # horizontal
    gaps.append(np.linalg.norm(np.diff(corners, axis=0), axis=2).ravel())  # vertical
    w = np.concatenate(gaps)
    if np.any(w < 1.0):
        raise DegenerateDistanceError("adjacent corner spacing below 1 px")
    return float(np.median(K.focal_mean * spec.square_size / w))
