"""Calibration error metrics and reprojection rendering.

Per-axis rotation errors use a fixed extrinsic Z-Y-X Euler convention
(yaw about z, then pitch about y, then roll about x, all about fixed axes).
The convention is a reporting choice; the geodesic angle is
convention-free and is always reported alongside.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

from .camera import CameraIntrinsics, project_points
from .errors import BehindCameraError
from .geometry import PointCloud, RigidTransform, geodesic_angle


@dataclass(frozen=True)
class CalibrationErrors:
    rotation_error_deg: float
    translation_error_m: float
    per_axis_rotation_deg: tuple[float, float, float]  # roll, pitch, yaw
    per_axis_translation_m: tuple[float, float, float]  # |dx|, |dy|, |dz|


def euler_zyx_extrinsic(R: np.ndarray) -> tuple[float, float, float]:
    """(roll, pitch, yaw) in degrees for R = Rz(yaw) @ Ry(pitch) @ Rx(roll)."""
    pitch = np.arcsin(np.clip(-R[2, 0], -1.0, 1.0))
    if abs(abs(R[2, 0]) - 1.0) < 1e-12:
        # gimbal lock: fold yaw into roll
        roll = np.arctan2(-R[0, 1], R[1, 1])
        yaw = 0.0
    else:
        roll = np.arctan2(R[2, 1], R[2, 2])
        yaw = np.arctan2(R[1, 0], R[0, 0])
    return tuple(np.degrees([roll, pitch, yaw]))


def rotation_error(Rc: np.ndarray, Rtrue: np.ndarray) -> float:
    """Geodesic angle between two rotations, in degrees."""
    return float(np.degrees(geodesic_angle(np.asarray(Rc), np.asarray(Rtrue))))


def translation_error(tc: np.ndarray, ttrue: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(tc, dtype=float) - np.asarray(ttrue, dtype=float)))


def calibration_errors(estimate: RigidTransform, truth: RigidTransform) -> CalibrationErrors:
    ec = euler_zyx_extrinsic(estimate.rotation)
    et = euler_zyx_extrinsic(truth.rotation)
    per_rot = tuple(abs(a - b) for a, b in zip(ec, et))
    per_tr = tuple(abs(float(d)) for d in estimate.translation - truth.translation)
    return CalibrationErrors(
        rotation_error_deg=rotation_error(estimate.rotation, truth.rotation),
        translation_error_m=translation_error(estimate.translation, truth.translation),
        per_axis_rotation_deg=per_rot,
        per_axis_translation_m=per_tr,
    )


def reprojection_error(
    center_3d: np.ndarray,
    extrinsic: RigidTransform,
    K: CameraIntrinsics,
    observed_center: np.ndarray,
) -> float:
    """Pixel distance between a reprojected LiDAR point and its true image location."""
    p = extrinsic.apply(np.asarray(center_3d, dtype=float))
    if p[2] <= 0:
        raise BehindCameraError("target center behind the camera")
    uv = project_points(K, p[None, :])[0]
    return float(np.linalg.norm(uv - np.asarray(observed_center, dtype=float)))


def _depth_colormap(depth: np.ndarray) -> np.ndarray:
    """Map normalized depth in [0, 1] to RGB (near = red, far = blue)."""
    d = np.clip(depth, 0.0, 1.0)
    r = np.clip(1.5 - np.abs(4.0 * d - 0.5), 0.0, 1.0)
    g = np.clip(1.5 - np.abs(4.0 * d - 2.0), 0.0, 1.0)
    b = np.clip(1.5 - np.abs(4.0 * d - 3.5), 0.0, 1.0)
    return (np.stack([r, g, b], axis=-1) * 255).astype(np.uint8)


def render_reprojection(
    cloud: PointCloud,
    extrinsic: RigidTransform,
    K: CameraIntrinsics,
    image_size: tuple[int, int] | None = None,
    splat_radius: int = 1,
) -> Image.Image:
    """Depth-colored splat of all points in front of the camera."""
    w, h = image_size if image_size is not None else (K.image_width, K.image_height)
    buf = np.zeros((h, w, 3), dtype=np.uint8)
    if len(cloud) == 0:
        return Image.fromarray(buf)
    pts = extrinsic.apply(cloud.points)
    front = pts[:, 2] > 0
    pts = pts[front]
    if len(pts) == 0:
        return Image.fromarray(buf)
    uv = project_points(K, pts)
    depth = pts[:, 2]
    lo, hi = depth.min(), depth.max()
    norm = (depth - lo) / (hi - lo) if hi > lo else np.zeros_like(depth)
    colors = _depth_colormap(norm)
    # draw far-to-near so near splats win
    order = np.argsort(-depth)
    for i in order:
        u, v = int(round(uv[i, 0])), int(round(uv[i, 1]))
        if not (0 <= u < w and 0 <= v < h):
            continue
        r = splat_radius
        buf[max(v - r, 0) : v + r + 1, max(u - r, 0) : u + r + 1] = colors[i]
    return Image.fromarray(buf)
