"""Rigid-body math and coordinate-frame bookkeeping.

Rotations are stored as 3x3 matrices; axis-angle is used only as the
optimizer's local 3-parameter chart. Frame labels travel with every
transform and cloud so that frame confusion fails loudly instead of
silently producing garbage extrinsics.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import FrameMismatchError

ORTHONORMAL_TOL = 1e-9


class Frame(enum.Enum):
    LIDAR = "lidar"
    CAMERA = "camera"
    WORLD = "world"


def _as_readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.flags.writeable = False
    return out


def orthonormalize(R: np.ndarray) -> np.ndarray:
    """Project a near-rotation onto SO(3) via polar decomposition."""
    U, _, Vt = np.linalg.svd(R)
    out = U @ Vt
    if np.linalg.det(out) < 0:
        out = U @ np.diag([1.0, 1.0, -1.0]) @ Vt
    return out


def is_rotation(R: np.ndarray, tol: float = ORTHONORMAL_TOL) -> bool:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        return False
    return (
        np.allclose(R.T @ R, np.eye(3), atol=tol)
        and abs(np.linalg.det(R) - 1.0) <= tol
    )


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """A rotation + translation pair mapping source-frame points to the target frame."""

    rotation: np.ndarray
    translation: np.ndarray
    source: Frame
    target: Frame

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        if not is_rotation(R, tol=1e-7):
            raise ValueError("rotation is not orthonormal with determinant +1")
        # re-project so downstream arithmetic sees an exact-enough rotation
        object.__setattr__(self, "rotation", _as_readonly(orthonormalize(R)))
        object.__setattr__(self, "translation", _as_readonly(t))

    @classmethod
    def identity(cls, source: Frame, target: Frame | None = None) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3), source, target if target is not None else source)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform one point (3,) or many (N, 3)."""
        p = np.asarray(points, dtype=float)
        return p @ self.rotation.T + self.translation

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self ∘ other: first apply `other`, then `self`."""
        if other.target is not self.source:
            raise FrameMismatchError(
                f"cannot compose {self.source.value}->{self.target.value} "
                f"with {other.source.value}->{other.target.value}"
            )
        return RigidTransform(
            orthonormalize(self.rotation @ other.rotation),
            self.rotation @ other.translation + self.translation,
            other.source,
            self.target,
        )

    def inverse(self) -> "RigidTransform":
        Rt = self.rotation.T
        return RigidTransform(Rt, -Rt @ self.translation, self.target, self.source)

    def relabel(self, source: Frame, target: Frame) -> "RigidTransform":
        return RigidTransform(self.rotation, self.translation, source, target)


def transform_point(T: RigidTransform, p: np.ndarray) -> np.ndarray:
    return T.apply(p)


def compose(A: RigidTransform, B: RigidTransform) -> RigidTransform:
    return A.compose(B)


def invert(T: RigidTransform) -> RigidTransform:
    return T.inverse()


@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray  # (N, 3)
    frame: Frame

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(p)):
            raise ValueError("point cloud contains non-finite coordinates")
        object.__setattr__(self, "points", _as_readonly(p))

    def __len__(self) -> int:
        return self.points.shape[0]

    def transformed(self, T: RigidTransform) -> "PointCloud":
        if T.source is not self.frame:
            raise FrameMismatchError(
                f"cloud is in {self.frame.value}, transform maps from {T.source.value}"
            )
        return PointCloud(T.apply(self.points), T.target)


@dataclass(frozen=True, eq=False)
class AxisAngle:
    """Unit axis and angle in [0, pi]; the optimizer's rotation chart."""

    axis: np.ndarray
    angle: float

    def __post_init__(self):
        a = np.asarray(self.axis, dtype=float).reshape(3)
        n = np.linalg.norm(a)
        if abs(n - 1.0) > 1e-6:
            raise ValueError("axis must be unit length")
        if not (0.0 <= self.angle <= np.pi + 1e-12):
            raise ValueError("angle must lie in [0, pi]")
        object.__setattr__(self, "axis", _as_readonly(a / n))


def axis_angle_to_matrix(a: AxisAngle) -> np.ndarray:
    return rotvec_to_matrix(a.axis * a.angle)


def matrix_to_axis_angle(R: np.ndarray) -> AxisAngle:
    w = matrix_to_rotvec(R)
    angle = float(np.linalg.norm(w))
    if angle < 1e-12:
        return AxisAngle(np.array([0.0, 0.0, 1.0]), 0.0)
    return AxisAngle(w / angle, min(angle, np.pi))


def rotvec_to_matrix(w: np.ndarray) -> np.ndarray:
    """Rodrigues formula: rotation vector (axis * angle) to matrix."""
    w = np.asarray(w, dtype=float).reshape(3)
    theta = np.linalg.norm(w)
    if theta < 1e-12:
        K = skew(w)
        return np.eye(3) + K  # first-order term is exact enough below 1e-12
    axis = w / theta
    K = skew(axis)
    return np.eye(3) + np.sin(theta) * K + (1.0 - np.cos(theta)) * (K @ K)


def matrix_to_rotvec(R: np.ndarray) -> np.ndarray:
    """Inverse of rotvec_to_matrix; handles the angle ~ 0 and ~ pi branches."""
    R = np.asarray(R, dtype=float)
    cos_theta = np.clip((np.trace(R) - 1.0) / 2.0, -1.0, 1.0)
    theta = np.arccos(cos_theta)
    if theta < 1e-9:
        # near-identity: skew part is theta * axis to first order
        return np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]]) / 2.0
    if np.pi - theta < 1e-6:
        # near pi the skew part vanishes; recover axis from the symmetric part
        M = (R + np.eye(3)) / 2.0
        axis = np.sqrt(np.clip(np.diag(M), 0.0, None))
        k = int(np.argmax(axis))
        axis = M[:, k] / axis[k]
        axis = axis / np.linalg.norm(axis)
        # fix signs using the largest component as reference
        return axis * theta
    axis = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    axis = axis / (2.0 * np.sin(theta))
    return axis * theta


def skew(v: np.ndarray) -> np.ndarray:
    x, y, z = np.asarray(v, dtype=float).reshape(3)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def geodesic_angle(Ra: np.ndarray, Rb: np.ndarray) -> float:
    """Angle in radians between two rotations.

    Uses ||Ra - Rb||_F = 2*sqrt(2)*sin(theta/2) for small angles, where the
    trace/arccos form loses half the available precision, and falls back to
    arccos for large angles where arcsin degrades instead.
    """
    cos_theta = np.clip((np.trace(Ra @ Rb.T) - 1.0) / 2.0, -1.0, 1.0)
    if cos_theta < 0.0:
        return float(np.arccos(cos_theta))
    sin_half = np.clip(np.linalg.norm(Ra - Rb) / (2.0 * np.sqrt(2.0)), 0.0, 1.0)
    return float(2.0 * np.arcsin(sin_half))
