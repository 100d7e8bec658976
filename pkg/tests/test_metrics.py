"""Error metrics and reprojection rendering."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import SMALL_BOARD, ground_truth, make_scene, random_rotation
from lccal.camera import CameraIntrinsics, project_points
from lccal.errors import BehindCameraError
from lccal.geometry import Frame, PointCloud, RigidTransform, rotvec_to_matrix
from lccal.metrics import (
    calibration_errors,
    euler_zyx_extrinsic,
    render_reprojection,
    reprojection_error,
    rotation_error,
    translation_error,
)
from lccal.synth import facing_board_pose, generate_frame

K = CameraIntrinsics(500.0, 500.0, 320.0, 240.0, 640, 480)

unit = st.floats(-1.0, 1.0, allow_nan=False)


@st.composite
def rotations(draw):
    v = np.array([draw(unit), draw(unit), draw(unit)])
    n = np.linalg.norm(v)
    if n < 1e-6:
        return np.eye(3)
    return rotvec_to_matrix(v / n * draw(st.floats(0.0, 3.0)))


def rot_z_deg(deg):
    return rotvec_to_matrix(np.array([0.0, 0.0, np.deg2rad(deg)]))


class TestRotationError:
    def test_equal_rotations(self):
        R = rot_z_deg(33)
        assert rotation_error(R, R) == 0.0

    def test_one_degree_about_z(self):
        assert rotation_error(rot_z_deg(1.0), np.eye(3)) == pytest.approx(1.0, abs=1e-9)

    @given(rotations(), rotations())
    @settings(deadline=None)
    def test_symmetric(self, A, B):
        assert abs(rotation_error(A, B) - rotation_error(B, A)) < 1e-9

    @given(rotations(), rotations(), rotations())
    @settings(deadline=None, max_examples=50)
    def test_bi_invariant(self, A, B, Q):
        base = rotation_error(A, B)
        assert abs(rotation_error(Q @ A, Q @ B) - base) < 1e-9
        assert abs(rotation_error(A @ Q, B @ Q) - base) < 1e-9


class TestTranslationError:
    def test_equal(self):
        t = np.array([1.0, -2.0, 3.0])
        assert translation_error(t, t) == 0.0

    def test_three_four_five(self):
        assert translation_error(
            np.array([0.03, 0.04, 0.0]), np.zeros(3)
        ) == pytest.approx(0.05)

    def test_matches_componentwise_oracle(self, rng):
        a, b = rng.normal(size=3), rng.normal(size=3)
        expected = np.sqrt(sum((ai - bi) ** 2 for ai, bi in zip(a, b)))
        assert translation_error(a, b) == pytest.approx(expected, rel=1e-12)


class TestEulerConvention:
    def test_pure_yaw(self):
        roll, pitch, yaw = euler_zyx_extrinsic(rot_z_deg(12.0))
        assert yaw == pytest.approx(12.0, abs=1e-9)
        assert roll == pytest.approx(0.0, abs=1e-9)
        assert pitch == pytest.approx(0.0, abs=1e-9)

    def test_calibration_errors_shape(self, gt):
        off = RigidTransform(
            rot_z_deg(1.0) @ gt.rotation, gt.translation + [0.01, 0, 0],
            Frame.LIDAR, Frame.CAMERA,
        )
        err = calibration_errors(off, gt)
        assert err.rotation_error_deg == pytest.approx(1.0, abs=1e-6)
        assert err.translation_error_m == pytest.approx(0.01, abs=1e-9)
        assert len(err.per_axis_rotation_deg) == 3
        assert len(err.per_axis_translation_m) == 3

    def test_identity_gives_zeros(self, gt):
        err = calibration_errors(gt, gt)
        assert err.rotation_error_deg == 0.0
        assert err.translation_error_m == 0.0
        assert all(v == pytest.approx(0.0, abs=1e-12) for v in err.per_axis_rotation_deg)


class TestReprojectionError:
    def test_zero_at_ground_truth(self, gt):
        center = np.array([0.1, -0.2, 3.0])
        observed = project_points(K, gt.apply(center[None, :]))[0]
        assert reprojection_error(center, gt, K, observed) < 1e-6

    def test_small_rotation_formula(self):
        # 0.05 deg rotation about an axis perpendicular to a 3 m ray at
        # f = 500 px shifts the pixel by about f * tan(0.05 deg) = 0.44 px
        ident = RigidTransform.identity(Frame.LIDAR, Frame.CAMERA)
        center = np.array([0.0, 0.0, 3.0])
        observed = project_points(K, center[None, :])[0]
        off = RigidTransform(
            rotvec_to_matrix(np.array([np.deg2rad(0.05), 0.0, 0.0])),
            np.zeros(3), Frame.LIDAR, Frame.CAMERA,
        )
        err = reprojection_error(center, off, K, observed)
        assert err == pytest.approx(500 * np.tan(np.deg2rad(0.05)), rel=0.01)

    def test_behind_camera(self, gt):
        back = np.array([0.0, 0.0, -3.0])
        with pytest.raises(BehindCameraError):
            reprojection_error(back, RigidTransform.identity(Frame.LIDAR, Frame.CAMERA),
                               K, np.array([0.0, 0.0]))


class TestRenderReprojection:
    def _board_frame(self):
        spec = make_scene(0, board=SMALL_BOARD)
        return spec, generate_frame(spec, facing_board_pose(spec), frame_index=0)

    def test_deterministic(self, gt):
        spec, fr = self._board_frame()
        K_cam = spec.camera.intrinsics
        a = render_reprojection(fr.cloud, gt, K_cam)
        b = render_reprojection(fr.cloud, gt, K_cam)
        assert a.tobytes() == b.tobytes()

    def test_points_behind_camera_skipped(self):
        flipped = RigidTransform(
            rotvec_to_matrix(np.array([np.pi, 0.0, 0.0])), np.zeros(3),
            Frame.LIDAR, Frame.CAMERA,
        )
        cloud = PointCloud(np.array([[0.0, 0.0, 2.0]]), Frame.LIDAR)
        img = render_reprojection(cloud, flipped, K)
        assert np.asarray(img).max() == 0

    def test_board_splats_inside_projected_quad(self, gt):
        spec, fr = self._board_frame()
        K_cam = spec.camera.intrinsics
        board = PointCloud(fr.cloud.points[fr.labels == "board"], Frame.LIDAR)
        img = np.asarray(render_reprojection(board, gt, K_cam))
        ys, xs = np.nonzero(img.sum(axis=2))
        assert len(xs) > 0
        # all lit pixels inside the projected footprint of the board points
        uv = project_points(K_cam, gt.apply(board.points))
        pad = 2.0  # splat radius
        assert xs.min() >= uv[:, 0].min() - pad and xs.max() <= uv[:, 0].max() + pad
        assert ys.min() >= uv[:, 1].min() - pad and ys.max() <= uv[:, 1].max() + pad

    def test_custom_image_size(self, gt):
        cloud = PointCloud(np.array([[0.0, 0.0, 2.0]]), Frame.LIDAR)
        img = render_reprojection(cloud, gt, K, image_size=(100, 80))
        assert img.size == (100, 80)
