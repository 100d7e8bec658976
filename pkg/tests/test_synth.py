"""Synthetic scene generator: ray casting, labels, determinism, presets."""
from __future__ import annotations

import numpy as np
import pytest

from conftest import SMALL_BOARD, ground_truth, make_scene
from lccal.camera import estimate_board_pose
from lccal.errors import BoardNotVisibleError, InfeasibleSpreadError
from lccal.geometry import Frame, RigidTransform, geodesic_angle, rotvec_to_matrix
from lccal.synth import (
    LidarModel,
    facing_board_pose,
    generate_frame,
    generate_suite,
    room_clutter,
)


class TestGenerateFrame:
    def test_noise_free_points_on_primitives(self):
        spec = make_scene(0, board=SMALL_BOARD)
        fr = generate_frame(spec, facing_board_pose(spec), frame_index=0)
        board_pts = fr.cloud.points[fr.labels == "board"]
        assert len(board_pts) >= spec.min_board_hits
        # all board hits satisfy the true plane equation exactly
        origin = fr.board_to_lidar.translation
        normal = fr.board_to_lidar.rotation[:, 2]
        res = np.abs((board_pts - origin) @ normal)
        assert res.max() < 1e-9

    def test_point_count_matches_angular_footprint(self):
        spec = make_scene(0, board=SMALL_BOARD)
        pose = facing_board_pose(spec)
        fr = generate_frame(spec, pose, frame_index=0)
        lid = spec.lidar
        # fronto-parallel board at z = 2: analytic angular footprint per axis
        half_w = (SMALL_BOARD.cols - 1) * SMALL_BOARD.square_size / 2 + spec.board_margin
        half_h = (SMALL_BOARD.rows - 1) * SMALL_BOARD.square_size / 2 + spec.board_margin
        z = spec.board_center[2]
        n_az = np.sum(
            np.abs(np.arange(-lid.az_fov_deg / 2, lid.az_fov_deg / 2 + 1e-9, lid.az_res_deg))
            <= np.degrees(np.arctan(half_w / z))
        )
        rows_expected = np.degrees(2 * np.arctan(half_h / z)) / lid.el_res_deg
        count = np.sum(fr.labels == "board")
        assert abs(count - n_az * rows_expected) <= n_az * 2

    def test_corner_loop_closure(self):
        spec = make_scene(1)
        fr = generate_frame(spec, facing_board_pose(spec), frame_index=0)
        pose = estimate_board_pose(fr.intrinsics, fr.board_spec, fr.corners)
        assert geodesic_angle(pose.transform.rotation, fr.true_board_pose.rotation) < 1e-6
        assert np.linalg.norm(pose.transform.translation - fr.true_board_pose.translation) < 1e-6

    def test_seed_determinism(self):
        spec = make_scene(3, range_sigma=0.005, pixel_sigma=0.2)
        a = generate_frame(spec, facing_board_pose(spec), frame_index=0)
        b = generate_frame(spec, facing_board_pose(spec), frame_index=0)
        assert a.cloud.points.tobytes() == b.cloud.points.tobytes()
        assert a.corners.tobytes() == b.corners.tobytes()

    def test_frame_index_decorrelates(self):
        spec = make_scene(3, range_sigma=0.005)
        a = generate_frame(spec, facing_board_pose(spec), frame_index=0)
        b = generate_frame(spec, facing_board_pose(spec), frame_index=1)
        assert a.cloud.points.tobytes() != b.cloud.points.tobytes()

    def test_noise_is_along_rays(self):
        spec = make_scene(4, board=SMALL_BOARD, range_sigma=0.01)
        clean = make_scene(4, board=SMALL_BOARD, range_sigma=0.0)
        fr = generate_frame(spec, facing_board_pose(spec), frame_index=0)
        fc = generate_frame(clean, facing_board_pose(clean), frame_index=0)
        assert len(fr.cloud) == len(fc.cloud)
        # noisy point = clean point scaled along the same ray direction
        cross = np.cross(fr.cloud.points, fc.cloud.points)
        assert np.abs(cross).max() < 1e-9

    def test_board_residual_bound_under_noise(self):
        sigma = 0.005
        spec = make_scene(5, board=SMALL_BOARD, range_sigma=sigma)
        fr = generate_frame(spec, facing_board_pose(spec), frame_index=0)
        board_pts = fr.cloud.points[fr.labels == "board"]
        origin = fr.board_to_lidar.translation
        normal = fr.board_to_lidar.rotation[:, 2]
        res = np.abs((board_pts - origin) @ normal)
        assert res.max() <= 5 * sigma  # noise along near-normal rays

    def test_board_not_visible(self):
        spec = make_scene(6, board=SMALL_BOARD)
        off_axis = facing_board_pose(spec, np.array([8.0, 0.0, 2.0]))
        with pytest.raises(BoardNotVisibleError):
            generate_frame(spec, off_axis, frame_index=0)

    def test_labels_cover_all_points(self):
        spec = make_scene(7, board=SMALL_BOARD, clutter=room_clutter())
        fr = generate_frame(spec, facing_board_pose(spec), frame_index=0)
        assert len(fr.labels) == len(fr.cloud)
        assert set(np.unique(fr.labels)) >= {"board", "floor"}


class TestGenerateSuite:
    def test_spread_enforced(self):
        spec = make_scene(0)
        frames = generate_suite(spec, 3, orientation_spread_deg=30.0)
        normals = [f.board_to_lidar.rotation[:, 2] for f in frames]
        for i in range(3):
            for j in range(i + 1, 3):
                angle = np.degrees(np.arccos(np.clip(abs(normals[i] @ normals[j]), -1, 1)))
                assert angle >= 30.0

    def test_single_frame(self):
        frames = generate_suite(make_scene(1), 1)
        assert len(frames) == 1

    def test_infeasible_spread(self):
        with pytest.raises(InfeasibleSpreadError):
            generate_suite(make_scene(2), 5, orientation_spread_deg=80.0)

    def test_suite_determinism(self):
        spec = make_scene(3, range_sigma=0.005, pixel_sigma=0.2)
        a = generate_suite(spec, 3)
        b = generate_suite(spec, 3)
        for fa, fb in zip(a, b):
            assert fa.cloud.points.tobytes() == fb.cloud.points.tobytes()
            assert fa.corners.tobytes() == fb.corners.tobytes()

    def test_invalid_count(self):
        with pytest.raises(ValueError):
            generate_suite(make_scene(0), 0)


class TestRoomClutter:
    def test_preset_contents(self):
        prims = room_clutter()
        labels = [p.label for p in prims]
        assert labels.count("floor") == 1
        assert sum(1 for name in labels if name.startswith("wall")) == 2
        assert labels.count("distractor") == 1
        assert sum(1 for name in labels if name.startswith("sphere")) == 3

    def test_distractor_outside_distance_window(self):
        # the distractor passes the tilt filter but sits beyond the default
        # +-0.3 m range window, so a board-absent scene cannot select it
        spec = make_scene(0, board=SMALL_BOARD, clutter=room_clutter())
        fr = generate_frame(spec, facing_board_pose(spec), frame_index=0)
        pts = fr.cloud.points[fr.labels == "distractor"]
        assert len(pts) > 50
        d = np.linalg.norm(pts.mean(axis=0))
        assert abs(d - spec.board_center[2]) > 0.3

    def test_lidar_model_validation(self):
        with pytest.raises(ValueError):
            LidarModel(az_res_deg=-0.1)
        with pytest.raises(ValueError):
            LidarModel(range_sigma=-0.001)

    def test_scene_requires_lidar_to_camera_direction(self):
        bad = RigidTransform(np.eye(3), np.zeros(3), Frame.CAMERA, Frame.LIDAR)
        with pytest.raises(ValueError):
            make_scene(0, gt=bad)


class TestEquivariance:
    def test_scene_translation_shifts_labeled_geometry(self):
        # pushing the board back along the viewing axis moves every board
        # point by the same ray-scaled factor; labels stay consistent
        near = make_scene(8, board=SMALL_BOARD)
        far_spec = make_scene(8, board=SMALL_BOARD)
        fr_near = generate_frame(near, facing_board_pose(near, np.array([0, 0, 2.0])), frame_index=0)
        fr_far = generate_frame(far_spec, facing_board_pose(far_spec, np.array([0, 0, 2.5])), frame_index=0)
        z_near = fr_near.cloud.points[fr_near.labels == "board"][:, 2]
        z_far = fr_far.cloud.points[fr_far.labels == "board"][:, 2]
        assert abs(z_near.mean() - 2.0) < 0.01
        assert abs(z_far.mean() - 2.5) < 0.01
