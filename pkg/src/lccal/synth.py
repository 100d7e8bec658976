"""Synthetic calibration scenes with ground truth.

A deterministic ray sampler stands in for a physics simulator: LiDAR points
are nearest ray-primitive intersections on a fixed azimuth/elevation grid
(noise applied along the ray), camera corners are pinhole projections of the
true board corners plus pixel noise. Every point carries a ground-truth
label so extraction quality is directly measurable.

Conventions: the LiDAR viewing axis is +z (matching the camera's optical
axis), y points down, x right. The board's world frame has its normal along
world z, pointing back at the sensor.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .camera import BoardSpec, CameraIntrinsics, project_points
from .errors import BoardNotVisibleError, InfeasibleSpreadError
from .geometry import Frame, PointCloud, RigidTransform, rotvec_to_matrix


@dataclass(frozen=True, eq=False)
class PlanePatch:
    origin: np.ndarray  # a point on the patch
    u: np.ndarray  # in-plane unit axis
    v: np.ndarray  # in-plane unit axis, orthogonal to u
    half_u: float
    half_v: float
    label: str


@dataclass(frozen=True, eq=False)
class Sphere:
    center: np.ndarray
    radius: float
    label: str


@dataclass(frozen=True, eq=False)
class Box:
    center: np.ndarray
    rotation: np.ndarray  # box -> scene
    half_extents: np.ndarray
    label: str


Primitive = PlanePatch | Sphere | Box


@dataclass(frozen=True)
class LidarModel:
    az_fov_deg: float = 80.0
    az_res_deg: float = 0.4
    el_fov_deg: float = 40.0
    el_res_deg: float = 0.4
    range_sigma: float = 0.0  # meters, applied along the ray
    max_range: float = 30.0

    def __post_init__(self):
        if min(self.az_res_deg, self.el_res_deg, self.max_range) <= 0:
            raise ValueError("resolutions and max_range must be positive")
        if self.range_sigma < 0:
            raise ValueError("range_sigma must be >= 0")

    def ray_directions(self) -> np.ndarray:
        az = np.deg2rad(
            np.arange(-self.az_fov_deg / 2, self.az_fov_deg / 2 + 1e-9, self.az_res_deg)
        )
        el = np.deg2rad(
            np.arange(-self.el_fov_deg / 2, self.el_fov_deg / 2 + 1e-9, self.el_res_deg)
        )
        A, E = np.meshgrid(az, el, indexing="ij")
        d = np.stack(
            [np.cos(E) * np.sin(A), np.sin(E), np.cos(E) * np.cos(A)], axis=-1
        )
        return d.reshape(-1, 3)


@dataclass(frozen=True)
class CameraModel:
    intrinsics: CameraIntrinsics
    pixel_sigma: float = 0.0

    def __post_init__(self):
        if self.pixel_sigma < 0:
            raise ValueError("pixel_sigma must be >= 0")


@dataclass(frozen=True, eq=False)
class SceneSpec:
    board: BoardSpec
    ground_truth: RigidTransform  # LiDAR -> camera
    lidar: LidarModel = LidarModel()
    camera: CameraModel = None  # type: ignore[assignment]
    board_center: tuple[float, float, float] = (0.0, 0.0, 2.0)
    board_margin: float = 0.06  # physical border beyond the corner grid
    clutter: tuple[Primitive, ...] = ()
    max_tilt_deg: float = 35.0
    min_board_hits: int = 30
    seed: int = 0

    def __post_init__(self):
        if self.camera is None:
            object.__setattr__(self, "camera", default_camera())
        if self.ground_truth.source is not Frame.LIDAR or self.ground_truth.target is not Frame.CAMERA:
            raise ValueError("ground_truth must map LiDAR -> camera")


@dataclass(frozen=True, eq=False)
class LabeledFrame:
    cloud: PointCloud  # LiDAR frame
    labels: np.ndarray  # (N,) strings
    corners: np.ndarray  # (rows*cols, 2) observed (noisy) pixels
    true_corners: np.ndarray
    true_board_pose: RigidTransform  # camera -> world
    board_to_lidar: RigidTransform  # world -> LiDAR
    intrinsics: CameraIntrinsics
    board_spec: BoardSpec


def default_camera() -> CameraModel:
    return CameraModel(CameraIntrinsics(1200.0, 1200.0, 1280.0, 720.0, 2560, 1440))


def facing_board_pose(spec: SceneSpec, center: np.ndarray | None = None) -> RigidTransform:
    """World->LiDAR pose of a board squarely facing the sensor."""
    center = np.asarray(center if center is not None else spec.board_center, dtype=float)
    # world x -> +x, world y -> -y, world z -> -z: normal points back at the sensor
    R = np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]])
    grid_center = np.array(
        [
            (spec.board.cols - 1) * spec.board.square_size / 2.0,
            (spec.board.rows - 1) * spec.board.square_size / 2.0,
            0.0,
        ]
    )
    t = center - R @ grid_center
    return RigidTransform(R, t, Frame.WORLD, Frame.LIDAR)


def tilt_about_grid_center(
    spec: SceneSpec, base: RigidTransform, azimuth_rad: float, tilt_rad: float
) -> RigidTransform:
    """Rotate the board about an in-plane axis through the corner-grid center."""
    grid_center = np.array(
        [
            (spec.board.cols - 1) * spec.board.square_size / 2.0,
            (spec.board.rows - 1) * spec.board.square_size / 2.0,
            0.0,
        ]
    )
    axis = np.array([np.cos(azimuth_rad), np.sin(azimuth_rad), 0.0])
    R = rotvec_to_matrix(axis * tilt_rad)
    t = grid_center - R @ grid_center
    spin = RigidTransform(R, t, Frame.WORLD, Frame.WORLD)
    return base.compose(spin)


def board_patch(spec: SceneSpec, board_to_lidar: RigidTransform) -> PlanePatch:
    s, m = spec.board.square_size, spec.board_margin
    half_u = ((spec.board.cols - 1) * s + 2 * m) / 2.0
    half_v = ((spec.board.rows - 1) * s + 2 * m) / 2.0
    center_w = np.array([(spec.board.cols - 1) * s / 2.0, (spec.board.rows - 1) * s / 2.0, 0.0])
    R = board_to_lidar.rotation
    return PlanePatch(
        origin=board_to_lidar.apply(center_w),
        u=R[:, 0],
        v=R[:, 1],
        half_u=half_u,
        half_v=half_v,
        label="board",
    )


def _intersect_patch(dirs: np.ndarray, p: PlanePatch) -> np.ndarray:
    n = np.cross(p.u, p.v)
    denom = dirs @ n
    offset = float(n @ p.origin)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = offset / denom
    pts = t[:, None] * dirs - p.origin
    ok = (
        (np.abs(denom) > 1e-12)
        & (t > 0.05)
        & (np.abs(pts @ p.u) <= p.half_u)
        & (np.abs(pts @ p.v) <= p.half_v)
    )
    return np.where(ok, t, np.inf)


def _intersect_sphere(dirs: np.ndarray, s: Sphere) -> np.ndarray:
    b = dirs @ s.center
    disc = b**2 - (float(s.center @ s.center) - s.radius**2)
    with np.errstate(invalid="ignore"):
        t = b - np.sqrt(disc)
    ok = (disc > 0) & (t > 0.05)
    return np.where(ok, t, np.inf)


def _intersect_box(dirs: np.ndarray, box: Box) -> np.ndarray:
    # slab test in the box frame; ray origin is the sensor origin
    o = -(box.rotation.T @ box.center)
    d = dirs @ box.rotation
    t = np.full(len(dirs), np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (-box.half_extents - o) / d
        t2 = (box.half_extents - o) / d
    tmin = np.minimum(t1, t2).max(axis=1)
    tmax = np.maximum(t1, t2).min(axis=1)
    ok = (tmax >= tmin) & (tmax > 0.05)
    hit = np.where(tmin > 0.05, tmin, tmax)
    t[ok] = hit[ok]
    return t


def _intersect(dirs: np.ndarray, prim: Primitive) -> np.ndarray:
    if isinstance(prim, PlanePatch):
        return _intersect_patch(dirs, prim)
    if isinstance(prim, Sphere):
        return _intersect_sphere(dirs, prim)
    return _intersect_box(dirs, prim)


def generate_frame(
    spec: SceneSpec,
    board_to_lidar: RigidTransform | None = None,
    frame_index: int = 0,
    include_board: bool = True,
) -> LabeledFrame:
    """Render one labeled frame; deterministic given (spec.seed, frame_index)."""
    rng = np.random.default_rng([spec.seed, frame_index])
    if board_to_lidar is None:
        board_to_lidar = facing_board_pose(spec)

    primitives: list[Primitive] = list(spec.clutter)
    if include_board:
        primitives.append(board_patch(spec, board_to_lidar))
    if not primitives:
        raise ValueError("scene has no geometry")

    dirs = spec.lidar.ray_directions()
    ranges = np.full(len(dirs), np.inf)
    labels = np.full(len(dirs), "", dtype=object)
    for prim in primitives:
        t = _intersect(dirs, prim)
        closer = t < ranges
        ranges = np.where(closer, t, ranges)
        labels[closer] = prim.label
    hit = np.isfinite(ranges) & (ranges <= spec.lidar.max_range)
    n_board = int(np.sum(labels[hit] == "board"))
    if include_board and n_board < spec.min_board_hits:
        raise BoardNotVisibleError(
            f"only {n_board} LiDAR rays hit the board (need {spec.min_board_hits})"
        )

    ranges_hit = ranges[hit]
    if spec.lidar.range_sigma > 0:
        ranges_hit = ranges_hit + rng.normal(0.0, spec.lidar.range_sigma, len(ranges_hit))
    points = dirs[hit] * ranges_hit[:, None]
    cloud = PointCloud(points, Frame.LIDAR)

    # camera side: true corner pixels + noise
    K = spec.camera.intrinsics
    corners_lidar = board_to_lidar.apply(spec.board.corner_grid())
    corners_cam = spec.ground_truth.apply(corners_lidar)
    if np.any(corners_cam[:, 2] <= 0):
        raise BoardNotVisibleError("board corners behind the camera")
    true_corners = project_points(K, corners_cam)
    inside = (
        (true_corners[:, 0] >= 0)
        & (true_corners[:, 0] < K.image_width)
        & (true_corners[:, 1] >= 0)
        & (true_corners[:, 1] < K.image_height)
    )
    if not np.all(inside):
        raise BoardNotVisibleError("board corners fall outside the image")
    corners = true_corners.copy()
    if spec.camera.pixel_sigma > 0:
        corners = corners + rng.normal(0.0, spec.camera.pixel_sigma, corners.shape)

    true_board_pose = board_to_lidar.inverse().compose(spec.ground_truth.inverse())
    return LabeledFrame(
        cloud=cloud,
        labels=labels[hit],
        corners=corners,
        true_corners=true_corners,
        true_board_pose=true_board_pose,
        board_to_lidar=board_to_lidar,
        intrinsics=K,
        board_spec=spec.board,
    )


def generate_suite(
    spec: SceneSpec,
    n_frames: int,
    orientation_spread_deg: float = 20.0,
    include_board: bool = True,
    max_attempts: int = 500,
) -> list[LabeledFrame]:
    """Frames with board normals pairwise separated by at least the spread."""
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    rng = np.random.default_rng([spec.seed, 0xB0A2D])
    frames: list[LabeledFrame] = []
    normals: list[np.ndarray] = []
    for i in range(n_frames):
        placed = False
        for _ in range(max_attempts):
            azimuth = rng.uniform(0.0, 2 * np.pi)
            tilt = rng.uniform(0.0, np.deg2rad(spec.max_tilt_deg))
            shift = rng.uniform([-0.1, -0.08, -0.1], [0.1, 0.08, 0.1])
            base = facing_board_pose(spec, np.asarray(spec.board_center) + shift)
            pose = tilt_about_grid_center(spec, base, azimuth, tilt)
            normal = pose.rotation[:, 2]
            if n_frames >= 2 and any(
                np.degrees(np.arccos(np.clip(abs(normal @ m), -1.0, 1.0)))
                < orientation_spread_deg
                for m in normals
            ):
                continue
            try:
                frame = generate_frame(spec, pose, frame_index=i, include_board=include_board)
            except BoardNotVisibleError:
                continue
            frames.append(frame)
            normals.append(normal)
            placed = True
            break
        if not placed:
            raise InfeasibleSpreadError(
                f"could not place frame {i} with spread {orientation_spread_deg} deg "
                f"within max tilt {spec.max_tilt_deg} deg"
            )
    return frames


def room_clutter(board_distance: float = 2.0) -> tuple[Primitive, ...]:
    """Default clutter: floor, two side walls, a parallel distractor plane, spheres.

    The distractor sits inside the default distance-selection window of the
    board so that the density tie-break is what rejects it; the spheres and
    walls exercise the tilt-angle filter and clustering.
    """
    ex = np.array([1.0, 0.0, 0.0])
    ey = np.array([0.0, 1.0, 0.0])
    ez = np.array([0.0, 0.0, 1.0])
    d = board_distance
    return (
        PlanePatch(np.array([0.0, 1.0, 2.5]), ex, ez, 4.0, 4.0, "floor"),
        PlanePatch(np.array([-2.5, 0.0, 2.5]), ez, ey, 4.0, 1.4, "wall_left"),
        PlanePatch(np.array([2.5, 0.0, 2.5]), ez, ey, 4.0, 1.4, "wall_right"),
        PlanePatch(np.array([1.2, -0.2, d + 0.2]), ex, -ey, 0.25, 0.2, "distractor"),
        Sphere(np.array([-1.0, 0.3, 1.2]), 0.18, "sphere_0"),
        Sphere(np.array([1.1, 0.45, 3.1]), 0.22, "sphere_1"),
        Sphere(np.array([-0.7, -0.45, 3.3]), 0.15, "sphere_2"),
    )
