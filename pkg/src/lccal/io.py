"""File formats: point clouds, frame descriptors, results, scene specs.

Result files use a canonical JSON encoding (sorted keys, floats at 12
significant digits) so write -> read -> write is byte-identical. All writes
go through a temp file + rename.
"""
from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .camera import BoardSpec, CameraIntrinsics
from .errors import PointFileError
from .geometry import Frame, PointCloud, RigidTransform
from .synth import CameraModel, LidarModel, SceneSpec, room_clutter

TOOL_VERSION = "0.1.0"


# ---------------------------------------------------------------------------
# canonical JSON

def _canon(value, out: list[str]) -> None:
    if isinstance(value, dict):
        out.append("{")
        for i, key in enumerate(sorted(value)):
            if i:
                out.append(",")
            out.append(json.dumps(str(key)))
            out.append(":")
            _canon(value[key], out)
        out.append("}")
    elif isinstance(value, (list, tuple, np.ndarray)):
        seq = value.tolist() if isinstance(value, np.ndarray) else value
        out.append("[")
        for i, item in enumerate(seq):
            if i:
                out.append(",")
            _canon(item, out)
        out.append("]")
    elif isinstance(value, bool) or value is None:
        out.append(json.dumps(value))
    elif isinstance(value, (int, np.integer)):
        out.append(str(int(value)))
    elif isinstance(value, (float, np.floating)):
        v = float(value)
        if not math.isfinite(v):
            raise ValueError("non-finite float in result document")
        out.append(f"{v:.12g}")
    elif isinstance(value, str):
        out.append(json.dumps(value))
    else:
        raise TypeError(f"cannot canonicalize {type(value)!r}")


def canonical_json(doc) -> str:
    out: list[str] = []
    _canon(doc, out)
    return "".join(out) + "\n"


def atomic_write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# point files: ASCII "x y z" (# comments) or ASCII PLY

def read_point_file(path: str | Path, frame: Frame = Frame.LIDAR) -> PointCloud:
    path = Path(path)
    with open(path) as f:
        first = f.readline()
        if first.strip().lower() == "ply":
            return _read_ply(path, f, frame)
        return _read_xyz(path, first, f, frame)


def _read_xyz(path: Path, first: str, f, frame: Frame) -> PointCloud:
    points = []
    for lineno, line in enumerate([first] + f.readlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split()
        if len(parts) != 3:
            raise PointFileError(str(path), lineno, f"expected 3 fields, got {len(parts)}")
        try:
            points.append([float(v) for v in parts])
        except ValueError:
            raise PointFileError(str(path), lineno, f"malformed number in {stripped!r}")
    return PointCloud(np.array(points).reshape(-1, 3), frame)


def _read_ply(path: Path, f, frame: Frame) -> PointCloud:
    n_vertices = None
    props: list[str] = []
    lineno = 1
    for line in f:
        lineno += 1
        tok = line.strip().split()
        if not tok:
            continue
        if tok[0] == "format":
            if tok[1] != "ascii":
                raise PointFileError(str(path), lineno, "only ASCII PLY is supported")
        elif tok[0] == "element" and tok[1] == "vertex":
            n_vertices = int(tok[2])
        elif tok[0] == "property" and n_vertices is not None:
            props.append(tok[2])
        elif tok[0] == "end_header":
            break
    if n_vertices is None:
        raise PointFileError(str(path), lineno, "PLY header has no vertex element")
    try:
        cols = [props.index(axis) for axis in ("x", "y", "z")]
    except ValueError:
        raise PointFileError(str(path), lineno, "PLY vertex element lacks x/y/z")
    points = np.empty((n_vertices, 3))
    for i in range(n_vertices):
        lineno += 1
        line = f.readline()
        if not line:
            raise PointFileError(str(path), lineno, "unexpected end of file")
        parts = line.split()
        try:
            points[i] = [float(parts[c]) for c in cols]
        except (ValueError, IndexError):
            raise PointFileError(str(path), lineno, f"malformed vertex {line.strip()!r}")
    return PointCloud(points, frame)


def write_point_file(path: str | Path, cloud: PointCloud) -> None:
    lines = ["# x y z (meters)"]
    lines += [f"{p[0]:.9g} {p[1]:.9g} {p[2]:.9g}" for p in cloud.points]
    atomic_write_text(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# frame files

@dataclass(frozen=True, eq=False)
class FrameFile:
    """One calibration frame on disk: cloud path + camera-side observation."""

    cloud_path: Path
    intrinsics: CameraIntrinsics
    board_spec: BoardSpec
    corners: np.ndarray | None = None  # (N, 2)
    board_pose: dict | None = None  # {"rotation", "translation", "residual_px"}

    def load_cloud(self) -> PointCloud:
        return read_point_file(self.cloud_path, Frame.LIDAR)


def intrinsics_to_dict(K: CameraIntrinsics) -> dict:
    return {
        "fx": K.fx, "fy": K.fy, "cx": K.cx, "cy": K.cy,
        "image_width": K.image_width, "image_height": K.image_height,
    }


def intrinsics_from_dict(d: dict) -> CameraIntrinsics:
    return CameraIntrinsics(
        fx=float(d["fx"]), fy=float(d["fy"]), cx=float(d["cx"]), cy=float(d["cy"]),
        image_width=int(d["image_width"]), image_height=int(d["image_height"]),
    )


def board_spec_to_dict(b: BoardSpec) -> dict:
    return {"rows": b.rows, "cols": b.cols, "square_size": b.square_size}


def board_spec_from_dict(d: dict) -> BoardSpec:
    return BoardSpec(int(d["rows"]), int(d["cols"]), float(d["square_size"]))


def transform_to_dict(T: RigidTransform) -> dict:
    return {"rotation": T.rotation.tolist(), "translation": T.translation.tolist()}


def transform_from_dict(d: dict, source: Frame, target: Frame) -> RigidTransform:
    return RigidTransform(
        np.array(d["rotation"], dtype=float),
        np.array(d["translation"], dtype=float),
        source,
        target,
    )


def read_frame_file(path: str | Path) -> FrameFile:
    path = Path(path)
    with open(path) as f:
        doc = json.load(f)
    has_corners = "corners" in doc
    has_pose = "board_pose" in doc
    if has_corners == has_pose:
        raise ValueError(f"{path}: exactly one of 'corners' / 'board_pose' must be present")
    cloud_path = Path(doc["cloud"])
    if not cloud_path.is_absolute():
        cloud_path = path.parent / cloud_path
    if not cloud_path.exists():
        raise FileNotFoundError(f"{path}: cloud file not found: {cloud_path}")
    return FrameFile(
        cloud_path=cloud_path,
        intrinsics=intrinsics_from_dict(doc["intrinsics"]),
        board_spec=board_spec_from_dict(doc["board_spec"]),
        corners=np.array(doc["corners"], dtype=float) if has_corners else None,
        board_pose=doc.get("board_pose"),
    )


def write_frame_file(
    path: str | Path,
    cloud_filename: str,
    intrinsics: CameraIntrinsics,
    board_spec: BoardSpec,
    corners: np.ndarray,
) -> None:
    doc = {
        "cloud": cloud_filename,
        "intrinsics": intrinsics_to_dict(intrinsics),
        "board_spec": board_spec_to_dict(board_spec),
        "corners": np.asarray(corners, dtype=float).tolist(),
    }
    atomic_write_text(path, canonical_json(doc))


# ---------------------------------------------------------------------------
# result files

def write_result_file(path: str | Path, result: dict) -> None:
    atomic_write_text(path, canonical_json(result))


def read_result_file(path: str | Path) -> dict:
    with open(path) as f:
        doc = json.load(f)
    R = np.array(doc["rotation"], dtype=float)
    if not np.allclose(R.T @ R, np.eye(3), atol=1e-6):
        raise ValueError(f"{path}: rotation fails orthonormality check")
    return doc


# ---------------------------------------------------------------------------
# scene specs

def scene_spec_from_dict(doc: dict) -> SceneSpec:
    board = board_spec_from_dict(doc["board"])
    gt = transform_from_dict(doc["ground_truth"], Frame.LIDAR, Frame.CAMERA)
    lidar = LidarModel(**doc.get("lidar", {}))
    cam_doc = doc.get("camera")
    camera = None
    if cam_doc is not None:
        camera = CameraModel(
            intrinsics=intrinsics_from_dict(cam_doc["intrinsics"]),
            pixel_sigma=float(cam_doc.get("pixel_sigma", 0.0)),
        )
    clutter_doc = doc.get("clutter", "none")
    if clutter_doc == "room":
        center = doc.get("board_center", (0.0, 0.0, 2.0))
        clutter = room_clutter(float(center[2]))
    elif clutter_doc in ("none", None, []):
        clutter = ()
    else:
        raise ValueError(f"unknown clutter preset: {clutter_doc!r}")
    kwargs = dict(
        board=board,
        ground_truth=gt,
        lidar=lidar,
        clutter=clutter,
        seed=int(doc.get("seed", 0)),
    )
    if camera is not None:
        kwargs["camera"] = camera
    for key in ("board_center", "board_margin", "max_tilt_deg", "min_board_hits"):
        if key in doc:
            val = doc[key]
            kwargs[key] = tuple(val) if key == "board_center" else val
    return SceneSpec(**kwargs)


def read_scene_file(path: str | Path) -> SceneSpec:
    with open(path) as f:
        return scene_spec_from_dict(json.load(f))
