"""Registration-free LiDAR-camera extrinsic calibration toolkit."""

from .camera import BoardPose, BoardSpec, CameraIntrinsics
from .extraction import ExtractionParams
from .geometry import Frame, PointCloud, RigidTransform
from .optimizer import (
    CalibrationFrame,
    DegeneracyWarning,
    ExtrinsicEstimate,
    SolverOptions,
    solve_extrinsics,
)
from .synth import SceneSpec

__version__ = "0.1.0"

__all__ = [
    "BoardPose",
    "BoardSpec",
    "CalibrationFrame",
    "CameraIntrinsics",
    "DegeneracyWarning",
    "ExtractionParams",
    "ExtrinsicEstimate",
    "Frame",
    "PointCloud",
    "RigidTransform",
    "SceneSpec",
    "SolverOptions",
    "solve_extrinsics",
    "__version__",
]
