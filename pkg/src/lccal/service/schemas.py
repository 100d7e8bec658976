"""Pydantic request/response models for the calibration service."""
from __future__ import annotations

from pydantic import BaseModel, Field, model_validator


class IntrinsicsModel(BaseModel):
    fx: float
    fy: float
    cx: float
    cy: float
    image_width: int
    image_height: int


class BoardSpecModel(BaseModel):
    rows: int = Field(ge=2)
    cols: int = Field(ge=2)
    square_size: float = Field(gt=0)


class TransformModel(BaseModel):
    rotation: list[list[float]]  # 3x3, row-major
    translation: list[float]  # 3


class BoardPoseModel(TransformModel):
    residual_px: float = 0.0


class FramePayload(BaseModel):
    """One calibration frame with the cloud inline."""

    cloud: list[list[float]]  # N x 3, meters, LiDAR frame
    intrinsics: IntrinsicsModel
    board_spec: BoardSpecModel
    corners: list[list[float]] | None = None  # row-major board order
    board_pose: BoardPoseModel | None = None  # camera -> world

    @model_validator(mode="after")
    def _one_observation(self):
        if (self.corners is None) == (self.board_pose is None):
            raise ValueError("exactly one of corners / board_pose must be set")
        return self


class CalibrateRequest(BaseModel):
    frames: list[FramePayload] = Field(min_length=1)
    params: dict = Field(default_factory=dict)  # {"extraction": {...}, "solver": {...}}
    seed: int = 0
    jobs: int = 1


class ObservabilityModel(BaseModel):
    distinct_orientation_count: int
    normal_gram_eigenvalues: list[float]
    rank_estimate: int
    warning: str | None = None


class CalibrateResponse(BaseModel):
    rotation: list[list[float]]
    translation: list[float]
    rms_residual: float
    iterations: int
    converged: bool
    observability: ObservabilityModel
    frames: list[dict]
    version: str
    config: dict


class ExtractRequest(BaseModel):
    frame: FramePayload
    params: dict = Field(default_factory=dict)
    seed: int = 0


class ExtractResponse(BaseModel):
    board_points: list[list[float]]
    diagnostics: dict


class SimulateRequest(BaseModel):
    scene: dict  # same schema as the scene JSON file
    n_frames: int = Field(default=3, ge=1)
    orientation_spread_deg: float = 20.0


class SimulatedFrame(BaseModel):
    cloud: list[list[float]]
    corners: list[list[float]]
    labels: list[str]


class SimulateResponse(BaseModel):
    frames: list[SimulatedFrame]
    intrinsics: IntrinsicsModel
    board_spec: BoardSpecModel
    ground_truth: TransformModel


class EvaluateRequest(BaseModel):
    result: TransformModel
    ground_truth: TransformModel


class EvaluateResponse(BaseModel):
    rotation_error_deg: float
    translation_error_m: float
    roll_deg: float
    pitch_deg: float
    yaw_deg: float
    x_m: float
    y_m: float
    z_m: float
