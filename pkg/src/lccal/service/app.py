"""FastAPI service exposing the calibration pipeline.

Run with: uvicorn lccal.service.app:app
"""
from __future__ import annotations

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import io, pipeline
from ..camera import BoardPose, BoardSpec, CameraIntrinsics
from ..errors import CalibrationError
from ..extraction import ExtractionDiagnostics, extract_board_points
from ..geometry import Frame, PointCloud, RigidTransform
from ..metrics import calibration_errors
from .schemas import (
    BoardSpecModel,
    CalibrateRequest,
    CalibrateResponse,
    EvaluateRequest,
    EvaluateResponse,
    ExtractRequest,
    ExtractResponse,
    FramePayload,
    IntrinsicsModel,
    SimulatedFrame,
    SimulateRequest,
    SimulateResponse,
    TransformModel,
)

app = FastAPI(title="lccal", version=io.TOOL_VERSION)


def _frame_input(payload: FramePayload) -> pipeline.FrameInput:
    K = CameraIntrinsics(**payload.intrinsics.model_dump())
    spec = BoardSpec(**payload.board_spec.model_dump())
    pose = None
    if payload.board_pose is not None:
        pose = BoardPose(
            RigidTransform(
                np.array(payload.board_pose.rotation),
                np.array(payload.board_pose.translation),
                Frame.CAMERA,
                Frame.WORLD,
            ),
            payload.board_pose.residual_px,
        )
    return pipeline.FrameInput(
        cloud=PointCloud(np.array(payload.cloud, dtype=float), Frame.LIDAR),
        intrinsics=K,
        board_spec=spec,
        corners=np.array(payload.corners, dtype=float) if payload.corners else None,
        board_pose=pose,
    )


@app.exception_handler(CalibrationError)
async def _calibration_error(request, exc: CalibrationError):
    from fastapi.responses import JSONResponse

    return JSONResponse(status_code=422, content={"detail": str(exc)})


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": io.TOOL_VERSION}


@app.post("/calibrate", response_model=CalibrateResponse)
def calibrate(req: CalibrateRequest) -> CalibrateResponse:
    try:
        params, opts = pipeline.load_params(req.params)
        frames = [_frame_input(p) for p in req.frames]
    except (ValueError, TypeError) as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    _, result = pipeline.calibrate(frames, params, opts, seed=req.seed, jobs=req.jobs)
    return CalibrateResponse(**result)


@app.post("/extract", response_model=ExtractResponse)
def extract(req: ExtractRequest) -> ExtractResponse:
    try:
        params, _ = pipeline.load_params(req.params)
        frame = _frame_input(req.frame)
    except (ValueError, TypeError) as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    calib_frame, diagnostics = pipeline.process_frame(frame, params, req.seed, 0)
    return ExtractResponse(
        board_points=calib_frame.board_points.points.tolist(),
        diagnostics=diagnostics,
    )


@app.post("/simulate", response_model=SimulateResponse)
def simulate(req: SimulateRequest) -> SimulateResponse:
    try:
        spec = io.scene_spec_from_dict(req.scene)
    except (KeyError, ValueError, TypeError) as exc:
        raise HTTPException(status_code=422, detail=f"bad scene spec: {exc}")
    from ..synth import generate_suite

    frames = generate_suite(spec, req.n_frames, req.orientation_spread_deg)
    return SimulateResponse(
        frames=[
            SimulatedFrame(
                cloud=f.cloud.points.tolist(),
                corners=f.corners.tolist(),
                labels=[str(l) for l in f.labels],
            )
            for f in frames
        ],
        intrinsics=IntrinsicsModel(**io.intrinsics_to_dict(spec.camera.intrinsics)),
        board_spec=BoardSpecModel(**io.board_spec_to_dict(spec.board)),
        ground_truth=TransformModel(**io.transform_to_dict(spec.ground_truth)),
    )


@app.post("/evaluate", response_model=EvaluateResponse)
def evaluate(req: EvaluateRequest) -> EvaluateResponse:
    try:
        est = RigidTransform(
            np.array(req.result.rotation), np.array(req.result.translation),
            Frame.LIDAR, Frame.CAMERA,
        )
        truth = RigidTransform(
            np.array(req.ground_truth.rotation), np.array(req.ground_truth.translation),
            Frame.LIDAR, Frame.CAMERA,
        )
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    err = calibration_errors(est, truth)
    roll, pitch, yaw = err.per_axis_rotation_deg
    x, y, z = err.per_axis_translation_m
    return EvaluateResponse(
        rotation_error_deg=err.rotation_error_deg,
        translation_error_m=err.translation_error_m,
        roll_deg=roll, pitch_deg=pitch, yaw_deg=yaw,
        x_m=x, y_m=y, z_m=z,
    )
