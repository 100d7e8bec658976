"""End-to-end calibration orchestration shared by the CLI and the service."""
from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import io
from .camera import BoardPose, BoardSpec, CameraIntrinsics, estimate_board_distance, estimate_board_pose
from .extraction import ExtractionDiagnostics, ExtractionParams, extract_board_points
from .geometry import Frame, PointCloud, RigidTransform
from .optimizer import CalibrationFrame, ExtrinsicEstimate, SolverOptions, solve_extrinsics


@dataclass(frozen=True, eq=False)
class FrameInput:
    """In-memory calibration frame before processing."""

    cloud: PointCloud
    intrinsics: CameraIntrinsics
    board_spec: BoardSpec
    corners: np.ndarray | None = None
    board_pose: BoardPose | None = None

    def __post_init__(self):
        if (self.corners is None) == (self.board_pose is None):
            raise ValueError("exactly one of corners / board_pose must be given")


def extraction_params_from_dict(doc: dict) -> ExtractionParams:
    fields = {f.name for f in dataclasses.fields(ExtractionParams)}
    unknown = set(doc) - fields
    if unknown:
        raise ValueError(f"unknown extraction parameters: {sorted(unknown)}")
    kwargs = dict(doc)
    if "reference_axis" in kwargs:
        kwargs["reference_axis"] = tuple(kwargs["reference_axis"])
    return ExtractionParams(**kwargs)


def solver_options_from_dict(doc: dict) -> SolverOptions:
    fields = {f.name for f in dataclasses.fields(SolverOptions)}
    unknown = set(doc) - fields
    if unknown:
        raise ValueError(f"unknown solver parameters: {sorted(unknown)}")
    kwargs = dict(doc)
    if "initial_guess" in kwargs and kwargs["initial_guess"] is not None:
        kwargs["initial_guess"] = io.transform_from_dict(
            kwargs["initial_guess"], Frame.LIDAR, Frame.CAMERA
        )
    return SolverOptions(**kwargs)


def load_params(doc: dict | None) -> tuple[ExtractionParams, SolverOptions]:
    doc = doc or {}
    return (
        extraction_params_from_dict(doc.get("extraction", {})),
        solver_options_from_dict(doc.get("solver", {})),
    )


def config_echo(params: ExtractionParams, opts: SolverOptions, seed: int) -> dict:
    extraction = dataclasses.asdict(params)
    extraction["reference_axis"] = list(extraction["reference_axis"])
    solver = dataclasses.asdict(opts)
    guess = solver.pop("initial_guess")
    solver["initial_guess"] = (
        io.transform_to_dict(opts.initial_guess) if guess is not None else None
    )
    return {"extraction": extraction, "solver": solver, "seed": seed}


def process_frame(
    frame: FrameInput, params: ExtractionParams, seed: int, index: int
) -> tuple[CalibrationFrame, dict]:
    """Camera pose (if needed) + board extraction for one frame."""
    if frame.corners is not None:
        pose = estimate_board_pose(frame.intrinsics, frame.board_spec, frame.corners)
        l = estimate_board_distance(frame.intrinsics, frame.board_spec, frame.corners)
    else:
        pose = frame.board_pose
        # camera origin sits at t_WC in the world frame; the board plane is z = 0
        l = abs(float(pose.transform.translation[2]))
    diag = ExtractionDiagnostics()
    frame_seed = int(np.random.SeedSequence([seed, index]).generate_state(1)[0])
    board_cloud = extract_board_points(frame.cloud, l, params, seed=frame_seed, diagnostics=diag)
    diagnostics = {
        "frame_index": index,
        "input_points": len(frame.cloud),
        "board_points": len(board_cloud),
        "range_prior_m": l,
        "residual_px": pose.residual_px,
        "cluster_count": diag.cluster_count,
        "candidates": diag.candidates,
        "selected_index": diag.selected_index,
    }
    return CalibrationFrame(board_cloud, pose), diagnostics


def calibrate(
    frames: list[FrameInput],
    params: ExtractionParams | None = None,
    opts: SolverOptions | None = None,
    seed: int = 0,
    jobs: int = 1,
) -> tuple[ExtrinsicEstimate, dict]:
    """Run the full pipeline; returns the estimate plus a result document."""
    if not frames:
        raise ValueError("at least one frame is required")
    params = params or ExtractionParams()
    opts = opts or SolverOptions()

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            processed = list(
                pool.map(
                    lambda args: process_frame(args[1], params, seed, args[0]),
                    enumerate(frames),
                )
            )
    else:
        processed = [process_frame(f, params, seed, i) for i, f in enumerate(frames)]

    calib_frames = [p[0] for p in processed]
    diagnostics = [p[1] for p in processed]
    estimate = solve_extrinsics(calib_frames, opts)
    result = {
        "rotation": estimate.transform.rotation.tolist(),
        "translation": estimate.transform.translation.tolist(),
        "rms_residual": estimate.rms_residual,
        "iterations": estimate.iterations,
        "converged": estimate.converged,
        "observability": {
            "distinct_orientation_count": estimate.observability.distinct_orientation_count,
            "normal_gram_eigenvalues": estimate.observability.normal_gram_eigenvalues.tolist(),
            "rank_estimate": estimate.observability.rank_estimate,
            "warning": estimate.observability.warning,
        },
        "frames": diagnostics,
        "version": io.TOOL_VERSION,
        "config": config_echo(params, opts, seed),
    }
    return estimate, result


def frame_input_from_file(ff: io.FrameFile) -> FrameInput:
    pose = None
    if ff.board_pose is not None:
        pose = BoardPose(
            io.transform_from_dict(ff.board_pose, Frame.CAMERA, Frame.WORLD),
            float(ff.board_pose.get("residual_px", 0.0)),
        )
    return FrameInput(
        cloud=ff.load_cloud(),
        intrinsics=ff.intrinsics,
        board_spec=ff.board_spec,
        corners=ff.corners,
        board_pose=pose,
    )
