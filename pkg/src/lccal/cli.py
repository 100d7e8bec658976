"""Command-line interface: simulate / extract / calibrate / evaluate.

The CLI is a thin client over the pipeline layer; all numeric work lives in
the core modules. Log level comes from --verbose or the YOCO_LOG env var.
"""
from __future__ import annotations

import csv
import json
import logging
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import io, pipeline
from .errors import CalibrationError, ExtractionError
from .geometry import Frame
from .metrics import calibration_errors
from .synth import generate_suite

log = logging.getLogger("lccal")


def _setup_logging(verbose: bool) -> None:
    level = os.environ.get("YOCO_LOG", "WARNING").upper()
    if verbose:
        level = "DEBUG"
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _load_params(params_path: str | None):
    doc = None
    if params_path:
        with open(params_path) as f:
            doc = json.load(f)
    return pipeline.load_params(doc)


@click.group()
def main() -> None:
    """Registration-free LiDAR-camera extrinsic calibration."""


@main.command()
@click.argument("scene_file", type=click.Path(exists=True))
@click.option("--n-frames", "-n", default=3, show_default=True)
@click.option("--spread", default=20.0, show_default=True, help="Min pairwise board-normal separation (deg).")
@click.option("--seed", type=int, default=None, help="Overrides the scene seed.")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--verbose", is_flag=True)
def simulate(scene_file, n_frames, spread, seed, out_dir, verbose) -> None:
    """Generate synthetic calibration frames plus a ground-truth file."""
    _setup_logging(verbose)
    try:
        spec = io.read_scene_file(scene_file)
        if seed is not None:
            import dataclasses

            spec = dataclasses.replace(spec, seed=seed)
        frames = generate_suite(spec, n_frames, spread)
    except (CalibrationError, ValueError, KeyError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(frames):
        cloud_name = f"frame_{i:03d}.xyz"
        io.write_point_file(out / cloud_name, frame.cloud)
        io.write_frame_file(
            out / f"frame_{i:03d}.json",
            cloud_name,
            frame.intrinsics,
            frame.board_spec,
            frame.corners,
        )
    io.atomic_write_text(
        out / "gt.json", io.canonical_json(io.transform_to_dict(spec.ground_truth))
    )
    click.echo(f"wrote {len(frames)} frames to {out}")


@main.command()
@click.argument("frame_files", nargs=-1, required=True, type=click.Path())
@click.option("--params", "params_path", type=click.Path(exists=True))
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--verbose", is_flag=True)
def calibrate(frame_files, params_path, seed, jobs, out_path, verbose) -> None:
    """Run the full pipeline over frame files and write a result file.

    Exit code 0 on convergence, 2 on convergence with a degeneracy warning,
    1 on failure.
    """
    _setup_logging(verbose)
    try:
        params, opts = _load_params(params_path)
        frames = [
            pipeline.frame_input_from_file(io.read_frame_file(p)) for p in frame_files
        ]
        estimate, result = pipeline.calibrate(frames, params, opts, seed=seed, jobs=jobs)
    except ExtractionError as exc:
        click.echo(f"error: extraction failed {exc}", err=True)
        sys.exit(1)
    except (CalibrationError, ValueError, OSError, json.JSONDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    io.write_result_file(out_path, result)
    if not estimate.converged:
        click.echo("error: solver did not converge", err=True)
        sys.exit(1)
    if estimate.observability.warning:
        click.echo(f"warning: {estimate.observability.warning}", err=True)
        sys.exit(2)
    click.echo(f"converged in {estimate.iterations} iterations; wrote {out_path}")


@main.command()
@click.argument("frame_file", type=click.Path())
@click.option("--params", "params_path", type=click.Path(exists=True))
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--verbose", is_flag=True)
def extract(frame_file, params_path, seed, out_path, verbose) -> None:
    """Extract the board plane from one frame; writes the cloud + diagnostics."""
    _setup_logging(verbose)
    try:
        params, _ = _load_params(params_path)
        frame = pipeline.frame_input_from_file(io.read_frame_file(frame_file))
        calib_frame, diagnostics = pipeline.process_frame(frame, params, seed, 0)
    except ExtractionError as exc:
        click.echo(f"error: extraction failed {exc}", err=True)
        sys.exit(1)
    except (CalibrationError, ValueError, OSError, json.JSONDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    io.write_point_file(out_path, calib_frame.board_points)
    diag_path = Path(out_path).with_suffix(".diag.json")
    io.atomic_write_text(diag_path, io.canonical_json(diagnostics))
    click.echo(
        f"extracted {len(calib_frame.board_points)} board points; "
        f"diagnostics in {diag_path}"
    )


@main.command()
@click.argument("result_file", type=click.Path())
@click.argument("ground_truth_file", type=click.Path())
@click.option("--out", "out_csv", required=True, type=click.Path())
@click.option("--verbose", is_flag=True)
def evaluate(result_file, ground_truth_file, out_csv, verbose) -> None:
    """Compare a result against ground truth; writes per-axis errors as CSV."""
    _setup_logging(verbose)
    try:
        result = io.read_result_file(result_file)
        with open(ground_truth_file) as f:
            gt = json.load(f)
        est = io.transform_from_dict(result, Frame.LIDAR, Frame.CAMERA)
        truth = io.transform_from_dict(gt, Frame.LIDAR, Frame.CAMERA)
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    err = calibration_errors(est, truth)
    roll, pitch, yaw = err.per_axis_rotation_deg
    x, y, z = err.per_axis_translation_m
    header = [
        "roll_deg", "pitch_deg", "yaw_deg", "x_m", "y_m", "z_m",
        "rotation_geodesic_deg", "translation_norm_m",
    ]
    row = [roll, pitch, yaw, x, y, z, err.rotation_error_deg, err.translation_error_m]
    with open(out_csv, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerow([f"{v:.9g}" for v in row])
    click.echo(
        f"rotation error {err.rotation_error_deg:.6f} deg, "
        f"translation error {err.translation_error_m:.6f} m"
    )


if __name__ == "__main__":
    main()
