#!/usr/bin/env python3
"""
Subcommands: augment -> fit -> render / eval / export

Each command validates the whole config first, then takes the output
directory lock, then touches the filesystem.
"""

import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch

from ..augment import (
    augment_video,
    build_interpolator,
    build_super_resolver,
    read_augment_manifest,
    read_frame_files,
    read_video,
    resize_bicubic,
    write_augment_manifest,
    write_frame_files,
)
from ..augment.video import FRAME_PATTERN
from ..body_model import BodyState, load_template, read_pose_file, read_shape_file, write_pose_file
from ..errors import InvalidArgumentError, NumericalError
from ..gaussian_cloud import Checkpoint, GaussianSet, read_checkpoint
from ..losses_metrics import MetricRow, NullExtractor, build_extractor, lpips, mean_row, psnr, ssim, write_metric_report
from ..orbit_camera import CameraPose, make_camera, make_static_orbit
from ..splat_renderer import load_png, rasterize, resolve_precision, save_png, to_uint8, write_float_image
from ..trainer import (
    bodies_from_checkpoint,
    build_subject,
    canonical_gaussians,
    file_digest,
    fit,
    pose_frame,
    state_from_checkpoint,
    subject_from_checkpoint,
    write_run_manifest,
)
from .config import OrbitConfig, PipelineConfig, validate_config
from .lock import OutputLock
from .ply import write_ply

logger = logging.getLogger(__name__)

AUGMENT_MANIFEST = "augment_manifest.txt"
LOSS_CSV = "loss_history.csv"
RUN_MANIFEST = "run_manifest.txt"
REFINED_POSES = "refined_poses.txt"
FAILURE_DUMP = "numerical_failure.txt"
EVAL_REPORT = "eval_report.txt"
PLY_NAME = "gaussians.ply"


# -- timeline helpers --------------------------------------------------------

def frame_positions(directory: Path, count: int, orbit_frames: int) -> List[float]:
    """
    Source-timeline position of every training frame

    Taken from the augment manifest when present, otherwise the frames are
    spread evenly from the first to the last source frame.
    """
    manifest = Path(directory) / AUGMENT_MANIFEST
    if manifest.exists():
        positions = read_augment_manifest(manifest)
        if len(positions) != count:
            raise InvalidArgumentError(f"{manifest} lists {len(positions)} frames, directory has {count}")
        return positions
    logger.warning("No %s in %s; assuming evenly spaced frames", AUGMENT_MANIFEST, directory)
    return np.linspace(0.0, orbit_frames - 1, count).tolist()


def timeline_cameras(orbit: OrbitConfig, positions: Sequence[float], width: int, height: int) -> List[CameraPose]:
    """Source frame k sits at azimuth k * 360 / orbit.frames"""
    step = 360.0 / orbit.frames
    return [make_camera(p * step, orbit.elevation, orbit.radius, orbit.fov, width, height) for p in positions]


def timeline_states(rows: Sequence[Tuple[np.ndarray, np.ndarray]], positions: Sequence[float],
                    num_joints: int, beta) -> List[BodyState]:
    """
    One BodyState per training frame from pose-file rows

    rows may hold a single pose (shared by every frame), one pose per source
    frame (linearly interpolated at fractional positions) or one pose per
    training frame. No rows means the rest pose throughout.
    """
    beta = np.asarray(beta, dtype=np.float64).reshape(-1)
    n = len(positions)
    if not rows:
        return [BodyState(np.zeros((num_joints, 3)), beta, np.zeros(3)) for _ in range(n)]
    if len(rows) == 1:
        theta, trans = rows[0]
        return [BodyState(theta, beta, trans) for _ in range(n)]
    if len(rows) == n:
        return [BodyState(theta, beta, trans) for theta, trans in rows]

    sources = int(round(positions[-1])) + 1
    if len(rows) != sources:
        raise InvalidArgumentError(f"pose file has {len(rows)} rows; expected 1, {sources} (source frames) "
                                   f"or {n} (training frames)")
    thetas = np.stack([r[0] for r in rows])
    translations = np.stack([r[1] for r in rows])
    states = []
    for p in positions:
        k = min(int(np.floor(p + 1e-9)), sources - 1)
        t = p - k
        if t < 1e-9 or k == sources - 1:
            theta, trans = thetas[k], translations[k]
        else:
            theta = (1.0 - t) * thetas[k] + t * thetas[k + 1]
            trans = (1.0 - t) * translations[k] + t * translations[k + 1]
        states.append(BodyState(theta, beta, trans))
    return states


def _fit_frames(frames: List[np.ndarray], resolution: int) -> List[np.ndarray]:
    height, width = frames[0].shape[:2]
    if (height, width) == (resolution, resolution):
        return frames
    logger.info("Resizing %d frames from %dx%d to %dx%d", len(frames), width, height, resolution, resolution)
    return [np.clip(resize_bicubic(f, resolution, resolution), 0.0, 1.0) for f in frames]


# -- checkpoint helpers ------------------------------------------------------

def load_gaussians(config: PipelineConfig, checkpoint: Checkpoint, frame: Optional[int] = 0) -> GaussianSet:
    """
    Decoded Gaussians from a checkpoint

    frame None gives the canonical set; otherwise the set is reposed with that
    frame's refined body state.
    """
    subject = subject_from_checkpoint(checkpoint)
    state = state_from_checkpoint(checkpoint, config.train)
    with torch.no_grad():
        _, canonical = canonical_gaussians(state, subject)
        if frame is None:
            return canonical
        bodies = bodies_from_checkpoint(checkpoint, state)
        if not bodies:
            logger.warning("Checkpoint stores no body states; using the canonical pose")
            return canonical
        if not 0 <= frame < len(bodies):
            raise InvalidArgumentError(f"frame {frame} out of range (checkpoint has {len(bodies)} frames)")
        return pose_frame(canonical, subject, bodies[frame], None, None).detach()


def _open_checkpoint(config: PipelineConfig) -> Checkpoint:
    path = config.paths.checkpoint_file()
    checkpoint = read_checkpoint(path)
    logger.info("✓ Checkpoint %s (step %d, %d Gaussians)", path, checkpoint.meta["step"],
                checkpoint.meta["gaussians"])
    return checkpoint


def _render_dtype(config: PipelineConfig) -> torch.dtype:
    return resolve_precision(config.render.precision)


def render_view(gaussians: GaussianSet, camera: CameraPose, background) -> np.ndarray:
    with torch.no_grad():
        return rasterize(gaussians, camera, background).image_array()


# -- subcommands -------------------------------------------------------------

def cmd_augment(config: PipelineConfig, progress: bool = True) -> Path:
    """Super-resolve and interpolate the source frames into paths.augmented"""
    validate_config(config, "augment")
    aug = config.augment
    output = config.paths.augmented_dir()
    with OutputLock(Path(config.paths.output)):
        video = read_video(config.paths.frames)
        if len(video) != config.orbit.frames:
            logger.warning("%d source frames but orbit.frames is %d", len(video), config.orbit.frames)
        resolver = build_super_resolver(aug.super_resolution, aug.super_resolver, aug.factor, aug.target,
                                        aug.super_resolver_command)
        interpolator = None
        if aug.frame_interpolation:
            interpolator = build_interpolator(aug.interpolator, aug.interpolator_command,
                                              levels=aug.flow_levels, iterations=aug.flow_iterations,
                                              smoothness=aug.flow_smoothness, inner_sweeps=aug.flow_inner_sweeps)
        augmented = augment_video(video, resolver, interpolator, aug.times, progress=progress)

        output.mkdir(parents=True, exist_ok=True)
        for stale in output.iterdir():
            if FRAME_PATTERN.match(stale.name):
                stale.unlink()
        write_frame_files(output, augmented.frames)
        write_augment_manifest(output / AUGMENT_MANIFEST, augmented)
    logger.info("✓ Augmented %d -> %d frames in %s", len(video), len(augmented), output)
    return output


def cmd_fit(config: PipelineConfig, resume: bool = False, progress: bool = True) -> Path:
    """Fit the avatar to the augmented frames; returns the checkpoint path"""
    validate_config(config, "fit")
    paths, train = config.paths, config.train
    output = Path(paths.output)
    checkpoint_path = paths.checkpoint_file()
    with OutputLock(output):
        template = load_template(paths.body)
        beta = read_shape_file(paths.shape) if paths.shape else np.zeros(template.num_shapes)
        if beta.shape != (template.num_shapes,):
            raise InvalidArgumentError(f"{paths.shape}: {len(beta)} shape components, "
                                       f"template has {template.num_shapes}")
        frames_dir = paths.augmented_dir()
        frames = _fit_frames(read_frame_files(frames_dir), config.render.resolution)
        positions = frame_positions(frames_dir, len(frames), config.orbit.frames)
        height, width = frames[0].shape[:2]
        cameras = timeline_cameras(config.orbit, positions, width, height)
        rows = read_pose_file(paths.poses, template.num_joints) if paths.poses else []
        states = timeline_states(rows, positions, template.num_joints, beta)

        state = None
        if resume and checkpoint_path.exists():
            checkpoint = read_checkpoint(checkpoint_path)
            subject = subject_from_checkpoint(checkpoint)
            state = state_from_checkpoint(checkpoint, train)
            logger.info("Resuming from %s at step %d", checkpoint_path, state.step)
        else:
            subject = build_subject(template, beta, config.body.gaussian_count, config.body.seed,
                                    config.body.uv_resolution)

        snapshot = config.to_dict()
        assets = {"frames": file_digest(sorted(p for p in frames_dir.iterdir() if FRAME_PATTERN.match(p.name)))}
        for name in ("body", "poses", "shape"):
            value = getattr(paths, name)
            if value and Path(value).is_file():
                assets[name] = file_digest([value])
            elif value:
                assets[name] = f"builtin:{value}"
        toggles = {
            "toggle.super_resolution": config.augment.super_resolution,
            "toggle.frame_interpolation": config.augment.frame_interpolation,
            "toggle.motion_refinement": train.motion_refinement,
            "frames": len(frames),
        }
        output.mkdir(parents=True, exist_ok=True)
        write_run_manifest(output / RUN_MANIFEST, snapshot, {"body": config.body.seed, "train": train.seed},
                           assets, toggles)

        try:
            state = fit(frames, cameras, states, train, subject, background=config.render.background,
                        dtype=_render_dtype(config), state=state, checkpoint_path=checkpoint_path,
                        loss_csv=output / LOSS_CSV, config_snapshot=snapshot, progress=progress)
        except NumericalError as e:
            dump = output / FAILURE_DUMP
            detail = e.breakdown.describe() if e.breakdown is not None else "no breakdown"
            dump.write_text(f"{e}\n{detail}\n")
            logger.error("✗ Loss breakdown written to %s", dump)
            raise

        for frame, body in enumerate(states):
            body.delta_theta, body.delta_translation = state.corrections(frame)
        write_pose_file(output / REFINED_POSES, states, refined=True)
    logger.info("✓ Fit complete: %s", checkpoint_path)
    return checkpoint_path


def cmd_render(config: PipelineConfig, orbit: Optional[int] = None, views: Sequence[Tuple[float, float]] = (),
               frame: Optional[int] = 0, float_dump: bool = False) -> List[Path]:
    """
    Render PNGs into <output>/renders

    Args:
        orbit: Turntable of this many evenly spaced azimuths
        views: Explicit (azimuth, elevation) pairs
        frame: Body state to render; None renders the canonical pose
        float_dump: Also write the raw float image next to each PNG

    With neither orbit nor views the eval views are rendered.
    """
    validate_config(config, "render")
    if orbit is not None and orbit < 1:
        raise InvalidArgumentError(f"--orbit needs a positive frame count, got {orbit}")
    o, size = config.orbit, config.render.resolution
    if orbit is not None:
        cameras = [(f"orbit_{k:03d}", c) for k, c in
                   enumerate(make_static_orbit(max(orbit, 2), o.elevation, o.radius, o.fov, size, size)[:orbit])]
    elif views:
        cameras = [(f"view_az{az:g}_el{el:g}", make_camera(az, el, o.radius, o.fov, size, size)) for az, el in views]
    else:
        cameras = [(name, make_camera(az, o.elevation, o.radius, o.fov, size, size))
                   for name, az in config.eval.views.items()]

    output = Path(config.paths.output)
    with OutputLock(output):
        gaussians = load_gaussians(config, _open_checkpoint(config), frame).to(_render_dtype(config))
        directory = output / "renders"
        directory.mkdir(parents=True, exist_ok=True)
        written = []
        for name, camera in cameras:
            image = render_view(gaussians, camera, config.render.background)
            path = directory / f"{name}.png"
            save_png(path, image)
            if float_dump:
                write_float_image(directory / f"{name}.f32", image)
            written.append(path)
    logger.info("✓ %d renders in %s", len(written), directory)
    return written


def cmd_eval(config: PipelineConfig, frame: Optional[int] = 0) -> Path:
    """Score renders of the eval views against <ground_truth>/<view>.png"""
    validate_config(config, "eval")
    gt_dir = Path(config.paths.ground_truth)
    missing = [name for name in config.eval.views if not (gt_dir / f"{name}.png").exists()]
    if missing:
        raise InvalidArgumentError(f"ground truth missing for view(s) {', '.join(missing)} in {gt_dir}")

    output = Path(config.paths.output)
    with OutputLock(output):
        gaussians = load_gaussians(config, _open_checkpoint(config), frame).to(_render_dtype(config))
        extractor = None
        if config.eval.lpips:
            extractor = build_extractor(config.train.extractor, config.train.seed,
                                        config.train.extractor_weights or None)
            if isinstance(extractor, NullExtractor):
                extractor = None
        directory = output / "eval"
        directory.mkdir(parents=True, exist_ok=True)

        o = config.orbit
        rows = []
        for name, azimuth in config.eval.views.items():
            truth = load_png(gt_dir / f"{name}.png")
            height, width = truth.shape[:2]
            camera = make_camera(azimuth, o.elevation, o.radius, o.fov, width, height)
            image = to_uint8(render_view(gaussians, camera, config.render.background)) / 255.0
            save_png(directory / f"{name}.png", image)
            scores = {"psnr": psnr(image, truth), "ssim": ssim(image, truth)}
            if extractor is not None:
                scores["lpips"] = lpips(image, truth, extractor)
            rows.append(MetricRow(name, scores))
            logger.info("%s: %s", name, " ".join(f"{k}={v:.4f}" for k, v in scores.items()))

        report = output / EVAL_REPORT
        extra = {"checkpoint": str(config.paths.checkpoint_file()),
                 "frame": "canonical" if frame is None else str(frame)}
        write_metric_report(report, rows + [mean_row(rows)], extra)
    logger.info("✓ Eval report: %s", report)
    return report


def cmd_export(config: PipelineConfig, frame: Optional[int] = None, path: Optional[str] = None) -> Path:
    """Write the Gaussians as PLY (canonical pose unless frame is given)"""
    validate_config(config, "export")
    output = Path(config.paths.output)
    target = Path(path) if path else output / PLY_NAME
    with OutputLock(output):
        gaussians = load_gaussians(config, _open_checkpoint(config), frame)
        target.parent.mkdir(parents=True, exist_ok=True)
        write_ply(target, gaussians)
    logger.info("✓ Exported %d Gaussians to %s", len(gaussians), target)
    return target
