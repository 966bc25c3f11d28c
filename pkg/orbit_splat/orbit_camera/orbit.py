#!/usr/bin/env python3
"""
Static orbit camera trajectory and pinhole projection

Conventions:
- World is right-handed, y-up; the figure faces +z
- Azimuth 0 places the camera on +z (front view), azimuth grows towards +x
- Camera frame: x right, y down, z forward (the look direction)
- Pixel coordinates are continuous; pixel (row, col) covers [col, col+1) x [row, row+1)
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np

from ..errors import AssetFormatError, InvalidArgumentError

logger = logging.getLogger(__name__)

NEAR_PLANE = 0.01
WORLD_UP = np.array([0.0, 1.0, 0.0])


@dataclass(frozen=True)
class CameraPose:
    """One orbit view: pinhole intrinsics plus world-to-camera extrinsics"""
    azimuth: float
    elevation: float
    radius: float
    fov: float
    width: int
    height: int
    extrinsic: np.ndarray = field(repr=False)
    intrinsic: np.ndarray = field(repr=False)

    @property
    def rotation(self) -> np.ndarray:
        return self.extrinsic[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.extrinsic[:3, 3]

    @property
    def focal(self) -> float:
        return float(self.intrinsic[0, 0])

    @property
    def center(self) -> Tuple[float, float]:
        return float(self.intrinsic[0, 2]), float(self.intrinsic[1, 2])

    @property
    def position(self) -> np.ndarray:
        """Camera center in world coordinates"""
        return -self.rotation.T @ self.translation


def focal_from_fov(fov: float, height: int) -> float:
    return (height / 2.0) / math.tan(math.radians(fov) / 2.0)


def look_at(eye: np.ndarray, target: np.ndarray = None, up: np.ndarray = WORLD_UP) -> np.ndarray:
    """
    Build a 4x4 world-to-camera transform looking from eye to target

    Args:
        eye: Camera position in world coordinates
        target: Point the optical axis passes through (default origin)
        up: World up direction

    Returns:
        4x4 rigid transform
    """
    eye = np.asarray(eye, dtype=np.float64)
    target = np.zeros(3) if target is None else np.asarray(target, dtype=np.float64)

    forward = target - eye
    norm = np.linalg.norm(forward)
    if norm <= 0:
        raise InvalidArgumentError("eye and target coincide")
    z_axis = forward / norm
    x_axis = np.cross(z_axis, up)
    x_norm = np.linalg.norm(x_axis)
    if x_norm < 1e-12:
        raise InvalidArgumentError("view direction is parallel to the up vector")
    x_axis = x_axis / x_norm
    y_axis = np.cross(z_axis, x_axis)

    rotation = np.stack([x_axis, y_axis, z_axis])
    extrinsic = np.eye(4)
    extrinsic[:3, :3] = rotation
    extrinsic[:3, 3] = -rotation @ eye
    return extrinsic


def make_camera(azimuth: float, elevation: float, radius: float, fov: float,
                width: int, height: int) -> CameraPose:
    """Single orbit camera looking at the world origin"""
    if radius <= 0:
        raise InvalidArgumentError(f"radius must be positive, got {radius}")
    if not 0.0 < fov < 180.0:
        raise InvalidArgumentError(f"fov must lie in (0, 180) degrees, got {fov}")
    if not -90.0 < elevation < 90.0:
        raise InvalidArgumentError(f"elevation must lie in (-90, 90) degrees, got {elevation}")
    if width <= 0 or height <= 0:
        raise InvalidArgumentError(f"image size must be positive, got {width}x{height}")

    az = math.radians(azimuth)
    el = math.radians(elevation)
    eye = radius * np.array([
        math.cos(el) * math.sin(az),
        math.sin(el),
        math.cos(el) * math.cos(az),
    ])

    f = focal_from_fov(fov, height)
    intrinsic = np.array([
        [f, 0.0, width / 2.0],
        [0.0, f, height / 2.0],
        [0.0, 0.0, 1.0],
    ])
    return CameraPose(
        azimuth=float(azimuth),
        elevation=float(elevation),
        radius=float(radius),
        fov=float(fov),
        width=int(width),
        height=int(height),
        extrinsic=look_at(eye),
        intrinsic=intrinsic,
    )


def make_static_orbit(n_frames: int, elevation: float = 0.0, radius: float = 2.7,
                      fov: float = 33.8, width: int = 576, height: int = 576) -> List[CameraPose]:
    """
    Evenly spaced azimuths at one elevation, all looking at the origin

    Frame k sits at azimuth k * 360 / n_frames; frame 0 is the input (front) view.
    """
    if n_frames < 2:
        raise InvalidArgumentError(f"an orbit needs at least 2 frames, got {n_frames}")
    if radius <= 0:
        raise InvalidArgumentError(f"radius must be positive, got {radius}")

    step = 360.0 / n_frames
    poses = [make_camera(k * step, elevation, radius, fov, width, height) for k in range(n_frames)]
    logger.debug("Static orbit: %d frames, %.6f deg apart, elevation %.1f", n_frames, step, elevation)
    return poses


def project(pose: CameraPose, points) -> Tuple[np.ndarray, np.ndarray]:
    """
    Pinhole projection of world points

    Args:
        pose: Camera
        points: (3,) or (N, 3) world positions

    Returns:
        (pixels, depth): pixels (N, 2) as (x, y), depth (N,) camera-space z.
        Points at depth <= NEAR_PLANE get NaN pixels (behind-camera sentinel).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.shape[-1] != 3:
        raise InvalidArgumentError(f"points must have 3 coordinates, got shape {pts.shape}")

    cam = pts @ pose.rotation.T + pose.translation
    depth = cam[:, 2]
    pixels = np.full((len(pts), 2), np.nan)
    visible = depth > NEAR_PLANE
    if np.any(visible):
        f = pose.focal
        cx, cy = pose.center
        pixels[visible, 0] = f * cam[visible, 0] / depth[visible] + cx
        pixels[visible, 1] = f * cam[visible, 1] / depth[visible] + cy
    return pixels, depth


def unproject(pose: CameraPose, pixels, depth) -> np.ndarray:
    """Inverse of project for known camera-space depth"""
    pix = np.atleast_2d(np.asarray(pixels, dtype=np.float64))
    z = np.broadcast_to(np.asarray(depth, dtype=np.float64), (len(pix),))
    f = pose.focal
    cx, cy = pose.center
    cam = np.stack([(pix[:, 0] - cx) * z / f, (pix[:, 1] - cy) * z / f, z], axis=1)
    return (cam - pose.translation) @ pose.rotation


def write_orbit_file(path: Union[str, Path], poses: Sequence[CameraPose]) -> None:
    """One row per frame: index azimuth elevation radius fov width height + 16 extrinsic entries"""
    lines = []
    for index, pose in enumerate(poses):
        head = f"{index} {pose.azimuth!r} {pose.elevation!r} {pose.radius!r} {pose.fov!r} {pose.width} {pose.height}"
        tail = " ".join(repr(float(v)) for v in pose.extrinsic.reshape(-1))
        lines.append(f"{head} {tail}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_orbit_file(path: Union[str, Path]) -> List[CameraPose]:
    poses = []
    for line_no, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 23:
            raise AssetFormatError(path, f"expected 23 fields, found {len(fields)}", line_no)
        try:
            azimuth, elevation, radius, fov = (float(v) for v in fields[1:5])
            width, height = int(fields[5]), int(fields[6])
            extrinsic = np.array([float(v) for v in fields[7:]]).reshape(4, 4)
        except ValueError as e:
            raise AssetFormatError(path, f"unparsable value ({e})", line_no) from None
        pose = make_camera(azimuth, elevation, radius, fov, width, height)
        poses.append(CameraPose(
            azimuth=azimuth, elevation=elevation, radius=radius, fov=fov,
            width=width, height=height, extrinsic=extrinsic, intrinsic=pose.intrinsic,
        ))
    return poses
