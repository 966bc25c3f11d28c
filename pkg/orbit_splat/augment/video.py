#!/usr/bin/env python3
"""
Frame sequences, the 21 -> 81 augmentation schedule, and frame directories

Frame directories hold zero-padded numbered PNGs (frame_0001.png ...). The
augment manifest lists one output frame per line:

    <output index> <source index> <t>

with 1-based indices; t = 0 marks an original frame, otherwise the frame was
interpolated between source frames <source index> and <source index> + 1.
"""

import logging
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
from tqdm import tqdm

from ..errors import AssetFormatError, InvalidArgumentError
from ..splat_renderer.image_io import load_png, save_png
from .backends import FrameInterpolator, SuperResolver

logger = logging.getLogger(__name__)

INTERPOLATION_TIMES = (0.25, 0.5, 0.75)
FRAME_PATTERN = re.compile(r"^frame_(\d{4,})\.png$")
MANIFEST_HEADER = "# orbit-splat augment manifest: <output index> <source index> <t>"


def frame_name(index: int) -> str:
    """1-based file name"""
    return f"frame_{index:04d}.png"


@dataclass
class VideoSequence:
    """
    Ordered frames sharing one resolution

    positions: each frame's place on the source timeline in source-frame
    units (original frame k sits at k, a frame interpolated at t between k
    and k + 1 sits at k + t)
    """
    frames: List[np.ndarray]
    positions: List[float] = field(default=None)

    def __post_init__(self):
        if len(self.frames) < 2:
            raise InvalidArgumentError(f"a video needs at least 2 frames, got {len(self.frames)}")
        shape = np.shape(self.frames[0])
        if len(shape) != 3 or shape[2] != 3:
            raise InvalidArgumentError(f"frames must be (H, W, 3), got {shape}")
        for index, frame in enumerate(self.frames):
            if np.shape(frame) != shape:
                raise InvalidArgumentError(f"frame {index} is {np.shape(frame)}, expected {shape}")
        if self.positions is None:
            self.positions = [float(k) for k in range(len(self.frames))]
        if len(self.positions) != len(self.frames):
            raise InvalidArgumentError("one timeline position per frame required")

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def resolution(self):
        return np.shape(self.frames[0])[:2]


def augmented_count(n: int, per_gap: int = len(INTERPOLATION_TIMES)) -> int:
    return n + per_gap * (n - 1)


def augment_video(video: Union[VideoSequence, Sequence[np.ndarray]], resolver: SuperResolver,
                  interpolator: Optional[FrameInterpolator],
                  times: Sequence[float] = INTERPOLATION_TIMES, progress: bool = False) -> VideoSequence:
    """
    Super-resolve every frame, then insert len(times) frames into each gap

    Args:
        video: Source frames (n >= 2)
        resolver: Upsample/resize stage
        interpolator: Gap filler; None keeps only the resized originals
        times: Interpolation times inside each gap
        progress: Show a progress bar

    Returns:
        n + len(times) * (n - 1) frames; originals sit at stride len(times) + 1
    """
    if not isinstance(video, VideoSequence):
        video = VideoSequence(list(video))
    if any(not 0.0 < t < 1.0 for t in times) or list(times) != sorted(times):
        raise InvalidArgumentError(f"interpolation times must be increasing inside (0, 1), got {list(times)}")

    enhanced = resolver.enhance_all(video.frames)
    logger.info("✓ Super-resolution (%s): %d frames at %dx%d", resolver.name, len(enhanced),
                enhanced[0].shape[1], enhanced[0].shape[0])
    if interpolator is None:
        return VideoSequence(enhanced, list(video.positions))

    frames = [enhanced[0]]
    positions = [video.positions[0]]
    gaps = range(len(enhanced) - 1)
    for k in tqdm(gaps, desc="interpolate", unit="gap", disable=not (progress and sys.stderr.isatty())):
        mids = interpolator.between(enhanced[k], enhanced[k + 1], times)
        if len(mids) != len(times):
            raise InvalidArgumentError(f"interpolator returned {len(mids)} frames for {len(times)} times")
        start, end = video.positions[k], video.positions[k + 1]
        for t, frame in zip(times, mids):
            frames.append(np.clip(frame, 0.0, 1.0))
            positions.append(start + t * (end - start))
        frames.append(enhanced[k + 1])
        positions.append(end)
    logger.info("✓ Frame interpolation (%s): %d -> %d frames", interpolator.name, len(enhanced), len(frames))
    return VideoSequence(frames, positions)


def write_frame_files(directory: Union[str, Path], frames: Sequence[np.ndarray]) -> List[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for index, frame in enumerate(frames, start=1):
        path = directory / frame_name(index)
        save_png(path, frame)
        paths.append(path)
    return paths


def read_frame_files(directory: Union[str, Path], expected: Optional[int] = None) -> List[np.ndarray]:
    """
    Load frame_0001.png ... in order

    Every problem (gaps in the numbering, unreadable or mis-sized files, a
    count different from expected) is collected and reported together.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"frames directory not found: {directory}")
    numbered = {}
    for path in directory.iterdir():
        match = FRAME_PATTERN.match(path.name)
        if match:
            numbered[int(match.group(1))] = path

    problems = []
    count = max(numbered) if numbered else 0
    for index in range(1, count + 1):
        if index not in numbered:
            problems.append(f"{frame_name(index)}: missing")
    if expected is not None and count != expected:
        problems.append(f"expected {expected} frames, found {count}")

    frames = []
    for index in sorted(numbered):
        try:
            frames.append(load_png(numbered[index]))
        except AssetFormatError as e:
            problems.append(f"{numbered[index].name}: {e}")
    if frames and not problems:
        shape = frames[0].shape
        problems.extend(f"{frame_name(i)}: size {f.shape[1]}x{f.shape[0]} differs from {shape[1]}x{shape[0]}"
                        for i, f in enumerate(frames, start=1) if f.shape != shape)
    if not numbered:
        problems.append("no frame_NNNN.png files")
    if problems:
        raise AssetFormatError(directory, "frame problems:\n  " + "\n  ".join(problems))
    return frames


def read_video(directory: Union[str, Path]) -> VideoSequence:
    return VideoSequence(read_frame_files(directory))


def write_augment_manifest(path: Union[str, Path], video: VideoSequence) -> None:
    lines = [MANIFEST_HEADER]
    for index, position in enumerate(video.positions, start=1):
        source = int(np.floor(position + 1e-9))
        t = position - source
        t = 0.0 if abs(t) < 1e-9 else round(t, 9)
        lines.append(f"{index} {source + 1} {t!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_augment_manifest(path: Union[str, Path]) -> List[float]:
    """Timeline positions (0-based source units) in output order"""
    positions = []
    for number, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise AssetFormatError(path, f"expected '<index> <source> <t>', got '{line}'", line=number)
        try:
            index, source, t = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise AssetFormatError(path, f"non-numeric manifest entry '{line}'", line=number) from None
        if index != len(positions) + 1:
            raise AssetFormatError(path, f"output index {index} out of order", line=number)
        if source < 1 or not 0.0 <= t < 1.0:
            raise AssetFormatError(path, f"bad source/t in '{line}'", line=number)
        positions.append(source - 1 + t)
    return positions
