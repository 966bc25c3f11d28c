#!/usr/bin/env python3
"""
Pluggable super-resolution and frame-interpolation stages

Built-in backends are classical (bicubic, optical flow). The "external"
backends hand frames to a user command through a frames directory:

    super-resolver:  command reads {input}/frame_0001.png ... and writes the
                     same names into {output}
    interpolator:    command reads {input}/frame_0001.png (start) and
                     frame_0002.png (end), writes one frame per entry of
                     {times} (comma separated) into {output}

Command strings are formatted with those placeholders and split with shlex.
"""

import logging
import shlex
import subprocess
import tempfile
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Callable, Dict, List, Sequence

import numpy as np

from ..errors import InvalidArgumentError
from .flow import INNER_SWEEPS, ITERATIONS, PYRAMID_LEVELS, SMOOTHNESS, estimate_flow
from .interpolate import interpolate_frame
from .resample import TARGET_SIZE, UPSAMPLE_FACTOR, resize_only, upsample_resize

logger = logging.getLogger(__name__)


class SuperResolver(ABC):
    name = "super-resolver"

    @abstractmethod
    def enhance(self, frame: np.ndarray) -> np.ndarray:
        """One frame in, one (target, target, 3) frame out"""

    def enhance_all(self, frames: Sequence[np.ndarray]) -> List[np.ndarray]:
        return [self.enhance(f) for f in frames]


class BicubicSuperResolver(SuperResolver):
    name = "bicubic"

    def __init__(self, factor: int = UPSAMPLE_FACTOR, target: int = TARGET_SIZE):
        self.factor = factor
        self.target = target

    def enhance(self, frame: np.ndarray) -> np.ndarray:
        return upsample_resize(frame, self.factor, self.target)


class ResizeOnly(SuperResolver):
    """Super-resolution switched off: frames are only brought to the target size"""

    name = "resize"

    def __init__(self, target: int = TARGET_SIZE):
        self.target = target

    def enhance(self, frame: np.ndarray) -> np.ndarray:
        return resize_only(frame, self.target)


class FrameInterpolator(ABC):
    name = "interpolator"

    @abstractmethod
    def between(self, f0: np.ndarray, f1: np.ndarray, times: Sequence[float]) -> List[np.ndarray]:
        """Intermediate frames for each t in times"""


class FlowInterpolator(FrameInterpolator):
    name = "flow"

    def __init__(self, levels: int = PYRAMID_LEVELS, iterations: int = ITERATIONS,
                 smoothness: float = SMOOTHNESS, inner_sweeps: int = INNER_SWEEPS):
        self.levels = levels
        self.iterations = iterations
        self.smoothness = smoothness
        self.inner_sweeps = inner_sweeps

    def between(self, f0: np.ndarray, f1: np.ndarray, times: Sequence[float]) -> List[np.ndarray]:
        flows = estimate_flow(f0, f1, self.levels, self.iterations, self.smoothness, self.inner_sweeps)
        return [interpolate_frame(f0, f1, t, flows) for t in times]


def _run(command: str, **fields) -> None:
    args = shlex.split(command.format(**fields))
    logger.debug("Running external stage: %s", " ".join(args))
    try:
        subprocess.run(args, check=True, capture_output=True, text=True)
    except subprocess.CalledProcessError as e:
        detail = (e.stderr or "").strip().splitlines()
        raise OSError(f"external command failed ({e.returncode}): {args[0]}"
                      + (f": {detail[-1]}" if detail else "")) from None


class ExternalSuperResolver(SuperResolver):
    name = "external"

    def __init__(self, command: str, target: int = TARGET_SIZE):
        if not command:
            raise InvalidArgumentError("external super-resolver needs a command")
        self.command = command
        self.target = target

    def enhance(self, frame: np.ndarray) -> np.ndarray:
        return self.enhance_all([frame])[0]

    def enhance_all(self, frames: Sequence[np.ndarray]) -> List[np.ndarray]:
        from .video import read_frame_files, write_frame_files

        with tempfile.TemporaryDirectory(prefix="orbit-splat-sr-") as tmp:
            src = Path(tmp) / "input"
            dst = Path(tmp) / "output"
            dst.mkdir()
            write_frame_files(src, frames)
            _run(self.command, input=src, output=dst)
            enhanced = read_frame_files(dst, expected=len(frames))
        return [resize_only(f, self.target) for f in enhanced]


class ExternalInterpolator(FrameInterpolator):
    name = "external"

    def __init__(self, command: str):
        if not command:
            raise InvalidArgumentError("external interpolator needs a command")
        self.command = command

    def between(self, f0: np.ndarray, f1: np.ndarray, times: Sequence[float]) -> List[np.ndarray]:
        from .video import read_frame_files, write_frame_files

        with tempfile.TemporaryDirectory(prefix="orbit-splat-vfi-") as tmp:
            src = Path(tmp) / "input"
            dst = Path(tmp) / "output"
            dst.mkdir()
            write_frame_files(src, [f0, f1])
            _run(self.command, input=src, output=dst, times=",".join(repr(float(t)) for t in times))
            return read_frame_files(dst, expected=len(times))


SUPER_RESOLVERS: Dict[str, Callable[..., SuperResolver]] = {
    "bicubic": lambda factor, target, command: BicubicSuperResolver(factor, target),
    "external": lambda factor, target, command: ExternalSuperResolver(command, target),
}
INTERPOLATORS: Dict[str, Callable[..., FrameInterpolator]] = {
    "flow": lambda command, **flow_options: FlowInterpolator(**flow_options),
    "external": lambda command, **flow_options: ExternalInterpolator(command),
}


def build_super_resolver(enabled: bool, backend: str = "bicubic", factor: int = UPSAMPLE_FACTOR,
                         target: int = TARGET_SIZE, command: str = "") -> SuperResolver:
    if not enabled:
        return ResizeOnly(target)
    try:
        factory = SUPER_RESOLVERS[backend]
    except KeyError:
        raise InvalidArgumentError(
            f"unknown super-resolver '{backend}' (choose from {sorted(SUPER_RESOLVERS)})") from None
    return factory(factor, target, command)


def build_interpolator(backend: str = "flow", command: str = "", **flow_options) -> FrameInterpolator:
    try:
        factory = INTERPOLATORS[backend]
    except KeyError:
        raise InvalidArgumentError(
            f"unknown interpolator '{backend}' (choose from {sorted(INTERPOLATORS)})") from None
    return factory(command, **flow_options)
