#!/usr/bin/env python3
"""
Bicubic upsample + resize, channel by channel on 32-bit float Pillow images
"""

import numpy as np
from PIL import Image

from ..errors import InvalidArgumentError

UPSAMPLE_FACTOR = 4
TARGET_SIZE = 1080


def _check_frame(frame) -> np.ndarray:
    data = np.asarray(frame, dtype=np.float64)
    if data.ndim != 3 or data.shape[2] != 3:
        raise InvalidArgumentError(f"expected an (H, W, 3) frame, got shape {data.shape}")
    return data


def resize_bicubic(frame, width: int, height: int) -> np.ndarray:
    """(H, W, 3) float frame -> (height, width, 3); no clamping"""
    data = _check_frame(frame)
    if width <= 0 or height <= 0:
        raise InvalidArgumentError(f"target size must be positive, got {width}x{height}")
    channels = []
    for c in range(data.shape[2]):
        plane = Image.fromarray(data[:, :, c].astype(np.float32))
        channels.append(np.asarray(plane.resize((width, height), Image.BICUBIC), dtype=np.float64))
    return np.stack(channels, axis=-1)


def upsample_resize(frame, factor: int = UPSAMPLE_FACTOR, target: int = TARGET_SIZE) -> np.ndarray:
    """
    Bicubic upsample by factor, then bicubic resize to target x target

    Args:
        frame: Square (S, S, 3) frame in [0, 1]
        factor: Integer upsampling factor
        target: Output side length

    Returns:
        (target, target, 3) frame clamped to [0, 1]
    """
    data = _check_frame(frame)
    height, width = data.shape[:2]
    if height != width:
        raise InvalidArgumentError(f"orbit frames must be square, got {width}x{height}")
    if factor < 1:
        raise InvalidArgumentError(f"upsampling factor must be >= 1, got {factor}")
    large = resize_bicubic(data, width * factor, height * factor)
    return np.clip(resize_bicubic(large, target, target), 0.0, 1.0)


def resize_only(frame, target: int = TARGET_SIZE) -> np.ndarray:
    """Resize to target without the super-resolution step"""
    data = _check_frame(frame)
    if data.shape[0] != data.shape[1]:
        raise InvalidArgumentError(f"orbit frames must be square, got {data.shape[1]}x{data.shape[0]}")
    if data.shape[0] == target:
        return np.clip(data, 0.0, 1.0)
    return np.clip(resize_bicubic(data, target, target), 0.0, 1.0)
