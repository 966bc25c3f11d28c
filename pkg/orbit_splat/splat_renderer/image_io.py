#!/usr/bin/env python3
"""
Image files: 8-bit PNG through Pillow and a lossless float dump

Float dump layout (little-endian):
    8 bytes  magic b"OSPLFIMG"
    uint32   height, width, channels
    float32  height * width * channels values, row-major (row, col, channel)
"""

import struct
from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image

from ..errors import AssetFormatError, InvalidArgumentError

FLOAT_MAGIC = b"OSPLFIMG"
_FLOAT_HEADER = struct.Struct("<8sIII")


def to_uint8(image) -> np.ndarray:
    """round(255 * clamp(v, 0, 1))"""
    return np.round(255.0 * np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)).astype(np.uint8)


def save_png(path: Union[str, Path], image) -> None:
    data = to_uint8(image)
    if data.ndim != 3 or data.shape[2] != 3:
        raise InvalidArgumentError(f"expected an (H, W, 3) image, got shape {data.shape}")
    Image.fromarray(data).save(Path(path))


def load_png(path: Union[str, Path]) -> np.ndarray:
    """Any Pillow-readable image as (H, W, 3) float64 in [0, 1]"""
    try:
        with Image.open(Path(path)) as img:
            data = np.asarray(img.convert("RGB"), dtype=np.float64)
    except (OSError, SyntaxError) as e:
        if isinstance(e, FileNotFoundError):
            raise
        raise AssetFormatError(path, f"unreadable image ({e})") from None
    return data / 255.0


def write_float_image(path: Union[str, Path], image) -> None:
    data = np.asarray(image, dtype="<f4")
    if data.ndim == 2:
        data = data[..., None]
    if data.ndim != 3:
        raise InvalidArgumentError(f"expected (H, W) or (H, W, C) array, got shape {data.shape}")
    height, width, channels = data.shape
    with open(path, "wb") as f:
        f.write(_FLOAT_HEADER.pack(FLOAT_MAGIC, height, width, channels))
        f.write(np.ascontiguousarray(data).tobytes())


def read_float_image(path: Union[str, Path]) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _FLOAT_HEADER.size:
        raise AssetFormatError(path, "file too short for a float image header")
    magic, height, width, channels = _FLOAT_HEADER.unpack_from(raw, 0)
    if magic != FLOAT_MAGIC:
        raise AssetFormatError(path, "not a float image dump (bad magic)")
    expected = height * width * channels * 4
    body = raw[_FLOAT_HEADER.size:]
    if len(body) != expected:
        raise AssetFormatError(path, f"expected {expected} bytes of pixel data, found {len(body)}")
    return np.frombuffer(body, dtype="<f4").reshape(height, width, channels).copy()
