#!/usr/bin/env python3
"""
LPIPS-form perceptual distance over a pluggable feature extractor

    d(x, y) = sum_l 1/(H_l W_l) sum_hw || w_l * (f_l(x) - f_l(y)) ||^2

with features unit-normalized along channels. The pretrained backbone is not
bundled; extractors are either seeded random conv pyramids, the identity,
or null (term disabled). Conv pyramids can be stored in a weight file:

    8 bytes  magic b"OSPLFEXT"
    uint32   version, layer count
    per layer: uint32 out_channels, in_channels, kernel, stride
    then per layer: float32 kernel weights, biases, channel weights (little-endian)
"""

import logging
import struct
from abc import ABC, abstractmethod
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
import torch
import torch.nn.functional as F

from ..errors import AssetFormatError, InvalidArgumentError
from .photometric import image_pair

logger = logging.getLogger(__name__)

NORM_EPS = 1e-10
WEIGHTS_MAGIC = b"OSPLFEXT"
WEIGHTS_VERSION = 1
_HEAD = struct.Struct("<8sII")
_LAYER = struct.Struct("<IIII")


class FeatureExtractor(ABC):
    """Deterministic per-layer feature maps with fixed channel weights"""

    name = "extractor"

    @property
    @abstractmethod
    def layer_weights(self) -> List[torch.Tensor]:
        """w_l, one (C_l,) tensor per layer"""

    @abstractmethod
    def features(self, image: torch.Tensor) -> List[torch.Tensor]:
        """(1, 3, H, W) -> list of (1, C_l, H_l, W_l)"""

    @property
    def num_layers(self) -> int:
        return len(self.layer_weights)

    def check_input(self, height: int, width: int) -> None:
        pass


class IdentityExtractor(FeatureExtractor):
    """One layer whose features are the pixels themselves"""

    name = "identity"

    def __init__(self, channel_weights: Optional[Sequence[float]] = None):
        weights = torch.ones(3) if channel_weights is None else torch.as_tensor(channel_weights, dtype=torch.float64)
        if weights.shape != (3,):
            raise InvalidArgumentError("identity extractor takes one weight per RGB channel")
        self._weights = [weights]

    @property
    def layer_weights(self) -> List[torch.Tensor]:
        return self._weights

    def features(self, image: torch.Tensor) -> List[torch.Tensor]:
        return [image]


class NullExtractor(FeatureExtractor):
    """No layers; the perceptual term is identically zero"""

    name = "none"

    @property
    def layer_weights(self) -> List[torch.Tensor]:
        return []

    def features(self, image: torch.Tensor) -> List[torch.Tensor]:
        return []


class ConvPyramidExtractor(FeatureExtractor):
    """
    Fixed stride-2 3x3 convolutions with tanh, one feature map per level

    Weights are drawn once from a seeded generator and held in float32 so a
    saved weight file reloads bit for bit.
    """

    name = "pyramid"

    def __init__(self, kernels: Sequence[torch.Tensor], biases: Sequence[torch.Tensor],
                 channel_weights: Sequence[torch.Tensor], strides: Sequence[int]):
        if not (len(kernels) == len(biases) == len(channel_weights) == len(strides)):
            raise InvalidArgumentError("pyramid layers need matching kernels, biases, weights and strides")
        in_channels = 3
        for level, (k, b, w) in enumerate(zip(kernels, biases, channel_weights)):
            if k.dim() != 4 or k.shape[1] != in_channels or k.shape[2] != k.shape[3]:
                raise InvalidArgumentError(f"layer {level}: kernel shape {tuple(k.shape)} does not chain")
            if b.shape != (k.shape[0],) or w.shape != (k.shape[0],):
                raise InvalidArgumentError(f"layer {level}: bias/weight length must be {k.shape[0]}")
            in_channels = k.shape[0]
        self.kernels = [torch.as_tensor(k, dtype=torch.float32) for k in kernels]
        self.biases = [torch.as_tensor(b, dtype=torch.float32) for b in biases]
        self._weights = [torch.as_tensor(w, dtype=torch.float32) for w in channel_weights]
        self.strides = [int(s) for s in strides]

    @classmethod
    def seeded(cls, seed: int = 0, channels: Sequence[int] = (16, 32, 64), kernel: int = 3) -> "ConvPyramidExtractor":
        generator = torch.Generator().manual_seed(int(seed))
        kernels, biases, weights = [], [], []
        in_channels = 3
        for out_channels in channels:
            fan_in = in_channels * kernel * kernel
            k = torch.randn(out_channels, in_channels, kernel, kernel, generator=generator, dtype=torch.float64)
            kernels.append((k / np.sqrt(fan_in)).float())
            biases.append((0.1 * torch.randn(out_channels, generator=generator, dtype=torch.float64)).float())
            weights.append(torch.ones(out_channels, dtype=torch.float32))
            in_channels = out_channels
        return cls(kernels, biases, weights, [2] * len(channels))

    @property
    def layer_weights(self) -> List[torch.Tensor]:
        return self._weights

    def check_input(self, height: int, width: int) -> None:
        smallest = 2 ** len(self.kernels)
        if height < smallest or width < smallest:
            raise InvalidArgumentError(f"pyramid extractor needs images of at least {smallest}x{smallest}")

    def features(self, image: torch.Tensor) -> List[torch.Tensor]:
        maps = []
        h = 2.0 * image - 1.0
        for k, b, stride in zip(self.kernels, self.biases, self.strides):
            h = torch.tanh(F.conv2d(h, k.to(h.dtype), b.to(h.dtype), stride=stride, padding=k.shape[-1] // 2))
            maps.append(h)
        return maps


def _unit_normalize(f: torch.Tensor) -> torch.Tensor:
    # zero vectors map to zero with a finite gradient
    return F.normalize(f, p=2.0, dim=1, eps=NORM_EPS)


def lpips_torch(x, y, extractor: FeatureExtractor) -> torch.Tensor:
    x, y = image_pair(x, y)
    height, width, channels = x.shape
    if channels != 3:
        raise InvalidArgumentError(f"perceptual distance needs RGB images, got {channels} channels")
    extractor.check_input(height, width)

    fx = extractor.features(x.permute(2, 0, 1)[None])
    fy = extractor.features(y.permute(2, 0, 1)[None])
    total = torch.zeros((), dtype=x.dtype)
    for a, b, w in zip(fx, fy, extractor.layer_weights):
        if w.shape[0] != a.shape[1]:
            raise InvalidArgumentError(f"{w.shape[0]} channel weights for a {a.shape[1]}-channel layer")
        diff = (_unit_normalize(a) - _unit_normalize(b)) * w.to(x.dtype)[None, :, None, None]
        total = total + (diff * diff).sum(dim=1).mean()
    return total


def lpips(x, y, extractor: FeatureExtractor) -> float:
    x, y = image_pair(x, y, torch.float64)
    return float(lpips_torch(x, y, extractor))


def save_extractor(path: Union[str, Path], extractor: ConvPyramidExtractor) -> None:
    if not isinstance(extractor, ConvPyramidExtractor):
        raise InvalidArgumentError(f"only pyramid extractors have weight files, got '{extractor.name}'")
    with open(path, "wb") as f:
        f.write(_HEAD.pack(WEIGHTS_MAGIC, WEIGHTS_VERSION, len(extractor.kernels)))
        for k, stride in zip(extractor.kernels, extractor.strides):
            f.write(_LAYER.pack(k.shape[0], k.shape[1], k.shape[2], stride))
        for k, b, w in zip(extractor.kernels, extractor.biases, extractor.layer_weights):
            for t in (k, b, w):
                f.write(t.numpy().astype("<f4").tobytes())


def load_extractor(path: Union[str, Path]) -> ConvPyramidExtractor:
    raw = Path(path).read_bytes()
    if len(raw) < _HEAD.size:
        raise AssetFormatError(path, "file too short for an extractor header")
    magic, version, layers = _HEAD.unpack_from(raw, 0)
    if magic != WEIGHTS_MAGIC:
        raise AssetFormatError(path, "not an extractor weight file (bad magic)")
    if version != WEIGHTS_VERSION:
        raise AssetFormatError(path, f"extractor weight version {version} unsupported (expected {WEIGHTS_VERSION})")

    offset = _HEAD.size
    shapes = []
    for level in range(layers):
        if offset + _LAYER.size > len(raw):
            raise AssetFormatError(path, f"layer {level}: truncated shape table")
        shapes.append(_LAYER.unpack_from(raw, offset))
        offset += _LAYER.size

    def take(count: int, what: str, level: int) -> torch.Tensor:
        nonlocal offset
        end = offset + 4 * count
        if end > len(raw):
            raise AssetFormatError(path, f"layer {level}: truncated {what}")
        values = np.frombuffer(raw[offset:end], dtype="<f4").astype(np.float32)
        offset = end
        return torch.from_numpy(values)

    kernels, biases, weights, strides = [], [], [], []
    for level, (out_channels, in_channels, size, stride) in enumerate(shapes):
        kernels.append(take(out_channels * in_channels * size * size, "kernel", level)
                       .reshape(out_channels, in_channels, size, size))
        biases.append(take(out_channels, "bias", level))
        weights.append(take(out_channels, "channel weights", level))
        strides.append(stride)
    if offset != len(raw):
        raise AssetFormatError(path, f"{len(raw) - offset} trailing bytes after the last layer")
    try:
        return ConvPyramidExtractor(kernels, biases, weights, strides)
    except InvalidArgumentError as e:
        raise AssetFormatError(path, str(e)) from None


def build_extractor(kind: str, seed: int = 0, weights_path: Optional[Union[str, Path]] = None) -> FeatureExtractor:
    """
    Args:
        kind: "pyramid", "identity", "none" or "file"
        seed: Seed for the pyramid weights
        weights_path: Weight file used when kind is "file"
    """
    if kind == "pyramid":
        return ConvPyramidExtractor.seeded(seed)
    if kind == "identity":
        return IdentityExtractor()
    if kind == "none":
        return NullExtractor()
    if kind == "file":
        if weights_path is None:
            raise InvalidArgumentError("extractor kind 'file' needs a weights path")
        extractor = load_extractor(weights_path)
        logger.info("✓ Feature extractor loaded: %s (%d layers)", weights_path, extractor.num_layers)
        return extractor
    raise InvalidArgumentError(f"unknown extractor kind '{kind}'")
