#!/usr/bin/env python3
"""
Gaussian parameter decoder (dynamic appearance network)

Maps each valid UV pixel's (feature, position) vector to 7 outputs:
offset (3), raw color (3), raw log-scale (1). Applied per pixel, like a
1x1 convolution.
"""

from dataclasses import dataclass
from typing import Sequence

import torch
from torch import nn

from ..body_model.sampling import UVPositionMap
from ..errors import InvalidArgumentError
from .features import FeatureTensor

OUTPUT_WIDTH = 7
POSITION_CHANNELS = 3


class DecoderNet(nn.Module):
    """MLP with tanh hidden activations and a linear output layer"""

    def __init__(self, widths: Sequence[int]):
        super().__init__()
        widths = [int(w) for w in widths]
        if len(widths) < 2 or widths[-1] != OUTPUT_WIDTH:
            raise InvalidArgumentError(f"decoder widths must end in {OUTPUT_WIDTH}, got {widths}")
        if any(w <= 0 for w in widths):
            raise InvalidArgumentError(f"decoder widths must be positive, got {widths}")
        self.widths = widths
        self.layers = nn.ModuleList(nn.Linear(a, b) for a, b in zip(widths[:-1], widths[1:]))

    @property
    def input_width(self) -> int:
        return self.widths[0]

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        for layer in self.layers[:-1]:
            x = torch.tanh(layer(x))
        return self.layers[-1](x)


def build_decoder(feature_channels: int, hidden: Sequence[int] = (128, 128), seed: int = 0,
                  dtype: torch.dtype = torch.float32) -> DecoderNet:
    """Decoder with widths [C_f + 3, *hidden, 7], seeded initialization"""
    widths = [feature_channels + POSITION_CHANNELS, *hidden, OUTPUT_WIDTH]
    state = torch.random.get_rng_state()
    try:
        torch.manual_seed(int(seed))
        net = DecoderNet(widths)
    finally:
        torch.random.set_rng_state(state)
    return net.to(dtype)


@dataclass
class DecodedParams:
    """Per-Gaussian raw decoder outputs, one row per valid UV pixel in sample order"""
    offsets: torch.Tensor       # (N, 3)
    colors: torch.Tensor        # (N, 3) pre-activation
    scales: torch.Tensor        # (N, 1) pre-activation

    def __len__(self) -> int:
        return int(self.offsets.shape[0])


def decode(features: FeatureTensor, posmap: UVPositionMap, net: DecoderNet) -> DecodedParams:
    """
    P = Decode(cat(t, m)) evaluated at each sample's UV pixel

    Args:
        features: Feature tensor t
        posmap: UV position map m (same resolution)
        net: Decoder with input width C_f + 3

    Returns:
        DecodedParams split as (offset 3, color 3, scale 1)
    """
    if tuple(features.resolution) != tuple(posmap.resolution):
        raise InvalidArgumentError(
            f"feature tensor {features.resolution} and position map {posmap.resolution} differ in resolution")
    if net.input_width != features.channels + POSITION_CHANNELS:
        raise InvalidArgumentError(
            f"decoder expects {net.input_width} inputs, features give {features.channels + POSITION_CHANNELS}")

    values = features.values
    index = torch.as_tensor(posmap.pixel_index, dtype=torch.long)
    feats = values.reshape(-1, features.channels)[index]
    positions = torch.as_tensor(posmap.positions.reshape(-1, 3), dtype=values.dtype)[index]
    out = net(torch.cat([feats, positions], dim=1))
    return DecodedParams(offsets=out[:, 0:3], colors=out[:, 3:6], scales=out[:, 6:7])
