"""
Optimizable appearance feature tensor t
"""

from dataclasses import dataclass
from typing import Tuple, Union

import torch
from torch import nn

from ..errors import InvalidArgumentError

INIT_STD = 0.01


@dataclass
class FeatureTensor:
    """H_uv x W_uv x C_f learnable scalars"""
    values: nn.Parameter

    @property
    def resolution(self) -> Tuple[int, int]:
        return tuple(self.values.shape[:2])

    @property
    def channels(self) -> int:
        return int(self.values.shape[2])

    def numel(self) -> int:
        return self.values.numel()


def init_feature_tensor(resolution: Union[int, Tuple[int, int]], channels: int, seed: int,
                        dtype: torch.dtype = torch.float32) -> FeatureTensor:
    """i.i.d. normal values with std 0.01, deterministic per seed"""
    if isinstance(resolution, int):
        resolution = (resolution, resolution)
    height, width = resolution
    if height <= 0 or width <= 0 or channels <= 0:
        raise InvalidArgumentError(f"feature tensor dimensions must be positive, got {height}x{width}x{channels}")
    generator = torch.Generator().manual_seed(int(seed))
    values = torch.randn((height, width, channels), generator=generator, dtype=torch.float64) * INIT_STD
    return FeatureTensor(values=nn.Parameter(values.to(dtype)))
