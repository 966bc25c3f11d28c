#!/usr/bin/env python3
"""
Mean-square regularizers on decoder offsets, raw scales and the feature tensor
"""

import torch

from ..body_model.skinning import as_tensor
from ..errors import InvalidArgumentError
from ..gaussian_cloud import FeatureTensor


def _values(value) -> torch.Tensor:
    if isinstance(value, FeatureTensor):
        value = value.values
    dtype = value.dtype if isinstance(value, torch.Tensor) and value.is_floating_point() else torch.float64
    return as_tensor(value, dtype)


def reg_offset(offsets) -> torch.Tensor:
    """(1/N) sum_i ||dx_i||^2 for (N, 3) offsets"""
    x = _values(offsets)
    if x.dim() != 2 or x.shape[1] != 3:
        raise InvalidArgumentError(f"offsets must be (N, 3), got {tuple(x.shape)}")
    if x.shape[0] == 0:
        raise InvalidArgumentError("offset regularizer needs at least one Gaussian")
    return (x * x).sum(dim=1).mean()


def reg_scale(raw_scales) -> torch.Tensor:
    """(1/N) sum_i s_i^2 for (N,) or (N, 1) raw scales"""
    s = _values(raw_scales).reshape(-1)
    if s.numel() == 0:
        raise InvalidArgumentError("scale regularizer needs at least one Gaussian")
    return (s * s).mean()


def reg_feature(features) -> torch.Tensor:
    """(1/F) sum t^2 over every feature scalar"""
    t = _values(features).reshape(-1)
    if t.numel() == 0:
        raise InvalidArgumentError("feature regularizer needs a non-empty tensor")
    return (t * t).mean()
