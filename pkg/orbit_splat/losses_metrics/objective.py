#!/usr/bin/env python3
"""
Weighted training objective

    total = rgb * L1 + ssim * (1 - SSIM) + lpips * LPIPS
          + offset * R_offset + scale * R_scale + feature * R_feature
"""

import math
from dataclasses import dataclass, field, fields
from typing import Dict, List, Mapping, Optional

import torch

from ..errors import InvalidArgumentError

TERMS = ("rgb", "ssim", "lpips", "offset", "scale", "feature")


@dataclass
class LossWeights:
    rgb: float = 0.8
    ssim: float = 0.2
    lpips: float = 0.2
    offset: float = 10.0
    scale: float = 1.0
    feature: float = 1.0

    def problems(self) -> List[str]:
        return [f"loss weight '{f.name}' must be non-negative, got {getattr(self, f.name)}"
                for f in fields(self) if not getattr(self, f.name) >= 0]

    def check(self) -> None:
        problems = self.problems()
        if problems:
            raise InvalidArgumentError("; ".join(problems))


@dataclass
class LossBreakdown:
    rgb: float = 0.0
    ssim: float = 0.0
    lpips: float = 0.0
    offset: float = 0.0
    scale: float = 0.0
    feature: float = 0.0
    total: float = 0.0
    tensor: Optional[torch.Tensor] = field(default=None, repr=False, compare=False)

    @classmethod
    def from_terms(cls, terms: Mapping[str, object], weights: LossWeights) -> "LossBreakdown":
        """Weighted sum without validation (used for diagnostic dumps too)"""
        values = {name: float(terms.get(name, 0.0)) for name in TERMS}
        total = 0.0
        tensor = None
        for name in TERMS:
            w = getattr(weights, name)
            if w == 0.0:
                continue
            total += w * values[name]
            term = terms.get(name)
            if isinstance(term, torch.Tensor):
                tensor = w * term if tensor is None else tensor + w * term
        return cls(total=total, tensor=tensor, **values)

    def as_row(self) -> Dict[str, float]:
        return {name: getattr(self, name) for name in (*TERMS, "total")}

    def describe(self) -> str:
        return " ".join(f"{name}={value:.6g}" for name, value in self.as_row().items())


def total_loss(terms: Mapping[str, object], weights: Optional[LossWeights] = None) -> LossBreakdown:
    """
    Args:
        terms: Scalar per term name (floats or 0-d tensors); missing terms count as 0
        weights: Defaults to LossWeights()

    Returns:
        LossBreakdown; its tensor field carries the differentiable total when
        tensor terms were given
    """
    weights = weights or LossWeights()
    weights.check()
    unknown = set(terms) - set(TERMS)
    if unknown:
        raise InvalidArgumentError(f"unknown loss terms: {sorted(unknown)}")
    for name in TERMS:
        value = float(terms.get(name, 0.0))
        if not math.isfinite(value):
            raise InvalidArgumentError(f"loss term '{name}' is not finite ({value})")
        if value < 0:
            raise InvalidArgumentError(f"loss term '{name}' is negative ({value})")
    return LossBreakdown.from_terms(terms, weights)
