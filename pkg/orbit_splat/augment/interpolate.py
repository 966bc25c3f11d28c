#!/usr/bin/env python3
"""
Flow-based intermediate frame synthesis

For time t the output samples f0 along t * F1->0 and f1 along (1 - t) * F0->1,
then blends the two with weights (1 - t) * c0 and t * c1, c being the
forward/backward consistency. A side whose sample leaves the frame gets zero
weight, so holes are filled from the other side.
"""

from typing import Optional, Tuple

import numpy as np

from ..errors import InvalidArgumentError
from .flow import FlowField, estimate_flow, warp


def interpolate_frame(f0, f1, t: float, flows: Optional[Tuple[FlowField, FlowField]] = None) -> np.ndarray:
    """
    Args:
        f0, f1: (H, W, 3) frames in [0, 1]
        t: Fraction strictly inside (0, 1)
        flows: (forward, backward) from estimate_flow; estimated when omitted

    Returns:
        (H, W, 3) frame in [0, 1]
    """
    if not 0.0 < t < 1.0:
        raise InvalidArgumentError(f"interpolation time must lie in (0, 1), got {t}")
    a = np.asarray(f0, dtype=np.float64)
    b = np.asarray(f1, dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidArgumentError(f"frame sizes differ: {a.shape} vs {b.shape}")
    forward, backward = flows if flows is not None else estimate_flow(a, b)
    if forward.shape != a.shape[:2] or backward.shape != a.shape[:2]:
        raise InvalidArgumentError("flow fields do not match the frame size")

    warped0, inside0 = warp(a, t * backward.u, t * backward.v)
    warped1, inside1 = warp(b, (1.0 - t) * forward.u, (1.0 - t) * forward.v)
    w0 = (1.0 - t) * backward.confidence * inside0
    w1 = t * forward.confidence * inside1

    total = w0 + w1
    share = np.where(total > 0, w1 / np.where(total > 0, total, 1.0), t)
    out = warped0 + share[..., None] * (warped1 - warped0)
    return np.clip(out, 0.0, 1.0)
