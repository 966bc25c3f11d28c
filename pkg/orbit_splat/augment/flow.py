#!/usr/bin/env python3
"""
Pyramidal Horn-Schunck optical flow with warping

Each pyramid level runs `iterations` warps; after each warp the linearized
brightness-constancy equation is relaxed with `inner_sweeps` Horn-Schunck
Jacobi sweeps on the total flow. Flow (u, v) maps a pixel of the first frame
to its position in the second: f1(x + u, y + v) ~ f0(x, y).
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import ndimage

from ..errors import InvalidArgumentError

logger = logging.getLogger(__name__)

PYRAMID_LEVELS = 4
ITERATIONS = 10
INNER_SWEEPS = 5
SMOOTHNESS = 0.1
MIN_LEVEL_SIZE = 16
CONSISTENCY_SCALE = 1.0  # px

_AVERAGE = np.array([[1.0, 2.0, 1.0], [2.0, 0.0, 2.0], [1.0, 2.0, 1.0]]) / 12.0
_DERIVATIVE = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_LUMA = np.array([0.299, 0.587, 0.114])


@dataclass
class FlowField:
    u: np.ndarray           # (H, W) horizontal displacement, pixels
    v: np.ndarray           # (H, W) vertical displacement, pixels
    confidence: np.ndarray  # (H, W) in [0, 1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.u.shape

    def scaled(self, factor: float) -> "FlowField":
        return FlowField(self.u * factor, self.v * factor, self.confidence)


def to_gray(frame) -> np.ndarray:
    data = np.asarray(frame, dtype=np.float64)
    if data.ndim == 2:
        return data
    return data[..., :3] @ _LUMA


def resample(plane: np.ndarray, shape: Tuple[int, int]) -> np.ndarray:
    """Bilinear resize of a 2D array to shape, pixel-center aligned"""
    rows = (np.arange(shape[0]) + 0.5) * plane.shape[0] / shape[0] - 0.5
    cols = (np.arange(shape[1]) + 0.5) * plane.shape[1] / shape[1] - 0.5
    grid = np.meshgrid(rows, cols, indexing="ij")
    return ndimage.map_coordinates(plane, grid, order=1, mode="nearest")


def sample_at(plane: np.ndarray, u: np.ndarray, v: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    plane(y + v, x + u) with bilinear interpolation

    Returns:
        (values, inside) where inside marks samples that stayed in the frame
    """
    height, width = plane.shape
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    rows = ys + v
    cols = xs + u
    inside = (rows >= 0) & (rows <= height - 1) & (cols >= 0) & (cols <= width - 1)
    return ndimage.map_coordinates(plane, [rows, cols], order=1, mode="nearest"), inside


def warp(frame, u: np.ndarray, v: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Backward-warp every channel of frame by (u, v)"""
    data = np.asarray(frame, dtype=np.float64)
    if data.ndim == 2:
        return sample_at(data, u, v)
    planes = []
    inside = None
    for c in range(data.shape[2]):
        plane, inside = sample_at(data[:, :, c], u, v)
        planes.append(plane)
    return np.stack(planes, axis=-1), inside


def build_pyramid(image: np.ndarray, levels: int) -> list:
    """Finest first; stops before a level would drop under MIN_LEVEL_SIZE"""
    pyramid = [image]
    while len(pyramid) < levels:
        top = pyramid[-1]
        shape = (top.shape[0] // 2, top.shape[1] // 2)
        if min(shape) < MIN_LEVEL_SIZE:
            break
        pyramid.append(resample(ndimage.gaussian_filter(top, 1.0, mode="nearest"), shape))
    return pyramid


def _gradients(image: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    gx = ndimage.correlate1d(image, _DERIVATIVE, axis=1, mode="nearest")
    gy = ndimage.correlate1d(image, _DERIVATIVE, axis=0, mode="nearest")
    return gx, gy


def _refine_level(i0: np.ndarray, i1: np.ndarray, u: np.ndarray, v: np.ndarray,
                  iterations: int, inner_sweeps: int, smoothness: float):
    alpha_sq = smoothness * smoothness
    gx0, gy0 = _gradients(i0)
    for _ in range(iterations):
        warped, _ = sample_at(i1, u, v)
        gx1, gy1 = _gradients(warped)
        ix = 0.5 * (gx0 + gx1)
        iy = 0.5 * (gy0 + gy1)
        it = warped - i0
        denom = alpha_sq + ix * ix + iy * iy
        u0, v0 = u, v
        for _ in range(inner_sweeps):
            u_bar = ndimage.correlate(u, _AVERAGE, mode="nearest")
            v_bar = ndimage.correlate(v, _AVERAGE, mode="nearest")
            residual = (it + ix * (u_bar - u0) + iy * (v_bar - v0)) / denom
            u = u_bar - ix * residual
            v = v_bar - iy * residual
    return u, v


def _one_way(i0: np.ndarray, i1: np.ndarray, levels: int, iterations: int,
             inner_sweeps: int, smoothness: float) -> Tuple[np.ndarray, np.ndarray]:
    p0 = build_pyramid(i0, levels)
    p1 = build_pyramid(i1, levels)
    u = np.zeros_like(p0[-1])
    v = np.zeros_like(p0[-1])
    for level in range(len(p0) - 1, -1, -1):
        shape = p0[level].shape
        if u.shape != shape:
            sy = shape[0] / u.shape[0]
            sx = shape[1] / u.shape[1]
            u = resample(u, shape) * sx
            v = resample(v, shape) * sy
        u, v = _refine_level(p0[level], p1[level], u, v, iterations, inner_sweeps, smoothness)
    return u, v


def consistency(forward_u, forward_v, backward_u, backward_v) -> np.ndarray:
    """exp(-|F01(x) + F10(x + F01(x))|^2 / 2s^2), zero where x + F01(x) leaves the frame"""
    bu, inside = sample_at(backward_u, forward_u, forward_v)
    bv, _ = sample_at(backward_v, forward_u, forward_v)
    error = (forward_u + bu) ** 2 + (forward_v + bv) ** 2
    return np.exp(-error / (2.0 * CONSISTENCY_SCALE ** 2)) * inside


def estimate_flow(f0, f1, levels: int = PYRAMID_LEVELS, iterations: int = ITERATIONS,
                  smoothness: float = SMOOTHNESS, inner_sweeps: int = INNER_SWEEPS) -> Tuple[FlowField, FlowField]:
    """
    Bidirectional flow between two frames

    Returns:
        (forward F0->1, backward F1->0), each with forward/backward
        consistency as its confidence
    """
    g0 = to_gray(f0)
    g1 = to_gray(f1)
    if g0.shape != g1.shape:
        raise InvalidArgumentError(f"frame sizes differ: {g0.shape} vs {g1.shape}")
    if levels < 1 or iterations < 1 or inner_sweeps < 1:
        raise InvalidArgumentError("flow levels, iterations and sweeps must be positive")
    if smoothness <= 0:
        raise InvalidArgumentError(f"smoothness weight must be positive, got {smoothness}")

    g0 = ndimage.gaussian_filter(g0, 0.5, mode="nearest")
    g1 = ndimage.gaussian_filter(g1, 0.5, mode="nearest")
    fu, fv = _one_way(g0, g1, levels, iterations, inner_sweeps, smoothness)
    bu, bv = _one_way(g1, g0, levels, iterations, inner_sweeps, smoothness)
    forward = FlowField(fu, fv, consistency(fu, fv, bu, bv))
    backward = FlowField(bu, bv, consistency(bu, bv, fu, fv))
    logger.debug("Flow: median forward (%.3f, %.3f) px", float(np.median(fu)), float(np.median(fv)))
    return forward, backward
