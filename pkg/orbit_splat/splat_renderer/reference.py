#!/usr/bin/env python3
"""
Brute-force compositing oracle

Evaluates every Gaussian at every pixel in fp64 numpy, with no tiling and no
footprint cutoff. Used by tests and diagnostics/renderer_check.py to pin the
tiled rasterizer.
"""

from typing import Tuple

import numpy as np

from ..gaussian_cloud import GaussianSet
from ..orbit_camera import NEAR_PLANE, CameraPose
from .covariance import LOW_PASS
from .rasterizer import ALPHA_MAX, ALPHA_MIN


def _rotation_matrices(quats: np.ndarray) -> np.ndarray:
    q = quats / np.linalg.norm(quats, axis=1, keepdims=True)
    w, x, y, z = q.T
    return np.stack([
        np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)], axis=-1),
        np.stack([2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)], axis=-1),
        np.stack([2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)], axis=-1),
    ], axis=-2)


def render_reference(gaussians: GaussianSet, pose: CameraPose, background) -> Tuple[np.ndarray, np.ndarray]:
    """
    Returns:
        (image (H, W, 3), alpha (H, W)) as float64 arrays
    """
    g = {name: np.asarray(getattr(gaussians, name).detach().cpu().numpy(), dtype=np.float64)
         for name in ("centers", "colors", "opacities", "scales", "rotations")}
    bg = np.asarray(background, dtype=np.float64).reshape(3)
    height, width = pose.height, pose.width

    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64) + 0.5
    image = np.zeros((height, width, 3))
    trans = np.ones((height, width))

    cam = g["centers"] @ pose.rotation.T + pose.translation
    order = np.lexsort((np.arange(len(cam)), cam[:, 2]))
    f = pose.focal
    cx, cy = pose.center
    rots = _rotation_matrices(g["rotations"]) if len(cam) else np.zeros((0, 3, 3))

    for i in order:
        x, y, z = cam[i]
        if z <= NEAR_PLANE:
            continue
        cov3d = rots[i] @ np.diag(g["scales"][i] ** 2) @ rots[i].T
        jac = np.array([[f / z, 0.0, -f * x / (z * z)],
                        [0.0, f / z, -f * y / (z * z)]])
        t = jac @ pose.rotation
        cov2d = t @ cov3d @ t.T + LOW_PASS * np.eye(2)
        conic = np.linalg.inv(cov2d)
        dx = xs - (f * x / z + cx)
        dy = ys - (f * y / z + cy)
        power = -0.5 * (conic[0, 0] * dx * dx + 2.0 * conic[0, 1] * dx * dy + conic[1, 1] * dy * dy)
        alpha = np.minimum(ALPHA_MAX, g["opacities"][i, 0] * np.exp(power))
        alpha[alpha < ALPHA_MIN] = 0.0
        image += (alpha * trans)[..., None] * g["colors"][i]
        trans *= 1.0 - alpha

    image += trans[..., None] * bg
    return image, 1.0 - trans
