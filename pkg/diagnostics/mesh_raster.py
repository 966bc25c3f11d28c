#!/usr/bin/env python3
"""
Z-buffer triangle rasterizer with per-vertex colors

Produces ground-truth frames for the synthetic scene that do not come from
the splat renderer. Pixel centers sit at (i + 0.5, j + 0.5); depth and color
are interpolated perspective-correctly.
"""

import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from orbit_splat.orbit_camera import CameraPose, project


def rasterize_mesh(vertices, faces, colors, pose: CameraPose, background=(1.0, 1.0, 1.0),
                   supersample: int = 2) -> np.ndarray:
    """
    Args:
        vertices: (V, 3) world positions
        faces: (F, 3) vertex indices
        colors: (V, 3) RGB in [0, 1]
        pose: Camera
        background: RGB behind the mesh
        supersample: Samples per pixel along each axis, box-filtered down

    Returns:
        (H, W, 3) float64 image
    """
    vertices = np.asarray(vertices, dtype=np.float64)
    faces = np.asarray(faces, dtype=np.int64)
    colors = np.asarray(colors, dtype=np.float64)
    s = int(supersample)
    width, height = pose.width * s, pose.height * s

    pixels, depth = project(pose, vertices)
    pixels = pixels * s
    zbuf = np.full((height, width), np.inf)
    image = np.empty((height, width, 3))
    image[:] = np.asarray(background, dtype=np.float64)

    for tri in faces:
        p = pixels[tri]
        if np.isnan(p).any():
            continue
        (x0, y0), (x1, y1), (x2, y2) = p
        area = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
        if abs(area) < 1e-12:
            continue
        xmin = max(int(np.floor(p[:, 0].min())), 0)
        xmax = min(int(np.ceil(p[:, 0].max())), width - 1)
        ymin = max(int(np.floor(p[:, 1].min())), 0)
        ymax = min(int(np.ceil(p[:, 1].max())), height - 1)
        if xmin > xmax or ymin > ymax:
            continue

        xs, ys = np.meshgrid(np.arange(xmin, xmax + 1) + 0.5, np.arange(ymin, ymax + 1) + 0.5)
        w0 = ((x1 - xs) * (y2 - ys) - (x2 - xs) * (y1 - ys)) / area
        w1 = ((x2 - xs) * (y0 - ys) - (x0 - xs) * (y2 - ys)) / area
        w2 = 1.0 - w0 - w1
        inside = (w0 >= 0) & (w1 >= 0) & (w2 >= 0)
        if not inside.any():
            continue

        inv_z = 1.0 / depth[tri]
        inv = w0 * inv_z[0] + w1 * inv_z[1] + w2 * inv_z[2]
        z = 1.0 / inv
        region = zbuf[ymin:ymax + 1, xmin:xmax + 1]
        closer = inside & (z < region)
        if not closer.any():
            continue
        c = colors[tri]
        weights = np.stack([w0 * inv_z[0], w1 * inv_z[1], w2 * inv_z[2]], axis=-1) * z[..., None]
        shaded = weights @ c
        region[closer] = z[closer]
        image[ymin:ymax + 1, xmin:xmax + 1][closer] = shaded[closer]

    if s > 1:
        image = image.reshape(pose.height, s, pose.width, s, 3).mean(axis=(1, 3))
    return np.clip(image, 0.0, 1.0)
