#!/usr/bin/env python3
"""
Surface sampling, UV position maps and canonical offsets

Each sample owns exactly one UV pixel. Collisions found at sampling time are
resolved by re-drawing the losing samples (rejection jitter), so Gaussians and
valid UV pixels are in bijection.
"""

import logging
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
import torch

from ..errors import InvalidArgumentError, UVCollisionError
from .template import TemplateBody

logger = logging.getLogger(__name__)

MAX_JITTER_ROUNDS = 200


@dataclass(frozen=True)
class SurfaceSamples:
    """Area-weighted points on the template surface"""
    positions: np.ndarray       # (N, 3) canonical positions
    uv: np.ndarray              # (N, 2)
    skin_weights: np.ndarray    # (N, J)
    face_ids: np.ndarray        # (N,)
    barycentric: np.ndarray     # (N, 3)

    def __len__(self) -> int:
        return len(self.positions)

    def positions_on(self, template: TemplateBody) -> np.ndarray:
        """Re-evaluate the sample positions on another shape of the same mesh"""
        corners = template.vertices[template.faces[self.face_ids]]
        return np.einsum("nk,nkd->nd", self.barycentric, corners)


@dataclass(frozen=True)
class UVPositionMap:
    """H_uv x W_uv map of surface positions; invalid pixels hold zero"""
    resolution: Tuple[int, int]
    positions: np.ndarray       # (H, W, 3)
    valid: np.ndarray           # (H, W) bool
    pixel_index: np.ndarray     # (N,) flat pixel of each sample, sample order

    @property
    def valid_count(self) -> int:
        return int(self.valid.sum())


def _resolution(resolution) -> Tuple[int, int]:
    if isinstance(resolution, int):
        resolution = (resolution, resolution)
    height, width = (int(v) for v in resolution)
    if height <= 0 or width <= 0:
        raise InvalidArgumentError(f"UV resolution must be positive, got {resolution}")
    return height, width


def quantize_uv(uv: np.ndarray, resolution) -> np.ndarray:
    """uv in [0,1]^2 -> flat pixel index (row from v, column from u)"""
    height, width = _resolution(resolution)
    cols = np.clip(np.floor(uv[:, 0] * width).astype(np.int64), 0, width - 1)
    rows = np.clip(np.floor(uv[:, 1] * height).astype(np.int64), 0, height - 1)
    return rows * width + cols


def _draw(rng: np.random.Generator, cdf: np.ndarray, count: int, stratified: bool):
    if stratified:
        u = (np.arange(count) + rng.random(count)) / count
    else:
        u = rng.random(count)
    faces = np.minimum(np.searchsorted(cdf, u, side="right"), len(cdf) - 1)
    r1, r2 = rng.random(count), rng.random(count)
    s = np.sqrt(r1)
    bary = np.stack([1.0 - s, s * (1.0 - r2), s * r2], axis=1)
    return faces, bary


def sample_surface(template: TemplateBody, count: int, seed: int,
                   resolution: Union[int, Tuple[int, int]] = 128) -> SurfaceSamples:
    """
    Area-weighted stratified surface samples with one UV pixel each

    Args:
        template: Shaped template T(beta)
        count: Number of samples N
        seed: Generator seed; identical seeds give bitwise-identical samples
        resolution: UV map resolution used to reject colliding samples

    Returns:
        SurfaceSamples with interpolated skin weights and uv
    """
    if count < 1:
        raise InvalidArgumentError(f"sample count must be >= 1, got {count}")
    height, width = _resolution(resolution)
    if count > height * width:
        raise InvalidArgumentError(f"{count} samples cannot fit a {height}x{width} UV map")

    corners = template.vertices[template.faces]
    areas = 0.5 * np.linalg.norm(np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0]), axis=1)
    total = areas.sum()
    if not total > 0:
        raise InvalidArgumentError("template mesh is degenerate (zero total area)")
    cdf = np.cumsum(areas) / total

    rng = np.random.default_rng(seed)
    faces, bary = _draw(rng, cdf, count, stratified=True)
    uv_corners = template.uv_coords[template.faces]

    for round_no in range(MAX_JITTER_ROUNDS + 1):
        uv = np.einsum("nk,nkd->nd", bary, uv_corners[faces])
        pixels = quantize_uv(uv, (height, width))
        _, first = np.unique(pixels, return_index=True)
        keep = np.zeros(count, dtype=bool)
        keep[first] = True
        losers = np.flatnonzero(~keep)
        if len(losers) == 0:
            break
        if round_no == MAX_JITTER_ROUNDS:
            raise UVCollisionError(
                f"{len(losers)} samples still collide after {MAX_JITTER_ROUNDS} jitter rounds; "
                f"increase the UV resolution")
        new_faces, new_bary = _draw(rng, cdf, len(losers), stratified=False)
        faces[losers] = new_faces
        bary[losers] = new_bary
    if round_no:
        logger.debug("UV collisions resolved after %d jitter rounds", round_no)

    tri = template.faces[faces]
    positions = np.einsum("nk,nkd->nd", bary, template.vertices[tri])
    weights = np.einsum("nk,nkj->nj", bary, template.skin_weights[tri])
    return SurfaceSamples(positions=positions, uv=uv, skin_weights=weights,
                          face_ids=faces, barycentric=bary)


def uv_position_map(samples: SurfaceSamples, posed_positions,
                    resolution: Union[int, Tuple[int, int]]) -> UVPositionMap:
    """
    Scatter per-sample positions onto the UV grid

    Args:
        samples: Surface samples providing the uv of each point
        posed_positions: (N, 3) positions to store (canonical pose in training)
        resolution: (H_uv, W_uv)

    Returns:
        UVPositionMap whose valid pixels are exactly the sample pixels
    """
    height, width = _resolution(resolution)
    if isinstance(posed_positions, torch.Tensor):
        posed_positions = posed_positions.detach().cpu().numpy()
    positions = np.asarray(posed_positions, dtype=np.float64)
    if positions.shape != (len(samples), 3):
        raise InvalidArgumentError(f"expected ({len(samples)}, 3) positions, got {positions.shape}")

    pixels = quantize_uv(samples.uv, (height, width))
    if len(np.unique(pixels)) != len(pixels):
        raise UVCollisionError("two samples quantize to the same UV pixel")

    flat = np.zeros((height * width, 3))
    valid = np.zeros(height * width, dtype=bool)
    flat[pixels] = positions
    valid[pixels] = True
    return UVPositionMap(
        resolution=(height, width),
        positions=flat.reshape(height, width, 3),
        valid=valid.reshape(height, width),
        pixel_index=pixels,
    )


def apply_offsets(template_surface, offsets):
    """Canonical Gaussian centers D = T(beta) + dT"""
    if tuple(template_surface.shape) != tuple(offsets.shape):
        raise InvalidArgumentError(
            f"surface {tuple(template_surface.shape)} and offsets {tuple(offsets.shape)} differ in shape")
    return template_surface + offsets
