#!/usr/bin/env python3
"""
Tiled differentiable Gaussian rasterizer

Splats are binned into 16x16 pixel tiles after one global sort keyed by
(tile, depth rank); ties in depth are broken by Gaussian index. Tiles are
composited front to back in batches. The compositing step has a hand-written
backward; projection and covariance construction are chained by autograd.
"""

import contextlib
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, Optional, Tuple

import numpy as np
import torch

from ..body_model.skinning import as_tensor
from ..errors import InvalidArgumentError, RendererStateError
from ..gaussian_cloud import GaussianSet
from ..orbit_camera import CameraPose
from .covariance import compute_cov3d, project_gaussians

logger = logging.getLogger(__name__)

TILE = 16
ALPHA_MAX = 0.99
ALPHA_MIN = 1.0 / 255.0
CHUNK_ELEMENTS = 1 << 22  # pixel x splat pairs per tile batch

PRECISIONS = {"fp32": torch.float32, "fp64": torch.float64}
GRADIENT_FIELDS = ("centers", "colors", "opacities", "scales", "rotations")

_LOCAL = torch.arange(TILE * TILE)
_LOCAL_X = _LOCAL % TILE
_LOCAL_Y = _LOCAL // TILE


def resolve_precision(name: str) -> torch.dtype:
    try:
        return PRECISIONS[name]
    except KeyError:
        raise InvalidArgumentError(f"unknown precision '{name}' (choose from {sorted(PRECISIONS)})") from None


@dataclass
class TileBins:
    """Per-tile splat lists in front-to-back order, padded with the dummy index"""
    width: int
    height: int
    tiles_x: int
    tiles_y: int
    index: np.ndarray   # (tiles, max_per_tile) int64
    count: np.ndarray   # (tiles,)
    dummy: int

    @property
    def num_tiles(self) -> int:
        return self.tiles_x * self.tiles_y

    @property
    def max_per_tile(self) -> int:
        return int(self.index.shape[1])


def bin_splats(means: np.ndarray, radii: np.ndarray, depth: np.ndarray, width: int, height: int) -> TileBins:
    """
    Assign splats to every tile their footprint box touches

    Args:
        means: (P, 2) pixel centers
        radii: (P,) footprint radius in pixels
        depth: (P,) camera-space depth used for ordering
        width, height: Image size
    """
    tiles_x = (width + TILE - 1) // TILE
    tiles_y = (height + TILE - 1) // TILE
    num_tiles = tiles_x * tiles_y
    count_splats = len(means)

    x0 = np.clip(np.floor((means[:, 0] - radii) / TILE), 0, tiles_x).astype(np.int64)
    x1 = np.clip(np.floor((means[:, 0] + radii) / TILE) + 1, 0, tiles_x).astype(np.int64)
    y0 = np.clip(np.floor((means[:, 1] - radii) / TILE), 0, tiles_y).astype(np.int64)
    y1 = np.clip(np.floor((means[:, 1] + radii) / TILE) + 1, 0, tiles_y).astype(np.int64)
    nx = np.maximum(x1 - x0, 0)
    ny = np.maximum(y1 - y0, 0)
    touched = nx * ny

    rank = np.empty(count_splats, dtype=np.int64)
    rank[np.lexsort((np.arange(count_splats), depth))] = np.arange(count_splats)

    total = int(touched.sum())
    if total == 0:
        return TileBins(width, height, tiles_x, tiles_y, np.zeros((num_tiles, 0), dtype=np.int64),
                        np.zeros(num_tiles, dtype=np.int64), count_splats)

    splat = np.repeat(np.arange(count_splats), touched)
    starts = np.cumsum(touched) - touched
    within = np.arange(total) - np.repeat(starts, touched)
    tx = x0[splat] + within % nx[splat]
    ty = y0[splat] + within // nx[splat]
    tile = ty * tiles_x + tx

    order = np.argsort(tile * count_splats + rank[splat], kind="stable")
    tile = tile[order]
    splat = splat[order]

    count = np.bincount(tile, minlength=num_tiles)
    first = np.cumsum(count) - count
    slot = np.arange(total) - first[tile]
    index = np.full((num_tiles, int(count.max())), count_splats, dtype=np.int64)
    index[tile, slot] = splat
    return TileBins(width, height, tiles_x, tiles_y, index, count, count_splats)


def _tile_batches(bins: TileBins) -> Iterator[Tuple[np.ndarray, int]]:
    """Group non-empty tiles, in tile order, into batches under CHUNK_ELEMENTS"""
    active = np.flatnonzero(bins.count)
    pixels = TILE * TILE
    start = 0
    while start < len(active):
        end = start
        depth = 0
        while end < len(active):
            candidate = max(depth, int(bins.count[active[end]]))
            if end > start and (end - start + 1) * pixels * candidate > CHUNK_ELEMENTS:
                break
            depth = candidate
            end += 1
        yield active[start:end], depth
        start = end


def _tile_pixels(tiles: np.ndarray, bins: TileBins, dtype: torch.dtype):
    tiles = torch.from_numpy(tiles)
    px = (tiles % bins.tiles_x)[:, None] * TILE + _LOCAL_X[None, :]
    py = (tiles // bins.tiles_x)[:, None] * TILE + _LOCAL_Y[None, :]
    valid = (px < bins.width) & (py < bins.height)
    flat = torch.where(valid, py * bins.width + px, torch.zeros_like(px))
    centers = torch.stack([px, py], dim=-1).to(dtype) + 0.5
    return centers, flat, valid


def _composite(pix, means, conics, colors, opacities, background):
    """
    Front-to-back compositing for a batch of tiles

    pix (B, Q, 2), means (B, K, 2), conics (B, K, 3), colors (B, K, 3), opacities (B, K)
    """
    dx = pix[:, :, None, 0] - means[:, None, :, 0]
    dy = pix[:, :, None, 1] - means[:, None, :, 1]
    a = conics[:, None, :, 0]
    b = conics[:, None, :, 1]
    c = conics[:, None, :, 2]
    power = -0.5 * (a * dx * dx + c * dy * dy) - b * dx * dy
    falloff = torch.exp(power)
    raw = opacities[:, None, :] * falloff
    keep = raw >= ALPHA_MIN
    alpha = torch.where(keep, torch.clamp(raw, max=ALPHA_MAX), torch.zeros_like(raw))

    ones = torch.ones_like(alpha[..., :1])
    trans = torch.cumprod(torch.cat([ones, 1.0 - alpha], dim=-1), dim=-1)
    before = trans[..., :-1]
    final = trans[..., -1]
    weight = alpha * before
    rgb = torch.einsum("bqk,bkc->bqc", weight, colors) + final[..., None] * background
    return {"dx": dx, "dy": dy, "falloff": falloff, "raw": raw, "keep": keep, "alpha": alpha,
            "before": before, "final": final, "weight": weight, "rgb": rgb}


def _padded(tensor: torch.Tensor) -> torch.Tensor:
    return torch.cat([tensor, torch.zeros_like(tensor[:1])], dim=0)


class _CompositeSplats(torch.autograd.Function):
    """Screen-space splats -> (image, alpha) with an analytic backward"""

    @staticmethod
    def forward(ctx, means, conics, colors, opacities, background, bins):
        dtype = means.dtype
        height, width = bins.height, bins.width
        image = background.expand(height * width, 3).clone()
        alpha = torch.zeros(height * width, dtype=dtype)

        table = (_padded(means), _padded(conics), _padded(colors), _padded(opacities))
        for tiles, depth in _tile_batches(bins):
            index = torch.from_numpy(bins.index[tiles, :depth])
            pix, flat, valid = _tile_pixels(tiles, bins, dtype)
            out = _composite(pix, *(t[index] for t in table), background)
            image[flat[valid]] = out["rgb"][valid]
            alpha[flat[valid]] = (1.0 - out["final"])[valid]

        ctx.save_for_backward(means, conics, colors, opacities, background)
        ctx.bins = bins
        return image.reshape(height, width, 3), alpha.reshape(height, width)

    @staticmethod
    def backward(ctx, grad_image, grad_alpha):
        means, conics, colors, opacities, background = ctx.saved_tensors
        bins = ctx.bins
        dtype = means.dtype
        table = (_padded(means), _padded(conics), _padded(colors), _padded(opacities))
        rows = len(means) + 1
        d_means = torch.zeros(rows, 2, dtype=dtype)
        d_conics = torch.zeros(rows, 3, dtype=dtype)
        d_colors = torch.zeros(rows, 3, dtype=dtype)
        d_opacities = torch.zeros(rows, dtype=dtype)
        grad_image = grad_image.reshape(-1, 3)
        grad_alpha = grad_alpha.reshape(-1)

        for tiles, depth in _tile_batches(bins):
            index = torch.from_numpy(bins.index[tiles, :depth])
            pix, flat, valid = _tile_pixels(tiles, bins, dtype)
            m, cn, col, op = (t[index] for t in table)
            out = _composite(pix, m, cn, col, op, background)

            g = grad_image[flat] * valid[..., None]
            ga = grad_alpha[flat] * valid
            weight = out["weight"]
            inv_one_minus = 1.0 / (1.0 - out["alpha"])

            # per-splat color response seen by each pixel's upstream gradient
            gc = torch.einsum("bqc,bkc->bqk", g, col)
            weighted = weight * gc
            behind = torch.flip(torch.cumsum(torch.flip(weighted, [-1]), dim=-1), [-1]) - weighted
            behind = behind + (g * background).sum(-1)[..., None] * out["final"][..., None]

            d_alpha = out["before"] * gc - behind * inv_one_minus
            d_alpha = d_alpha + ga[..., None] * out["final"][..., None] * inv_one_minus
            live = out["keep"] & (out["raw"] < ALPHA_MAX)
            d_raw = torch.where(live, d_alpha, torch.zeros_like(d_alpha))
            d_power = d_raw * out["raw"]

            dx, dy = out["dx"], out["dy"]
            a = cn[:, None, :, 0]
            b = cn[:, None, :, 1]
            c = cn[:, None, :, 2]
            grad_mean = torch.stack([(d_power * (a * dx + b * dy)).sum(1),
                                     (d_power * (b * dx + c * dy)).sum(1)], dim=-1)
            grad_conic = torch.stack([(-0.5 * d_power * dx * dx).sum(1),
                                      (-d_power * dx * dy).sum(1),
                                      (-0.5 * d_power * dy * dy).sum(1)], dim=-1)
            grad_color = torch.einsum("bqk,bqc->bkc", weight, g)
            grad_opacity = (d_raw * out["falloff"]).sum(1)

            flat_index = index.reshape(-1)
            d_means.index_add_(0, flat_index, grad_mean.reshape(-1, 2))
            d_conics.index_add_(0, flat_index, grad_conic.reshape(-1, 3))
            d_colors.index_add_(0, flat_index, grad_color.reshape(-1, 3))
            d_opacities.index_add_(0, flat_index, grad_opacity.reshape(-1))

        return d_means[:-1], d_conics[:-1], d_colors[:-1], d_opacities[:-1], None, None


@dataclass
class RenderOutput:
    image: torch.Tensor                                   # (H, W, 3)
    alpha: torch.Tensor                                   # (H, W)
    gradients: Dict[str, torch.Tensor] = field(default_factory=dict)
    leaves: Optional[Dict[str, torch.Tensor]] = field(default=None, repr=False)

    def image_array(self) -> np.ndarray:
        return self.image.detach().cpu().numpy().astype(np.float64)

    def alpha_array(self) -> np.ndarray:
        return self.alpha.detach().cpu().numpy().astype(np.float64)


def footprint_radius(max_eigenvalue: torch.Tensor, opacities: torch.Tensor) -> torch.Tensor:
    """
    Distance beyond which alpha drops under ALPHA_MIN

    opacity * exp(-d^2 / (2 lambda_max)) >= 1/255 bounds every contributing pixel.
    """
    level = torch.log(torch.clamp(255.0 * opacities, min=1.0))
    return torch.sqrt(2.0 * max_eigenvalue * level)


def _render(gaussians: GaussianSet, pose: CameraPose, background: torch.Tensor):
    height, width = pose.height, pose.width
    if len(gaussians) == 0:
        return background.expand(height, width, 3).clone(), torch.zeros(height, width, dtype=background.dtype)

    cov3d = compute_cov3d(gaussians.scales, gaussians.rotations)
    splats = project_gaussians(pose, gaussians.centers, cov3d)
    conics = splats.conic()
    opacities = gaussians.opacities[:, 0]

    with torch.no_grad():
        radius = footprint_radius(splats.max_eigenvalue(), opacities)
        keep = splats.visible & (opacities >= ALPHA_MIN) & torch.isfinite(radius)
    subset = torch.nonzero(keep).reshape(-1)
    means = splats.mean[subset]
    bins = bin_splats(means.detach().cpu().numpy().astype(np.float64),
                      radius[subset].cpu().numpy().astype(np.float64) + 1.0,
                      splats.depth[subset].detach().cpu().numpy().astype(np.float64),
                      width, height)
    logger.debug("Rasterize: %d/%d splats visible, %d tiles, max %d per tile",
                 len(subset), len(gaussians), bins.num_tiles, bins.max_per_tile)
    return _CompositeSplats.apply(means, conics[subset], gaussians.colors[subset], opacities[subset],
                                  background, bins)


def rasterize(gaussians: GaussianSet, pose: CameraPose, background,
              record_gradients: bool = False) -> RenderOutput:
    """
    Render a GaussianSet for one camera

    Args:
        gaussians: Motion-space Gaussians; their dtype selects the precision
        pose: Camera
        background: RGB in [0, 1]
        record_gradients: Keep detached leaf copies so backward() can return
            per-parameter gradients. Without it the image stays attached to
            whatever graph produced the inputs.
    """
    gaussians.check()
    dtype = gaussians.dtype
    bg = as_tensor(background, dtype).reshape(-1)
    if bg.shape != (3,):
        raise InvalidArgumentError(f"background must be an RGB triple, got {tuple(bg.shape)}")

    leaves = None
    source = gaussians
    guard = contextlib.nullcontext()
    if record_gradients:
        leaves = {name: getattr(gaussians, name).detach().clone().requires_grad_(True) for name in GRADIENT_FIELDS}
        source = GaussianSet(**leaves)
        guard = torch.enable_grad()
    with guard:
        image, alpha = _render(source, pose, bg)
    return RenderOutput(image=image, alpha=alpha, leaves=leaves)


def backward(output: RenderOutput, loss_gradient) -> Dict[str, torch.Tensor]:
    """
    Gradients of sum(loss_gradient * image) for every Gaussian parameter

    Returns:
        Dict keyed by centers, colors, opacities, scales, rotations; also
        stored on output.gradients
    """
    if output.leaves is None:
        raise RendererStateError("backward needs a forward pass recorded with rasterize(..., record_gradients=True)")
    grad = as_tensor(loss_gradient, output.image.dtype)
    if grad.shape != output.image.shape:
        raise InvalidArgumentError(f"loss gradient must be {tuple(output.image.shape)}, got {tuple(grad.shape)}")

    names = list(output.leaves)
    tensors = [output.leaves[name] for name in names]
    if output.image.requires_grad:
        grads = torch.autograd.grad(output.image, tensors, grad, retain_graph=True, allow_unused=True)
    else:
        grads = [None] * len(tensors)
    output.gradients = {name: (torch.zeros_like(t) if g is None else g) for name, g, t in zip(names, grads, tensors)}
    return output.gradients
