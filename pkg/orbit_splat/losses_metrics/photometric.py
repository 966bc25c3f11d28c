#!/usr/bin/env python3
"""
Photometric terms and metrics: L1, SSIM, PSNR

Images are (H, W, 3) in [0, 1], numpy or torch. The *_torch variants keep
autograd history for training; the plain variants return Python floats
computed at fp64.
"""

import math

import torch
import torch.nn.functional as F

from ..body_model.skinning import as_tensor
from ..errors import InvalidArgumentError

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2
PSNR_CAP = 100.0
PSNR_MIN_MSE = 1e-10


def image_pair(x, y, dtype=None):
    if dtype is None:
        dtype = x.dtype if isinstance(x, torch.Tensor) and x.is_floating_point() else torch.float64
    x = as_tensor(x, dtype)
    y = as_tensor(y, dtype)
    if x.shape != y.shape:
        raise InvalidArgumentError(f"image shapes differ: {tuple(x.shape)} vs {tuple(y.shape)}")
    if x.dim() != 3:
        raise InvalidArgumentError(f"expected (H, W, C) images, got shape {tuple(x.shape)}")
    return x, y


def l1_rgb_torch(x, y) -> torch.Tensor:
    x, y = image_pair(x, y)
    return (x - y).abs().mean()


def l1_rgb(x, y) -> float:
    x, y = image_pair(x, y, torch.float64)
    return float(l1_rgb_torch(x, y))


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA, dtype=torch.float64) -> torch.Tensor:
    """Normalized (size, size) Gaussian kernel"""
    coords = torch.arange(size, dtype=torch.float64) - (size - 1) / 2.0
    g = torch.exp(-(coords ** 2) / (2.0 * sigma ** 2))
    g = g / g.sum()
    return torch.outer(g, g).to(dtype)


def ssim_map(x, y) -> torch.Tensor:
    """
    Local SSIM index over every fully contained window

    Returns:
        (C, H - 10, W - 10) map for the default window
    """
    x, y = image_pair(x, y)
    height, width, channels = x.shape
    if height < SSIM_WINDOW or width < SSIM_WINDOW:
        raise InvalidArgumentError(f"SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {height}x{width}")

    kernel = gaussian_window(dtype=x.dtype).expand(channels, 1, SSIM_WINDOW, SSIM_WINDOW)
    a = x.permute(2, 0, 1)[None]
    b = y.permute(2, 0, 1)[None]
    blur = lambda t: F.conv2d(t, kernel, groups=channels)[0]

    mu_x = blur(a)
    mu_y = blur(b)
    var_x = blur(a * a) - mu_x * mu_x
    var_y = blur(b * b) - mu_y * mu_y
    cov = blur(a * b) - mu_x * mu_y
    numerator = (2.0 * mu_x * mu_y + SSIM_C1) * (2.0 * cov + SSIM_C2)
    denominator = (mu_x * mu_x + mu_y * mu_y + SSIM_C1) * (var_x + var_y + SSIM_C2)
    return numerator / denominator


def ssim_torch(x, y) -> torch.Tensor:
    return ssim_map(x, y).mean(dim=(1, 2)).mean()


def ssim(x, y) -> float:
    x, y = image_pair(x, y, torch.float64)
    return float(ssim_torch(x, y))


def ssim_loss_torch(x, y) -> torch.Tensor:
    return torch.clamp(1.0 - ssim_torch(x, y), min=0.0)


def ssim_loss(x, y) -> float:
    return max(0.0, 1.0 - ssim(x, y))


def mse(x, y) -> float:
    x, y = image_pair(x, y, torch.float64)
    return float(((x - y) ** 2).mean())


def psnr_from_mse(value: float) -> float:
    if value < PSNR_MIN_MSE:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(1.0 / value))


def psnr(x, y) -> float:
    """Decibels for unit dynamic range, capped at PSNR_CAP"""
    return psnr_from_mse(mse(x, y))
