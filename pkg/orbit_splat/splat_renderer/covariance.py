#!/usr/bin/env python3
"""
3D covariance construction and EWA projection to screen-space splats
"""

from dataclasses import dataclass
from typing import Optional

import torch

from ..body_model.skinning import as_tensor, quaternion_to_matrix
from ..orbit_camera import NEAR_PLANE, CameraPose

LOW_PASS = 0.3  # px^2 added to every projected covariance


@dataclass
class Splat2D:
    """Screen-space footprint; batched fields carry a leading N axis"""
    mean: torch.Tensor      # (..., 2) pixel (x, y)
    cov2d: torch.Tensor     # (..., 2, 2)
    depth: torch.Tensor     # (...,) camera-space z
    visible: torch.Tensor   # (...,) bool, False marks the culled sentinel

    def conic(self) -> torch.Tensor:
        """Inverse covariance packed as (A, B, C) with inv = [[A, B], [B, C]]"""
        a = self.cov2d[..., 0, 0]
        b = self.cov2d[..., 0, 1]
        c = self.cov2d[..., 1, 1]
        det = a * c - b * b
        return torch.stack([c / det, -b / det, a / det], dim=-1)

    def max_eigenvalue(self) -> torch.Tensor:
        a = self.cov2d[..., 0, 0]
        b = self.cov2d[..., 0, 1]
        c = self.cov2d[..., 1, 1]
        half_trace = 0.5 * (a + c)
        return half_trace + torch.sqrt(torch.clamp(0.25 * (a - c) ** 2 + b * b, min=0.0))


def compute_cov3d(scales, rotations, dtype: Optional[torch.dtype] = None) -> torch.Tensor:
    """
    Sigma = R S S^T R^T

    Args:
        scales: (3,) or (N, 3) positive scales
        rotations: (4,) or (N, 4) unit quaternions (w, x, y, z)

    Returns:
        (3, 3) or (N, 3, 3) symmetric matrices
    """
    if dtype is None:
        dtype = scales.dtype if isinstance(scales, torch.Tensor) else torch.float64
    s = as_tensor(scales, dtype)
    r = quaternion_to_matrix(as_tensor(rotations, dtype))
    m = r * s[..., None, :]
    cov = m @ m.transpose(-1, -2)
    return 0.5 * (cov + cov.transpose(-1, -2))


def project_gaussians(pose: CameraPose, centers, cov3d) -> Splat2D:
    """
    Perspective projection of centers plus first-order covariance propagation

    cov2d = J W cov3d W^T J^T + LOW_PASS * I, with J the pinhole Jacobian at the
    camera-space center and W the world-to-camera rotation. Gaussians at depth
    <= NEAR_PLANE come back with visible=False; their fields are finite but
    meaningless.
    """
    dtype = centers.dtype if isinstance(centers, torch.Tensor) else torch.float64
    x = as_tensor(centers, dtype)
    cov = as_tensor(cov3d, dtype)
    rot = torch.as_tensor(pose.rotation, dtype=dtype)
    trans = torch.as_tensor(pose.translation, dtype=dtype)
    f = pose.focal
    cx, cy = pose.center

    cam = x @ rot.T + trans
    visible = cam[..., 2] > NEAR_PLANE
    z = torch.where(visible, cam[..., 2], torch.ones_like(cam[..., 2]))
    u = f * cam[..., 0] / z + cx
    v = f * cam[..., 1] / z + cy

    zero = torch.zeros_like(z)
    jac = torch.stack([
        torch.stack([f / z, zero, -f * cam[..., 0] / (z * z)], dim=-1),
        torch.stack([zero, f / z, -f * cam[..., 1] / (z * z)], dim=-1),
    ], dim=-2)
    t = jac @ rot
    cov2d = t @ cov @ t.transpose(-1, -2)
    cov2d = 0.5 * (cov2d + cov2d.transpose(-1, -2))
    cov2d = cov2d + LOW_PASS * torch.eye(2, dtype=dtype)
    return Splat2D(mean=torch.stack([u, v], dim=-1), cov2d=cov2d, depth=cam[..., 2], visible=visible)


def project_gaussian(pose: CameraPose, center, cov3d) -> Optional[Splat2D]:
    """Single-Gaussian form; None is the culled sentinel for centers behind the camera"""
    splat = project_gaussians(pose, as_tensor(center).reshape(1, 3), as_tensor(cov3d).reshape(1, 3, 3))
    if not bool(splat.visible[0]):
        return None
    return Splat2D(mean=splat.mean[0], cov2d=splat.cov2d[0], depth=splat.depth[0], visible=splat.visible[0])
