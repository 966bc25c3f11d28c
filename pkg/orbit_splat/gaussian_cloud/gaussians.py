#!/usr/bin/env python3
"""
GaussianSet assembly in canonical space and reposing into motion space
"""

from dataclasses import dataclass, fields
from typing import Optional, Sequence

import numpy as np
import torch
from scipy.spatial import cKDTree

from ..body_model.sampling import SurfaceSamples, apply_offsets
from ..body_model.skinning import as_tensor, blend_rotations, quaternion_multiply, skin_lbs
from ..body_model.poses import BodyState
from ..body_model.template import TemplateBody, joint_locations
from ..errors import InvalidArgumentError
from .decoder import DecodedParams

QUAT_TOLERANCE = 1e-6


@dataclass
class GaussianSet:
    """N Gaussians; tensors may carry autograd history"""
    centers: torch.Tensor       # (N, 3)
    colors: torch.Tensor        # (N, 3) in [0, 1]
    opacities: torch.Tensor     # (N, 1) in [0, 1]
    scales: torch.Tensor        # (N, 3) > 0
    rotations: torch.Tensor     # (N, 4) unit (w, x, y, z)

    def __len__(self) -> int:
        return int(self.centers.shape[0])

    @property
    def dtype(self) -> torch.dtype:
        return self.centers.dtype

    def detach(self) -> "GaussianSet":
        return GaussianSet(**{f.name: getattr(self, f.name).detach() for f in fields(self)})

    def to(self, dtype: torch.dtype) -> "GaussianSet":
        return GaussianSet(**{f.name: getattr(self, f.name).to(dtype) for f in fields(self)})

    def check(self) -> None:
        """Raise if any GaussianSet invariant fails"""
        n = len(self)
        shapes = {"centers": 3, "colors": 3, "opacities": 1, "scales": 3, "rotations": 4}
        for name, width in shapes.items():
            value = getattr(self, name)
            if tuple(value.shape) != (n, width):
                raise InvalidArgumentError(f"{name} must be ({n}, {width}), got {tuple(value.shape)}")
            if not torch.isfinite(value).all():
                raise InvalidArgumentError(f"{name} contains non-finite values")
        if n == 0:
            return
        norms = self.rotations.detach().norm(dim=1)
        if (norms - 1.0).abs().max() > QUAT_TOLERANCE:
            raise InvalidArgumentError("rotations must be unit quaternions")
        if (self.scales.detach() <= 0).any():
            raise InvalidArgumentError("scales must be strictly positive")
        for name in ("colors", "opacities"):
            value = getattr(self, name).detach()
            if (value < 0).any() or (value > 1).any():
                raise InvalidArgumentError(f"{name} must lie in [0, 1]")

    @classmethod
    def empty(cls, dtype: torch.dtype = torch.float32) -> "GaussianSet":
        z = lambda w: torch.zeros((0, w), dtype=dtype)
        return cls(z(3), z(3), z(1), z(3), z(4))


def base_scale_from_samples(positions) -> float:
    """Mean nearest-neighbour distance among canonical samples"""
    positions = np.asarray(positions, dtype=np.float64)
    if len(positions) < 2:
        return 0.01
    distances, _ = cKDTree(positions).query(positions, k=2)
    return float(distances[:, 1].mean())


def assemble(samples: SurfaceSamples, decoded: DecodedParams, base_scale: float,
             surface: Optional[torch.Tensor] = None) -> GaussianSet:
    """
    Canonical-space GaussianSet from decoder outputs

    centers = T(beta) samples + offsets, colors = sigmoid, scales = base * exp
    (isotropic), opacity 1, identity rotation.
    """
    n = len(samples)
    if len(decoded) != n:
        raise InvalidArgumentError(f"{len(decoded)} decoded rows for {n} samples")
    if base_scale <= 0:
        raise InvalidArgumentError(f"base scale must be positive, got {base_scale}")

    dtype = decoded.offsets.dtype
    if surface is None:
        surface = torch.as_tensor(samples.positions, dtype=dtype)
    centers = apply_offsets(surface, decoded.offsets)
    colors = torch.sigmoid(decoded.colors)
    scales = (base_scale * torch.exp(decoded.scales)).expand(n, 3)
    opacities = torch.ones((n, 1), dtype=dtype)
    rotations = torch.zeros((n, 4), dtype=dtype)
    rotations[:, 0] = 1.0
    return GaussianSet(centers=centers, colors=colors, opacities=opacities, scales=scales, rotations=rotations)


def repose_with(gaussians: GaussianSet, skin_weights, joints, parents: Sequence[int],
                theta_hat, translation) -> GaussianSet:
    """Repose with an already refined pose and translation (tensors keep gradients)"""
    dtype = gaussians.dtype
    weights = as_tensor(skin_weights, dtype)
    if weights.shape[0] != len(gaussians):
        raise InvalidArgumentError(f"{weights.shape[0]} skin-weight rows for {len(gaussians)} Gaussians")
    centers, joint_rot = skin_lbs(gaussians.centers, weights, as_tensor(joints, dtype), parents,
                                  as_tensor(theta_hat, dtype), as_tensor(translation, dtype),
                                  return_rotations=True)
    blended = blend_rotations(weights, joint_rot)
    rotations = quaternion_multiply(blended, gaussians.rotations)
    rotations = rotations / rotations.norm(dim=1, keepdim=True)
    return GaussianSet(centers=centers, colors=gaussians.colors, opacities=gaussians.opacities,
                       scales=gaussians.scales, rotations=rotations)


def repose(gaussians: GaussianSet, samples: SurfaceSamples, state: BodyState,
           template: TemplateBody) -> GaussianSet:
    """
    Canonical -> motion space with theta + delta_theta and t + delta_t

    Args:
        gaussians: Canonical GaussianSet (one per sample)
        samples: Provide the per-Gaussian skin weights
        state: Frame pose with corrections
        template: Normalized template (skeleton and shape basis)
    """
    if len(samples) != len(gaussians):
        raise InvalidArgumentError(f"{len(samples)} samples for {len(gaussians)} Gaussians")
    state.check(template.num_joints, template.num_shapes)
    joints = joint_locations(template, state.beta)
    return repose_with(gaussians, samples.skin_weights, joints, template.parents,
                       state.theta + state.delta_theta, state.translation + state.delta_translation)
