#!/usr/bin/env python3
"""
Linear Blend Skinning on torch tensors

Every function is differentiable so pose corrections receive gradients
through the renderer. Per-joint skinning transforms are composed as
A_j = A_parent(j) o L_j, where L_j rotates about the rest joint J_j.
"""

from typing import Optional, Sequence, Tuple

import torch

from ..errors import InvalidArgumentError
from .template import kinematic_order


def as_tensor(value, dtype: torch.dtype = torch.float64) -> torch.Tensor:
    if isinstance(value, torch.Tensor):
        return value if value.dtype == dtype else value.to(dtype)
    return torch.as_tensor(value, dtype=dtype)


def skew(v: torch.Tensor) -> torch.Tensor:
    """(..., 3) -> (..., 3, 3) cross-product matrices"""
    zero = torch.zeros_like(v[..., 0])
    x, y, z = v[..., 0], v[..., 1], v[..., 2]
    return torch.stack([
        torch.stack([zero, -z, y], dim=-1),
        torch.stack([z, zero, -x], dim=-1),
        torch.stack([-y, x, zero], dim=-1),
    ], dim=-2)


def axis_angle_to_matrix(axis_angle: torch.Tensor) -> torch.Tensor:
    """Exponential map; exact identity at zero and smooth there"""
    return torch.linalg.matrix_exp(skew(axis_angle))


def matrix_to_quaternion(matrix: torch.Tensor) -> torch.Tensor:
    """(..., 3, 3) rotations -> (..., 4) unit quaternions (w, x, y, z), w >= 0"""
    m = matrix
    m00, m11, m22 = m[..., 0, 0], m[..., 1, 1], m[..., 2, 2]
    q_abs_sq = torch.stack([
        1.0 + m00 + m11 + m22,
        1.0 + m00 - m11 - m22,
        1.0 - m00 + m11 - m22,
        1.0 - m00 - m11 + m22,
    ], dim=-1)
    positive = q_abs_sq > 0
    q_abs = torch.where(positive, torch.sqrt(torch.where(positive, q_abs_sq, torch.ones_like(q_abs_sq))),
                        torch.zeros_like(q_abs_sq))

    m21_12 = m[..., 2, 1] - m[..., 1, 2]
    m02_20 = m[..., 0, 2] - m[..., 2, 0]
    m10_01 = m[..., 1, 0] - m[..., 0, 1]
    m10p01 = m[..., 1, 0] + m[..., 0, 1]
    m02p20 = m[..., 0, 2] + m[..., 2, 0]
    m12p21 = m[..., 1, 2] + m[..., 2, 1]
    candidates = torch.stack([
        torch.stack([q_abs[..., 0] ** 2, m21_12, m02_20, m10_01], dim=-1),
        torch.stack([m21_12, q_abs[..., 1] ** 2, m10p01, m02p20], dim=-1),
        torch.stack([m02_20, m10p01, q_abs[..., 2] ** 2, m12p21], dim=-1),
        torch.stack([m10_01, m02p20, m12p21, q_abs[..., 3] ** 2], dim=-1),
    ], dim=-2)
    floor = torch.tensor(0.1, dtype=q_abs.dtype)
    candidates = candidates / (2.0 * torch.maximum(q_abs[..., None], floor))

    best = q_abs.argmax(dim=-1)
    index = best[..., None, None].expand(*best.shape, 1, 4)
    quat = torch.gather(candidates, -2, index).squeeze(-2)
    quat = quat / quat.norm(dim=-1, keepdim=True)
    return torch.where(quat[..., :1] < 0, -quat, quat)


def quaternion_multiply(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Hamilton product a * b for (..., 4) quaternions (w, x, y, z)"""
    aw, ax, ay, az = a.unbind(-1)
    bw, bx, by, bz = b.unbind(-1)
    return torch.stack([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ], dim=-1)


def quaternion_to_matrix(quat: torch.Tensor) -> torch.Tensor:
    """(..., 4) quaternions (normalized here) -> (..., 3, 3)"""
    q = quat / quat.norm(dim=-1, keepdim=True)
    w, x, y, z = q.unbind(-1)
    return torch.stack([
        torch.stack([1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)], dim=-1),
        torch.stack([2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)], dim=-1),
        torch.stack([2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)], dim=-1),
    ], dim=-2)


def joint_transforms(joints: torch.Tensor, parents: Sequence[int],
                     rotations: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
    """
    Compose per-joint skinning transforms along the kinematic tree

    Args:
        joints: (J, 3) rest joint positions
        parents: (J,) parent indices, -1 for root
        rotations: (J, 3, 3) local joint rotations

    Returns:
        (R, t): (J, 3, 3) and (J, 3) so that a rest point p bound to joint j
        moves to R[j] @ p + t[j]
    """
    count = joints.shape[0]
    if rotations.shape != (count, 3, 3):
        raise InvalidArgumentError(f"expected {count} joint rotations, got shape {tuple(rotations.shape)}")
    if len(parents) != count:
        raise InvalidArgumentError(f"parents has {len(parents)} entries for {count} joints")

    world_r = [None] * count
    world_t = [None] * count
    for j in kinematic_order(parents):
        local_r = rotations[j]
        local_t = joints[j] - local_r @ joints[j]
        parent = int(parents[j])
        if parent < 0:
            world_r[j] = local_r
            world_t[j] = local_t
        else:
            world_r[j] = world_r[parent] @ local_r
            world_t[j] = world_r[parent] @ local_t + world_t[parent]
    return torch.stack(world_r), torch.stack(world_t)


def skin_lbs(points, weights, joints, parents: Sequence[int], theta_hat, translation,
             return_rotations: bool = False):
    """
    Pose canonical points with Linear Blend Skinning

    Args:
        points: (N, 3) canonical points
        weights: (N, J) skin weights
        joints: (J, 3) rest joints J(beta)
        parents: (J,) parent indices
        theta_hat: (J, 3) axis-angle pose (already refined)
        translation: (3,) global offset
        return_rotations: Also return per-joint skinning rotations (J, 3, 3)

    Returns:
        (N, 3) posed points, optionally with the joint rotations
    """
    dtype = points.dtype if isinstance(points, torch.Tensor) and points.is_floating_point() else torch.float64
    points = as_tensor(points, dtype)
    weights = as_tensor(weights, dtype)
    joints = as_tensor(joints, dtype)
    theta_hat = as_tensor(theta_hat, dtype)
    translation = as_tensor(translation, dtype).reshape(-1)

    count = joints.shape[0]
    if points.ndim != 2 or points.shape[1] != 3:
        raise InvalidArgumentError(f"points must be (N, 3), got {tuple(points.shape)}")
    if weights.shape != (points.shape[0], count):
        raise InvalidArgumentError(f"weights must be ({points.shape[0]}, {count}), got {tuple(weights.shape)}")
    if theta_hat.shape != (count, 3):
        raise InvalidArgumentError(f"theta must be ({count}, 3), got {tuple(theta_hat.shape)}")
    if translation.shape != (3,):
        raise InvalidArgumentError("translation must be a 3-vector")

    rot, trans = joint_transforms(joints, parents, axis_angle_to_matrix(theta_hat))
    # Blend displacements rather than matrices so an identity pose is exact
    eye = torch.eye(3, dtype=dtype)
    blended = (weights @ (rot - eye).reshape(count, 9)).reshape(-1, 3, 3)
    offset = weights @ trans
    posed = points + torch.einsum("nab,nb->na", blended, points) + offset + translation
    if return_rotations:
        return posed, rot
    return posed


def blend_rotations(weights: torch.Tensor, rotations: torch.Tensor) -> torch.Tensor:
    """Weight-blended joint rotation per point as a renormalized quaternion (N, 4)"""
    joint_quats = matrix_to_quaternion(rotations)
    blended = weights @ joint_quats
    return blended / blended.norm(dim=-1, keepdim=True).clamp_min(1e-12)
