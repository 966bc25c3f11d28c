#!/usr/bin/env python3
"""
Procedural 24-joint test figure built from open cylinders

Joint layout and parent table mirror the SMPL skeleton so converted SMPL
assets and this figure are interchangeable. Each body segment is an open
cylinder driven by its start joint; weights blend into the parent joint near
the segment start and into the child joint near its end. Every segment owns a
horizontal uv band whose height is proportional to its surface area, so uv
density is uniform across the atlas.
"""

import math
from typing import Callable, Dict, List, Tuple

import numpy as np

from .template import TemplateBody

JOINT_NAMES = [
    "pelvis", "left_hip", "right_hip", "spine1", "left_knee", "right_knee",
    "spine2", "left_ankle", "right_ankle", "spine3", "left_foot", "right_foot",
    "neck", "left_collar", "right_collar", "head", "left_shoulder", "right_shoulder",
    "left_elbow", "right_elbow", "left_wrist", "right_wrist", "left_hand", "right_hand",
]

PARENTS = [-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21]

# Rest pose in meters, T-pose, y-up, facing +z; the figure's left is +x
REST_JOINTS = np.array([
    [0.00, 0.95, 0.00], [0.09, 0.87, 0.00], [-0.09, 0.87, 0.00], [0.00, 1.07, 0.00],
    [0.10, 0.50, 0.01], [-0.10, 0.50, 0.01], [0.00, 1.20, 0.00], [0.10, 0.10, 0.00],
    [-0.10, 0.10, 0.00], [0.00, 1.32, 0.00], [0.10, 0.03, 0.12], [-0.10, 0.03, 0.12],
    [0.00, 1.50, 0.00], [0.07, 1.42, 0.00], [-0.07, 1.42, 0.00], [0.00, 1.62, 0.02],
    [0.18, 1.43, 0.00], [-0.18, 1.43, 0.00], [0.45, 1.43, 0.00], [-0.45, 1.43, 0.00],
    [0.70, 1.43, 0.00], [-0.70, 1.43, 0.00], [0.80, 1.43, 0.00], [-0.80, 1.43, 0.00],
])

HEAD_TOP = np.array([0.00, 1.84, 0.02])

# (driving joint, end joint or None for HEAD_TOP, radius)
SEGMENTS: List[Tuple[int, object, float]] = [
    (0, 3, 0.15), (3, 6, 0.15), (6, 9, 0.16), (9, 12, 0.13),
    (12, 15, 0.06), (15, None, 0.10),
    (1, 4, 0.075), (4, 7, 0.055), (7, 10, 0.045),
    (2, 5, 0.075), (5, 8, 0.055), (8, 11, 0.045),
    (13, 16, 0.055), (16, 18, 0.05), (18, 20, 0.04), (20, 22, 0.035),
    (14, 17, 0.055), (17, 19, 0.05), (19, 21, 0.04), (21, 23, 0.035),
]

HEIGHT_SCALE = 0.05
GIRTH_SCALE = 0.02


def _frame(axis: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Two unit vectors orthogonal to axis"""
    helper = np.array([0.0, 0.0, 1.0]) if abs(axis[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = np.cross(axis, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(axis, e1)
    return e1, e2


def build_capsule_person(rings: int = 7, around: int = 12) -> TemplateBody:
    """
    Build the procedural figure

    Args:
        rings: Vertex rings per segment (>= 2)
        around: Quads around each cylinder

    Returns:
        Un-normalized TemplateBody with a 2-component shape basis
        (0: height, 1: girth)
    """
    n_joints = len(PARENTS)
    children = {j: [c for c, p in enumerate(PARENTS) if p == j] for j in range(n_joints)}

    areas = []
    for joint, end, radius in SEGMENTS:
        end_pos = HEAD_TOP if end is None else REST_JOINTS[end]
        areas.append(2.0 * math.pi * radius * np.linalg.norm(end_pos - REST_JOINTS[joint]))
    bands = np.concatenate([[0.0], np.cumsum(areas) / np.sum(areas)])

    vertices, faces, weights, uvs, radial = [], [], [], [], []
    for seg, (joint, end, radius) in enumerate(SEGMENTS):
        start_pos = REST_JOINTS[joint]
        end_pos = HEAD_TOP if end is None else REST_JOINTS[end]
        axis = end_pos - start_pos
        axis /= np.linalg.norm(axis)
        e1, e2 = _frame(axis)
        parent = PARENTS[joint]
        child = end if end is not None and end in children[joint] else None
        base = len(vertices)

        for r in range(rings):
            t = r / (rings - 1)
            center = start_pos + t * (end_pos - start_pos)
            w_start = max(0.0, 0.5 - 2.0 * t) if parent >= 0 else 0.0
            w_end = max(0.0, 2.0 * t - 1.5) if child is not None else 0.0
            row = np.zeros(n_joints)
            row[joint] = 1.0 - w_start - w_end
            if w_start > 0:
                row[parent] += w_start
            if w_end > 0:
                row[child] += w_end
            for a in range(around + 1):
                phi = 2.0 * math.pi * a / around
                direction = math.cos(phi) * e1 + math.sin(phi) * e2
                vertices.append(center + radius * direction)
                radial.append(direction)
                weights.append(row)
                v = bands[seg] + t * (bands[seg + 1] - bands[seg])
                uvs.append([a / around, min(max(v, 0.0), 1.0)])

        stride = around + 1
        for r in range(rings - 1):
            for a in range(around):
                i0 = base + r * stride + a
                i1 = i0 + 1
                i2 = i0 + stride
                i3 = i2 + 1
                faces.append([i0, i2, i1])
                faces.append([i1, i2, i3])

    vertices = np.asarray(vertices)
    radial = np.asarray(radial)
    pelvis_height = REST_JOINTS[0, 1]

    vertex_basis = np.zeros((2, len(vertices), 3))
    joint_basis = np.zeros((2, n_joints, 3))
    vertex_basis[0, :, 1] = HEIGHT_SCALE * (vertices[:, 1] - pelvis_height)
    joint_basis[0, :, 1] = HEIGHT_SCALE * (REST_JOINTS[:, 1] - pelvis_height)
    vertex_basis[1] = GIRTH_SCALE * radial

    return TemplateBody(
        vertices=vertices,
        faces=np.asarray(faces, dtype=np.int64),
        joints=REST_JOINTS.copy(),
        parents=np.asarray(PARENTS, dtype=np.int64),
        skin_weights=np.asarray(weights),
        uv_coords=np.asarray(uvs),
        vertex_shape_basis=vertex_basis,
        joint_shape_basis=joint_basis,
        name="capsule_person",
    )


BUILTIN_ASSETS: Dict[str, Callable[[], TemplateBody]] = {
    "capsule_person": build_capsule_person,
}
