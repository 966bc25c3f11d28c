import os
import sys

import numpy as np
import pytest
import torch

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from orbit_splat.body_model import TemplateBody, load_template, normalize_template
from orbit_splat.gaussian_cloud import GaussianSet
from orbit_splat.orbit_camera import make_camera


def make_bar_template() -> TemplateBody:
    """Square bar along y with three joints (root, middle, tip) and one shape component"""
    rings = [0.0, 0.5, 1.0, 1.5, 2.0]
    corners = [(-0.1, -0.1), (0.1, -0.1), (0.1, 0.1), (-0.1, 0.1)]
    vertices, weights, uv = [], [], []
    for r, y in enumerate(rings):
        w = np.zeros(3)
        if y <= 0.5:
            w[0] = 1.0
        elif y >= 1.5:
            w[2] = 1.0
        else:
            w[1] = 1.0
        for c, (x, z) in enumerate(corners):
            vertices.append([x, y, z])
            weights.append(w)
            uv.append([(c + 0.5) / 4.0, y / 2.0])
    faces = []
    for r in range(len(rings) - 1):
        for c in range(4):
            a, b = r * 4 + c, r * 4 + (c + 1) % 4
            faces.append([a, a + 4, b])
            faces.append([b, a + 4, b + 4])
    vertices = np.asarray(vertices)
    basis = np.zeros((1, len(vertices), 3))
    basis[0, :, 1] = 0.1 * vertices[:, 1]
    joint_basis = np.zeros((1, 3, 3))
    joint_basis[0, :, 1] = 0.1 * np.array([0.0, 0.75, 1.5])
    return TemplateBody(
        vertices=vertices,
        faces=np.asarray(faces, dtype=np.int64),
        joints=np.array([[0.0, 0.0, 0.0], [0.0, 0.75, 0.0], [0.0, 1.5, 0.0]]),
        parents=np.array([-1, 0, 1], dtype=np.int64),
        skin_weights=np.asarray(weights),
        uv_coords=np.asarray(uv),
        vertex_shape_basis=basis,
        joint_shape_basis=joint_basis,
        name="bar",
    )


def random_gaussians(rng: np.random.Generator, count: int, dtype=torch.float64) -> GaussianSet:
    quats = rng.normal(size=(count, 4))
    quats /= np.linalg.norm(quats, axis=1, keepdims=True)
    return GaussianSet(
        centers=torch.as_tensor(rng.uniform(-0.5, 0.5, size=(count, 3)), dtype=dtype),
        colors=torch.as_tensor(rng.uniform(0.0, 1.0, size=(count, 3)), dtype=dtype),
        opacities=torch.as_tensor(rng.uniform(0.2, 0.95, size=(count, 1)), dtype=dtype),
        scales=torch.as_tensor(np.exp(rng.uniform(np.log(0.04), np.log(0.15), size=(count, 3))), dtype=dtype),
        rotations=torch.as_tensor(quats, dtype=dtype),
    )


@pytest.fixture
def bar_template():
    return make_bar_template()


@pytest.fixture
def unit_bar_template():
    return normalize_template(make_bar_template())


@pytest.fixture(scope="session")
def capsule_template():
    return load_template("capsule_person")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_camera():
    return make_camera(0.0, 0.0, 3.0, 40.0, 24, 24)


@pytest.fixture
def tiny_scene(rng, small_camera):
    return random_gaussians(rng, 12), small_camera
