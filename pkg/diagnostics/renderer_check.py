#!/usr/bin/env python3
"""
Renderer Oracle Check
Tiled rasterizer against the brute-force all-Gaussians-all-pixels compositor
on random scenes (fp64)
"""

import argparse
import os
import sys
import time

import numpy as np
import torch

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from orbit_splat.gaussian_cloud import GaussianSet
from orbit_splat.orbit_camera import make_camera
from orbit_splat.splat_renderer import rasterize, render_reference

TOLERANCE = 1e-5


def random_scene(rng: np.random.Generator, count: int, size: int, dtype=torch.float64):
    """count Gaussians scattered around the origin, seen from azimuth 0 at radius 3"""
    quats = rng.normal(size=(count, 4))
    quats /= np.linalg.norm(quats, axis=1, keepdims=True)
    gaussians = GaussianSet(
        centers=torch.as_tensor(rng.uniform(-0.6, 0.6, size=(count, 3)), dtype=dtype),
        colors=torch.as_tensor(rng.uniform(0.0, 1.0, size=(count, 3)), dtype=dtype),
        opacities=torch.as_tensor(rng.uniform(0.2, 0.95, size=(count, 1)), dtype=dtype),
        scales=torch.as_tensor(np.exp(rng.uniform(np.log(0.03), np.log(0.15), size=(count, 3))), dtype=dtype),
        rotations=torch.as_tensor(quats, dtype=dtype),
    )
    camera = make_camera(0.0, 0.0, 3.0, 40.0, size, size)
    background = rng.uniform(0.0, 1.0, size=3)
    return gaussians, camera, background


def check_scene(seed: int, count: int, size: int) -> float:
    rng = np.random.default_rng(seed)
    gaussians, camera, background = random_scene(rng, count, size)
    with torch.no_grad():
        out = rasterize(gaussians, camera, background)
    image, alpha = render_reference(gaussians, camera, background)
    return max(np.abs(out.image_array() - image).max(), np.abs(out.alpha_array() - alpha).max())


def main():
    """Main entry point"""
    parser = argparse.ArgumentParser(description='Tiled rasterizer vs brute-force oracle')
    parser.add_argument('--scenes', '-n', type=int, default=50,
                        help='Number of random scenes')
    parser.add_argument('--gaussians', '-g', type=int, default=64,
                        help='Gaussians per scene')
    parser.add_argument('--size', type=int, default=48,
                        help='Image width and height')
    parser.add_argument('--seed', type=int, default=0,
                        help='First scene seed')
    args = parser.parse_args()

    print("=" * 50)
    print("RENDERER ORACLE CHECK")
    print("=" * 50)
    start = time.time()
    errors = []
    for k in range(args.scenes):
        error = check_scene(args.seed + k, args.gaussians, args.size)
        errors.append(error)
        mark = "✓" if error <= TOLERANCE else "✗"
        print(f"{mark} scene {k:3d}: max |tiled - reference| = {error:.3e}")

    failed = sum(e > TOLERANCE for e in errors)
    print("\n" + "=" * 50)
    print(f"{args.scenes - failed}/{args.scenes} scenes within {TOLERANCE:g} "
          f"(worst {max(errors):.3e}, {time.time() - start:.1f}s)")
    sys.exit(1 if failed else 0)


if __name__ == "__main__":
    main()
