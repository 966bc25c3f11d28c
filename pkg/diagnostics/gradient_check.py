#!/usr/bin/env python3
"""
Gradient Verification
Analytic gradients of a rendered-image loss against central finite differences
(fp64, random scenes)

Probed: Gaussian centers, colors, opacities, scales, rotations (renderer
backward) and the feature tensor, decoder weights, pose and translation
corrections (full decode -> repose -> render chain). Probes that straddle the
alpha clamp or a depth-order swap legitimately disagree; the check passes when
at least 95% of probes agree.
"""

import argparse
import os
import sys
import time

import numpy as np
import torch

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from renderer_check import random_scene
from orbit_splat.body_model import BodyState, load_template
from orbit_splat.gaussian_cloud import GaussianSet
from orbit_splat.orbit_camera import make_camera
from orbit_splat.splat_renderer import backward, rasterize
from orbit_splat.trainer import TrainConfig, build_subject, canonical_gaussians, init_train_state, pose_frame

EPS = 1e-6
REL_TOLERANCE = 1e-3
ABS_FLOOR = 1e-7
PASS_FRACTION = 0.95
GAUSSIAN_FIELDS = ("centers", "colors", "opacities", "scales", "rotations")


def agrees(analytic: float, numeric: float) -> bool:
    scale = max(abs(analytic), abs(numeric))
    return scale < ABS_FLOOR or abs(analytic - numeric) / scale <= REL_TOLERANCE


def image_loss(gaussians: GaussianSet, camera, background, weights: torch.Tensor) -> float:
    with torch.no_grad():
        return float((weights * rasterize(gaussians, camera, background).image).sum())


def probe_renderer(rng: np.random.Generator, count: int, size: int, probes: int):
    gaussians, camera, background = random_scene(rng, count, size)
    weights = torch.as_tensor(rng.normal(size=(size, size, 3)))
    out = rasterize(gaussians, camera, background, record_gradients=True)
    grads = backward(out, weights)

    results = []
    for name in GAUSSIAN_FIELDS:
        value = getattr(gaussians, name)
        grad = grads[name]
        for _ in range(probes):
            i, j = rng.integers(value.shape[0]), rng.integers(value.shape[1])
            analytic = float(grad[i, j])
            if name == "rotations":
                q = value[i]
                analytic -= float(grad[i] @ q) * float(q[j])

            def shifted(delta):
                fields = {f: getattr(gaussians, f).clone() for f in GAUSSIAN_FIELDS}
                fields[name][i, j] += delta
                if name == "rotations":
                    fields[name][i] /= fields[name][i].norm()
                return image_loss(GaussianSet(**fields), camera, background, weights)

            numeric = (shifted(EPS) - shifted(-EPS)) / (2 * EPS)
            results.append((name, analytic, numeric))
    return results


class ChainScene:
    """Tiny subject, one frame, random pose"""

    def __init__(self, rng: np.random.Generator, template, size: int):
        self.subject = build_subject(template, np.zeros(template.num_shapes), 32, int(rng.integers(1 << 30)), 16)
        config = TrainConfig(feature_channels=4, hidden_widths=(16,), seed=int(rng.integers(1 << 30)))
        self.state = init_train_state(self.subject, 1, config, torch.float64)
        with torch.no_grad():
            self.state.features.values.normal_(0.0, 0.5, generator=torch.Generator().manual_seed(config.seed))
        self.body = BodyState(theta=rng.normal(scale=0.1, size=(template.num_joints, 3)),
                              beta=np.zeros(template.num_shapes), translation=rng.normal(scale=0.05, size=3))
        self.camera = make_camera(float(rng.uniform(0.0, 360.0)), 0.0, 3.6, 33.8, size, size)
        self.weights = torch.as_tensor(rng.normal(size=(size, size, 3)))

    def loss(self) -> torch.Tensor:
        _, canonical = canonical_gaussians(self.state, self.subject)
        posed = pose_frame(canonical, self.subject, self.body,
                           self.state.delta_theta[0], self.state.delta_translation[0])
        return (self.weights * rasterize(posed, self.camera, (1.0, 1.0, 1.0)).image).sum()

    def parameters(self):
        yield "features", self.state.features.values
        for p in self.state.decoder.parameters():
            yield "decoder", p
        yield "delta_theta", self.state.delta_theta[0]
        yield "delta_translation", self.state.delta_translation[0]


def probe_chain(rng: np.random.Generator, template, size: int, probes: int):
    scene = ChainScene(rng, template, size)
    scene.loss().backward()
    params = list(scene.parameters())
    groups = {}
    for name, p in params:
        groups.setdefault(name, []).append(p)

    results = []
    for name, members in groups.items():
        for _ in range(probes):
            p = members[rng.integers(len(members))]
            flat = int(rng.integers(p.numel()))
            analytic = float(p.grad.reshape(-1)[flat]) if p.grad is not None else 0.0
            with torch.no_grad():
                view = p.data.view(-1)
                original = float(view[flat])
                view[flat] = original + EPS
                plus = float(scene.loss())
                view[flat] = original - EPS
                minus = float(scene.loss())
                view[flat] = original
            results.append((name, analytic, (plus - minus) / (2 * EPS)))
    return results


def main():
    """Main entry point"""
    parser = argparse.ArgumentParser(description='Analytic vs finite-difference gradients')
    parser.add_argument('--scenes', '-n', type=int, default=100,
                        help='Number of random scenes')
    parser.add_argument('--gaussians', '-g', type=int, default=32,
                        help='Gaussians per renderer scene')
    parser.add_argument('--size', type=int, default=32,
                        help='Image width and height')
    parser.add_argument('--probes', type=int, default=2,
                        help='Probes per parameter group and scene')
    parser.add_argument('--seed', type=int, default=0,
                        help='Random seed')
    args = parser.parse_args()

    print("=" * 50)
    print("GRADIENT VERIFICATION")
    print("=" * 50)
    start = time.time()
    rng = np.random.default_rng(args.seed)
    template = load_template("capsule_person")

    results = []
    for k in range(args.scenes):
        results += probe_renderer(rng, args.gaussians, args.size, args.probes)
        results += probe_chain(rng, template, args.size, args.probes)
        if (k + 1) % 10 == 0:
            print(f"  {k + 1}/{args.scenes} scenes")

    print()
    total_ok = 0
    for name in (*GAUSSIAN_FIELDS, "features", "decoder", "delta_theta", "delta_translation"):
        group = [(a, n) for g, a, n in results if g == name]
        ok = sum(agrees(a, n) for a, n in group)
        total_ok += ok
        print(f"{'✓' if ok >= PASS_FRACTION * len(group) else '✗'} {name:18s} {ok}/{len(group)} probes agree")

    fraction = total_ok / len(results)
    print("\n" + "=" * 50)
    print(f"{fraction:.1%} of {len(results)} probes within {REL_TOLERANCE:g} relative error "
          f"({time.time() - start:.1f}s)")
    sys.exit(0 if fraction >= PASS_FRACTION else 1)


if __name__ == "__main__":
    main()
