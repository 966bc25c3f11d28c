#!/usr/bin/env python3
"""
One optimization step: decode once, repose and render each batch frame,
average the photometric terms, add the regularizers, update with Adam
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Sequence

import torch

from ..body_model import BodyState
from ..body_model.skinning import as_tensor
from ..errors import InvalidArgumentError, NumericalError
from ..gaussian_cloud import GaussianSet, assemble, decode, repose_with
from ..losses_metrics import (
    TERMS,
    FeatureExtractor,
    LossBreakdown,
    LossWeights,
    l1_rgb_torch,
    lpips_torch,
    reg_feature,
    reg_offset,
    reg_scale,
    ssim_loss_torch,
    total_loss,
)
from ..orbit_camera import CameraPose
from ..splat_renderer import rasterize
from .state import Subject, TrainConfig, TrainState, refine_motion

logger = logging.getLogger(__name__)


@dataclass
class FrameBatch:
    """Frames trained together; indices address the per-frame corrections"""
    indices: List[int]
    images: List[torch.Tensor]      # (H, W, 3) ground truth
    cameras: List[CameraPose]
    states: List[BodyState]

    def __post_init__(self):
        if not (len(self.indices) == len(self.images) == len(self.cameras) == len(self.states)):
            raise InvalidArgumentError("batch needs one image, camera and body state per frame index")
        if not self.indices:
            raise InvalidArgumentError("empty batch")
        for image, camera in zip(self.images, self.cameras):
            if tuple(image.shape) != (camera.height, camera.width, 3):
                raise InvalidArgumentError(
                    f"frame is {tuple(image.shape)}, camera renders {camera.height}x{camera.width}")


def canonical_gaussians(state: TrainState, subject: Subject):
    """Decode the feature tensor and assemble the canonical GaussianSet"""
    decoded = decode(state.features, subject.posmap, state.decoder)
    surface = torch.as_tensor(subject.surface, dtype=state.dtype)
    return decoded, assemble(subject.samples, decoded, subject.base_scale, surface=surface)


def pose_frame(canonical: GaussianSet, subject: Subject, body: BodyState, delta_theta, delta_translation):
    theta_hat, t_hat = refine_motion(body, delta_theta, delta_translation)
    return repose_with(canonical, subject.samples.skin_weights, subject.joints, subject.parents, theta_hat, t_hat)


def motion_active(state: TrainState, config: TrainConfig) -> bool:
    return config.motion_refinement and state.step >= config.motion_refinement_delay


def compute_terms(state: TrainState, subject: Subject, batch: FrameBatch, extractor: FeatureExtractor,
                  weights: LossWeights, background, train_motion: bool = True):
    """
    Returns:
        (terms dict of 0-d tensors, decoded params)
    """
    decoded, canonical = canonical_gaussians(state, subject)
    photometric = {"rgb": [], "ssim": [], "lpips": []}
    for index, image, camera, body in zip(batch.indices, batch.images, batch.cameras, batch.states):
        d_theta = state.delta_theta[index]
        d_trans = state.delta_translation[index]
        if not train_motion:
            d_theta, d_trans = d_theta.detach(), d_trans.detach()
        posed = pose_frame(canonical, subject, body, d_theta, d_trans)
        rendered = rasterize(posed, camera, background).image
        photometric["rgb"].append(l1_rgb_torch(rendered, image))
        photometric["ssim"].append(ssim_loss_torch(rendered, image))
        if weights.lpips > 0:
            photometric["lpips"].append(lpips_torch(rendered, image, extractor))

    zero = torch.zeros((), dtype=state.dtype)
    terms = {name: (torch.stack(values).mean() if values else zero) for name, values in photometric.items()}
    terms["offset"] = reg_offset(decoded.offsets)
    terms["scale"] = reg_scale(decoded.scales)
    terms["feature"] = reg_feature(state.features)
    return terms, decoded


def train_step(state: TrainState, subject: Subject, batch: FrameBatch, config: TrainConfig,
               extractor: FeatureExtractor, background=(1.0, 1.0, 1.0)) -> LossBreakdown:
    """
    Forward every batch frame, average the loss, take one Adam step

    Raises:
        NumericalError: some loss term or parameter gradient is not finite;
            parameters stay untouched
    """
    state.optimizer.zero_grad(set_to_none=True)
    terms, _ = compute_terms(state, subject, batch, extractor, config.weights,
                             as_tensor(background, state.dtype), motion_active(state, config))

    values = {name: float(terms[name].detach()) for name in TERMS}
    if not all(math.isfinite(v) for v in values.values()):
        breakdown = LossBreakdown.from_terms(values, config.weights)
        logger.error("✗ Non-finite loss at step %d: %s", state.step, breakdown.describe())
        raise NumericalError(f"non-finite loss at step {state.step}: {breakdown.describe()}", breakdown)

    breakdown = total_loss(terms, config.weights)
    if breakdown.tensor is not None and breakdown.tensor.requires_grad:
        breakdown.tensor.backward()
        bad = [name for name, p in state.named_parameters()
               if p.grad is not None and not bool(torch.isfinite(p.grad).all())]
        if bad:
            state.optimizer.zero_grad(set_to_none=True)
            breakdown.tensor = None
            logger.error("✗ Non-finite gradient at step %d: %s", state.step, ", ".join(bad))
            raise NumericalError(f"non-finite gradient at step {state.step} in {', '.join(bad)}: "
                                 f"{breakdown.describe()}", breakdown)
        state.optimizer.step()
    breakdown.tensor = None
    state.step += 1
    state.history.append(breakdown)
    return breakdown


def make_batch(indices: Sequence[int], images: Sequence[torch.Tensor], cameras: Sequence[CameraPose],
               states: Sequence[BodyState]) -> FrameBatch:
    indices = [int(i) for i in indices]
    return FrameBatch(indices, [images[i] for i in indices], [cameras[i] for i in indices],
                      [states[i] for i in indices])
