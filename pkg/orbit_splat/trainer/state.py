#!/usr/bin/env python3
"""
Training configuration, the fitted subject, and optimizer state

A Subject is everything fixed during fitting: surface samples, the canonical
UV position map, shaped joints and the base scale. TrainState holds what the
optimizer changes: the feature tensor, decoder weights and per-frame motion
corrections, plus Adam moments and the loss history.
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch
from torch import nn

from ..body_model import (
    BodyState,
    SurfaceSamples,
    TemplateBody,
    UVPositionMap,
    joint_locations,
    sample_surface,
    uv_position_map,
)
from ..body_model.skinning import as_tensor
from ..errors import InvalidArgumentError
from ..gaussian_cloud import (
    Checkpoint,
    DecoderNet,
    FeatureTensor,
    base_scale_from_samples,
    build_decoder,
    init_feature_tensor,
)
from ..losses_metrics import LossBreakdown, LossWeights
from ..orbit_camera import CameraPose

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 1000
    batch_size: int = 2
    learning_rate: float = 3e-3
    motion_learning_rate: float = 1e-4
    adam_betas: Tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    seed: int = 0
    checkpoint_interval: int = 100      # epochs; 0 writes only the final checkpoint
    log_interval: int = 50              # steps
    motion_refinement: bool = True
    motion_refinement_delay: int = 0    # steps before corrections start training
    feature_channels: int = 32
    hidden_widths: Tuple[int, ...] = (128, 128)
    extractor: str = "pyramid"          # pyramid | identity | none | file
    extractor_weights: str = ""
    weights: LossWeights = field(default_factory=LossWeights)

    def problems(self) -> List[str]:
        problems = []
        for name in ("epochs", "batch_size", "feature_channels"):
            if getattr(self, name) <= 0:
                problems.append(f"train.{name} must be positive, got {getattr(self, name)}")
        for name in ("learning_rate", "motion_learning_rate", "adam_eps"):
            if not getattr(self, name) > 0:
                problems.append(f"train.{name} must be positive, got {getattr(self, name)}")
        if not all(0.0 <= b < 1.0 for b in self.adam_betas) or len(self.adam_betas) != 2:
            problems.append(f"train.adam_betas must be two values in [0, 1), got {list(self.adam_betas)}")
        for name in ("checkpoint_interval", "log_interval", "motion_refinement_delay"):
            if getattr(self, name) < 0:
                problems.append(f"train.{name} must be non-negative, got {getattr(self, name)}")
        if any(w <= 0 for w in self.hidden_widths):
            problems.append(f"train.hidden_widths must be positive, got {list(self.hidden_widths)}")
        if self.extractor not in ("pyramid", "identity", "none", "file"):
            problems.append(f"train.extractor must be pyramid, identity, none or file, got '{self.extractor}'")
        if self.extractor == "file" and not self.extractor_weights:
            problems.append("train.extractor_weights is required when train.extractor is 'file'")
        problems.extend("train." + p for p in self.weights.problems())
        return problems

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass
class Subject:
    """Fixed geometry shared by every frame"""
    samples: SurfaceSamples
    posmap: UVPositionMap
    surface: np.ndarray     # (N, 3) samples on the shaped template
    joints: np.ndarray      # (J, 3) shaped rest joints
    parents: List[int]
    beta: np.ndarray
    base_scale: float

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def num_joints(self) -> int:
        return len(self.parents)


def build_subject(template: TemplateBody, beta, count: int, seed: int, uv_resolution: int) -> Subject:
    """Sample the surface, scatter the canonical UV position map, pick the base scale"""
    beta = np.asarray(beta, dtype=np.float64).reshape(-1)
    shaped = template.shaped(beta)
    samples = sample_surface(template, count, seed, uv_resolution)
    surface = samples.positions_on(shaped)
    posmap = uv_position_map(samples, surface, uv_resolution)
    base_scale = base_scale_from_samples(surface)
    logger.info("✓ Subject sampled: %d Gaussians, UV %dx%d, base scale %.5f",
                len(samples), posmap.resolution[0], posmap.resolution[1], base_scale)
    return Subject(samples=samples, posmap=posmap, surface=surface, joints=joint_locations(template, beta),
                   parents=list(template.parents), beta=beta, base_scale=base_scale)


@dataclass
class TrainState:
    features: FeatureTensor
    decoder: DecoderNet
    delta_theta: List[nn.Parameter]         # per frame (J, 3)
    delta_translation: List[nn.Parameter]   # per frame (3,)
    optimizer: torch.optim.Adam
    step: int = 0
    history: List[LossBreakdown] = field(default_factory=list)

    @property
    def dtype(self) -> torch.dtype:
        return self.features.values.dtype

    @property
    def num_frames(self) -> int:
        return len(self.delta_theta)

    def named_parameters(self) -> List[Tuple[str, nn.Parameter]]:
        named = [("features", self.features.values)]
        named += [(f"decoder.{name}", p) for name, p in self.decoder.named_parameters()]
        named += [(f"delta_theta.{i}", p) for i, p in enumerate(self.delta_theta)]
        named += [(f"delta_translation.{i}", p) for i, p in enumerate(self.delta_translation)]
        return named

    def corrections(self, frame: int) -> Tuple[np.ndarray, np.ndarray]:
        return (self.delta_theta[frame].detach().cpu().numpy().astype(np.float64),
                self.delta_translation[frame].detach().cpu().numpy().astype(np.float64))


def build_optimizer(features: FeatureTensor, decoder: DecoderNet, delta_theta: Sequence[nn.Parameter],
                    delta_translation: Sequence[nn.Parameter], config: TrainConfig) -> torch.optim.Adam:
    """Adam with the network rate for appearance and the motion rate for corrections"""
    groups = [{"params": [features.values, *decoder.parameters()], "lr": config.learning_rate}]
    motion = [*delta_theta, *delta_translation]
    if motion:
        groups.append({"params": motion, "lr": config.motion_learning_rate})
    return torch.optim.Adam(groups, betas=tuple(config.adam_betas), eps=config.adam_eps)


def init_train_state(subject: Subject, num_frames: int, config: TrainConfig,
                     dtype: torch.dtype = torch.float32) -> TrainState:
    if num_frames <= 0:
        raise InvalidArgumentError(f"need at least one frame, got {num_frames}")
    features = init_feature_tensor(subject.posmap.resolution, config.feature_channels, config.seed, dtype)
    decoder = build_decoder(config.feature_channels, config.hidden_widths, config.seed, dtype)
    delta_theta = [nn.Parameter(torch.zeros(subject.num_joints, 3, dtype=dtype)) for _ in range(num_frames)]
    delta_translation = [nn.Parameter(torch.zeros(3, dtype=dtype)) for _ in range(num_frames)]
    optimizer = build_optimizer(features, decoder, delta_theta, delta_translation, config)
    return TrainState(features, decoder, delta_theta, delta_translation, optimizer)


def refine_motion(state: BodyState, delta_theta=None, delta_translation=None):
    """
    theta_hat = theta + delta_theta, t_hat = t + delta_t

    Without explicit corrections the BodyState's own are used and numpy arrays
    come back; with tensor corrections the sums are tensors that carry their
    gradients.
    """
    if delta_theta is None and delta_translation is None:
        return state.theta + state.delta_theta, state.translation + state.delta_translation
    dtype = (delta_theta if delta_theta is not None else delta_translation).dtype
    dt_theta = delta_theta if delta_theta is not None else as_tensor(state.delta_theta, dtype)
    dt_trans = delta_translation if delta_translation is not None else as_tensor(state.delta_translation, dtype)
    return as_tensor(state.theta, dtype) + dt_theta, as_tensor(state.translation, dtype) + dt_trans


# -- checkpoint conversion ---------------------------------------------------

def state_to_checkpoint(state: TrainState, subject: Subject, config_snapshot: Optional[Dict] = None,
                        bodies: Optional[Sequence[BodyState]] = None,
                        cameras: Optional[Sequence[CameraPose]] = None) -> Checkpoint:
    """Everything render, eval and export need, plus Adam moments for resuming"""
    tensors = {
        "samples.positions": subject.samples.positions,
        "samples.uv": subject.samples.uv,
        "samples.skin_weights": subject.samples.skin_weights,
        "samples.face_ids": subject.samples.face_ids.astype(np.int64),
        "samples.barycentric": subject.samples.barycentric,
        "subject.surface": subject.surface,
        "subject.joints": subject.joints,
        "subject.parents": np.asarray(subject.parents, dtype=np.int64),
        "subject.beta": subject.beta,
    }
    if bodies is not None:
        tensors["bodies.theta"] = np.stack([b.theta for b in bodies])
        tensors["bodies.translation"] = np.stack([b.translation for b in bodies])
    if cameras is not None:
        tensors["cameras.extrinsic"] = np.stack([c.extrinsic for c in cameras])
        tensors["cameras.intrinsic"] = np.stack([c.intrinsic for c in cameras])
        tensors["cameras.orbit"] = np.array([[c.azimuth, c.elevation, c.radius, c.fov, c.width, c.height]
                                             for c in cameras], dtype=np.float64)
    for name, param in state.named_parameters():
        tensors[name] = param.detach()
        moments = state.optimizer.state.get(param, {})
        for key in ("exp_avg", "exp_avg_sq"):
            if key in moments:
                tensors[f"adam.{key}.{name}"] = moments[key]
        if "step" in moments:
            tensors[f"adam.step.{name}"] = np.asarray(float(moments["step"]), dtype=np.float64)

    meta = {
        "step": state.step,
        "frames": state.num_frames,
        "dtype": str(state.dtype).replace("torch.", ""),
        "uv_resolution": list(subject.posmap.resolution),
        "feature_channels": state.features.channels,
        "decoder_widths": list(state.decoder.widths),
        "base_scale": subject.base_scale,
        "gaussians": len(subject),
        "config": config_snapshot or {},
    }
    return Checkpoint(meta=meta, tensors=tensors)


def subject_from_checkpoint(checkpoint: Checkpoint) -> Subject:
    t = checkpoint.tensors
    samples = SurfaceSamples(
        positions=np.array(t["samples.positions"], dtype=np.float64),
        uv=np.array(t["samples.uv"], dtype=np.float64),
        skin_weights=np.array(t["samples.skin_weights"], dtype=np.float64),
        face_ids=np.array(t["samples.face_ids"], dtype=np.int64),
        barycentric=np.array(t["samples.barycentric"], dtype=np.float64),
    )
    surface = np.array(t["subject.surface"], dtype=np.float64)
    resolution = tuple(checkpoint.meta["uv_resolution"])
    return Subject(samples=samples, posmap=uv_position_map(samples, surface, resolution), surface=surface,
                   joints=np.array(t["subject.joints"], dtype=np.float64),
                   parents=[int(p) for p in t["subject.parents"]],
                   beta=np.array(t["subject.beta"], dtype=np.float64),
                   base_scale=float(checkpoint.meta["base_scale"]))


def state_from_checkpoint(checkpoint: Checkpoint, config: TrainConfig) -> TrainState:
    """Rebuild parameters and Adam moments; the optimizer uses config's rates"""
    meta = checkpoint.meta
    dtype = getattr(torch, meta["dtype"])
    widths = meta["decoder_widths"]
    features = FeatureTensor(values=nn.Parameter(checkpoint.tensor("features", dtype)))
    decoder = DecoderNet(widths).to(dtype)
    decoder.load_state_dict({name[len("decoder."):]: checkpoint.tensor(name, dtype)
                             for name in checkpoint.tensors if name.startswith("decoder.")})
    frames = int(meta["frames"])
    delta_theta = [nn.Parameter(checkpoint.tensor(f"delta_theta.{i}", dtype)) for i in range(frames)]
    delta_translation = [nn.Parameter(checkpoint.tensor(f"delta_translation.{i}", dtype)) for i in range(frames)]
    optimizer = build_optimizer(features, decoder, delta_theta, delta_translation, config)
    state = TrainState(features, decoder, delta_theta, delta_translation, optimizer, step=int(meta["step"]))

    for name, param in state.named_parameters():
        key = f"adam.exp_avg.{name}"
        if key in checkpoint.tensors:
            optimizer.state[param] = {
                "step": torch.tensor(float(checkpoint.tensors[f"adam.step.{name}"])),
                "exp_avg": checkpoint.tensor(key, dtype),
                "exp_avg_sq": checkpoint.tensor(f"adam.exp_avg_sq.{name}", dtype),
            }
    return state


def bodies_from_checkpoint(checkpoint: Checkpoint, state: Optional[TrainState] = None) -> List[BodyState]:
    """Per-frame body states; corrections filled from state when given"""
    if "bodies.theta" not in checkpoint.tensors:
        return []
    thetas = np.array(checkpoint.tensors["bodies.theta"], dtype=np.float64)
    translations = np.array(checkpoint.tensors["bodies.translation"], dtype=np.float64)
    beta = np.array(checkpoint.tensors["subject.beta"], dtype=np.float64)
    bodies = []
    for frame, (theta, translation) in enumerate(zip(thetas, translations)):
        body = BodyState(theta=theta, beta=beta, translation=translation)
        if state is not None and frame < state.num_frames:
            body.delta_theta, body.delta_translation = state.corrections(frame)
        bodies.append(body)
    return bodies


def cameras_from_checkpoint(checkpoint: Checkpoint) -> List[CameraPose]:
    if "cameras.orbit" not in checkpoint.tensors:
        return []
    orbit = np.array(checkpoint.tensors["cameras.orbit"], dtype=np.float64)
    extrinsic = np.array(checkpoint.tensors["cameras.extrinsic"], dtype=np.float64)
    intrinsic = np.array(checkpoint.tensors["cameras.intrinsic"], dtype=np.float64)
    return [CameraPose(azimuth=float(az), elevation=float(el), radius=float(r), fov=float(fov),
                       width=int(w), height=int(h), extrinsic=ext, intrinsic=K)
            for (az, el, r, fov, w, h), ext, K in zip(orbit, extrinsic, intrinsic)]
