#!/usr/bin/env python3
"""
Fitting loop: seeded per-epoch shuffles, batches of frames, periodic checkpoints
"""

import logging
import math
import sys
from pathlib import Path
from typing import Dict, Optional, Sequence, Union

import numpy as np
import torch
from tqdm import tqdm

from ..body_model import BodyState
from ..errors import InvalidArgumentError
from ..gaussian_cloud import write_checkpoint
from ..losses_metrics import FeatureExtractor, build_extractor
from ..orbit_camera import CameraPose
from .records import LossCsvWriter, truncate_loss_csv
from .state import Subject, TrainConfig, TrainState, init_train_state, state_to_checkpoint
from .step import make_batch, train_step

logger = logging.getLogger(__name__)


def steps_per_epoch(num_frames: int, batch_size: int) -> int:
    return math.ceil(num_frames / batch_size)


def epoch_orders(num_frames: int, epochs: int, seed: int):
    """The fixed shuffled frame order of every epoch"""
    rng = np.random.default_rng(seed)
    for _ in range(epochs):
        yield rng.permutation(num_frames)


def fit(frames: Sequence, cameras: Sequence[CameraPose], states: Sequence[BodyState], config: TrainConfig,
        subject: Subject, background=(1.0, 1.0, 1.0), dtype: torch.dtype = torch.float32,
        extractor: Optional[FeatureExtractor] = None, state: Optional[TrainState] = None,
        checkpoint_path: Optional[Union[str, Path]] = None, loss_csv: Optional[Union[str, Path]] = None,
        config_snapshot: Optional[Dict] = None, progress: bool = False) -> TrainState:
    """
    Run epochs x ceil(n / batch) steps

    Args:
        frames: n ground-truth images (H, W, 3), numpy or torch
        cameras: n camera poses
        states: n body states (theta, beta, t); corrections live in TrainState
        config: Training configuration
        subject: Fixed sampled geometry
        background: Render background
        dtype: Precision of parameters and rendering
        extractor: Perceptual features; built from config when omitted
        state: Resume from this state instead of a fresh one
        checkpoint_path: Written every config.checkpoint_interval epochs and at the end
        loss_csv: Loss history file
        config_snapshot: Stored in checkpoints
        progress: Show a progress bar

    Returns:
        Final TrainState with its loss history
    """
    n = len(frames)
    if not (n == len(cameras) == len(states)):
        raise InvalidArgumentError(f"{n} frames, {len(cameras)} cameras and {len(states)} body states must match")
    if n == 0:
        raise InvalidArgumentError("nothing to fit: no frames")
    problems = config.problems()
    if problems:
        raise InvalidArgumentError("; ".join(problems))
    for body in states:
        body.check(subject.num_joints, len(subject.beta))

    images = [torch.as_tensor(np.asarray(f), dtype=dtype) for f in frames]
    if extractor is None:
        extractor = build_extractor(config.extractor, config.seed, config.extractor_weights or None)
    if state is None:
        state = init_train_state(subject, n, config, dtype)
    elif state.num_frames != n:
        raise InvalidArgumentError(f"resumed state has corrections for {state.num_frames} frames, got {n}")

    per_epoch = steps_per_epoch(n, config.batch_size)
    total_steps = config.epochs * per_epoch
    start_epoch = state.step // per_epoch
    logger.info("Fitting %d frames: %d epochs x %d steps (batch %d, lr %g, motion lr %g)",
                n, config.epochs, per_epoch, config.batch_size, config.learning_rate, config.motion_learning_rate)

    if loss_csv and state.step > 0:
        dropped = truncate_loss_csv(loss_csv, state.step)
        if dropped:
            logger.info("Dropped %d loss rows logged after step %d", dropped, state.step)
    writer = LossCsvWriter(loss_csv, append=state.step > 0) if loss_csv else None
    bar = tqdm(total=total_steps, initial=min(state.step, total_steps), unit="step", desc="fit",
               disable=not (progress and sys.stderr.isatty()))
    try:
        for epoch, order in enumerate(epoch_orders(n, config.epochs, config.seed)):
            if epoch < start_epoch:
                continue
            for first in range(0, n, config.batch_size):
                batch = make_batch(order[first:first + config.batch_size], images, cameras, states)
                breakdown = train_step(state, subject, batch, config, extractor, background)
                if writer:
                    writer.write(state.step, breakdown)
                bar.update(1)
                bar.set_postfix(loss=f"{breakdown.total:.4f}")
                if config.log_interval and state.step % config.log_interval == 0:
                    logger.info("step %d/%d %s", state.step, total_steps, breakdown.describe())
            done = epoch + 1
            if checkpoint_path and config.checkpoint_interval and done % config.checkpoint_interval == 0 \
                    and done < config.epochs:
                write_checkpoint(checkpoint_path, state_to_checkpoint(state, subject, config_snapshot, states, cameras))
                logger.info("✓ Checkpoint at epoch %d: %s", done, checkpoint_path)
    finally:
        bar.close()
        if writer:
            writer.close()

    if checkpoint_path:
        write_checkpoint(checkpoint_path, state_to_checkpoint(state, subject, config_snapshot, states, cameras))
        logger.info("✓ Final checkpoint: %s (step %d)", checkpoint_path, state.step)
    return state
