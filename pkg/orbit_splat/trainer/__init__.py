from .state import (
    Subject,
    TrainConfig,
    TrainState,
    bodies_from_checkpoint,
    build_optimizer,
    cameras_from_checkpoint,
    build_subject,
    init_train_state,
    refine_motion,
    state_from_checkpoint,
    state_to_checkpoint,
    subject_from_checkpoint,
)
from .step import FrameBatch, canonical_gaussians, compute_terms, make_batch, pose_frame, train_step
from .fit import epoch_orders, fit, steps_per_epoch
from .records import CSV_COLUMNS, LossCsvWriter, file_digest, read_loss_csv, truncate_loss_csv, write_run_manifest

__all__ = [
    "Subject", "TrainConfig", "TrainState", "bodies_from_checkpoint", "build_optimizer", "cameras_from_checkpoint", "build_subject", "init_train_state",
    "refine_motion", "state_from_checkpoint", "state_to_checkpoint", "subject_from_checkpoint",
    "FrameBatch", "canonical_gaussians", "compute_terms", "make_batch", "pose_frame", "train_step",
    "epoch_orders", "fit", "steps_per_epoch",
    "CSV_COLUMNS", "LossCsvWriter", "file_digest", "read_loss_csv", "truncate_loss_csv", "write_run_manifest",
]
