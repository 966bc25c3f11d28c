from .config import (
    COMMANDS,
    AugmentConfig,
    BodyConfig,
    EvalConfig,
    OrbitConfig,
    PathsConfig,
    PipelineConfig,
    RenderConfig,
    apply_overrides,
    config_from_dict,
    load_config,
    validate_config,
)
from .ply import PROPERTIES, read_ply, write_ply
from .lock import LOCK_NAME, OutputLock
from .commands import (
    cmd_augment,
    cmd_eval,
    cmd_export,
    cmd_fit,
    cmd_render,
    frame_positions,
    load_gaussians,
    timeline_cameras,
    timeline_states,
)
from .cli import build_parser, main

__all__ = [
    "COMMANDS", "AugmentConfig", "BodyConfig", "EvalConfig", "OrbitConfig", "PathsConfig",
    "PipelineConfig", "RenderConfig", "apply_overrides", "config_from_dict", "load_config",
    "validate_config",
    "PROPERTIES", "read_ply", "write_ply",
    "LOCK_NAME", "OutputLock",
    "cmd_augment", "cmd_eval", "cmd_export", "cmd_fit", "cmd_render", "frame_positions",
    "load_gaussians", "timeline_cameras", "timeline_states",
    "build_parser", "main",
]
