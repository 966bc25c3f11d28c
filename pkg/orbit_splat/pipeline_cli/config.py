#!/usr/bin/env python3
"""
Pipeline configuration

Defaults live in the dataclasses below. A JSON config file is merged over
them section by section, then `--set section.key=value` overrides and the
dedicated flags (--output, --seed, --epochs) are applied; flags win.
Unknown keys and type mismatches are reported together as one
ConfigValidationError.
"""

import dataclasses
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from ..augment.backends import INTERPOLATORS, SUPER_RESOLVERS
from ..body_model import BUILTIN_ASSETS
from ..errors import ConfigValidationError
from ..splat_renderer import PRECISIONS
from ..trainer import TrainConfig

logger = logging.getLogger(__name__)

COMMANDS = ("augment", "fit", "render", "eval", "export")


@dataclass
class PathsConfig:
    frames: str = ""            # source orbit frames (augment input)
    augmented: str = ""         # augmented frames; defaults to <output>/augmented
    body: str = "capsule_person"
    poses: str = ""             # pose file; empty means rest pose for every frame
    shape: str = ""             # shape file; empty means zero beta
    ground_truth: str = ""      # eval views: <view>.png
    output: str = "runs/desk"
    checkpoint: str = ""        # defaults to <output>/checkpoint.osplat

    def augmented_dir(self) -> Path:
        return Path(self.augmented) if self.augmented else Path(self.output) / "augmented"

    def checkpoint_file(self) -> Path:
        return Path(self.checkpoint) if self.checkpoint else Path(self.output) / "checkpoint.osplat"


@dataclass
class OrbitConfig:
    frames: int = 21
    elevation: float = 0.0
    radius: float = 2.7
    fov: float = 33.8


@dataclass
class BodyConfig:
    gaussian_count: int = 4096
    uv_resolution: int = 128
    seed: int = 0


@dataclass
class AugmentConfig:
    super_resolution: bool = True
    frame_interpolation: bool = True
    factor: int = 4
    target: int = 1080
    times: Tuple[float, ...] = (0.25, 0.5, 0.75)
    super_resolver: str = "bicubic"
    interpolator: str = "flow"
    super_resolver_command: str = ""
    interpolator_command: str = ""
    flow_levels: int = 4
    flow_iterations: int = 10
    flow_inner_sweeps: int = 5
    flow_smoothness: float = 0.1


@dataclass
class RenderConfig:
    resolution: int = 256
    background: Tuple[float, float, float] = (1.0, 1.0, 1.0)
    precision: str = "fp32"


@dataclass
class EvalConfig:
    views: Dict[str, float] = field(default_factory=lambda: {"front": 0.0, "back": 180.0, "right": 90.0, "left": 270.0})
    lpips: bool = True


@dataclass
class PipelineConfig:
    paths: PathsConfig = field(default_factory=PathsConfig)
    orbit: OrbitConfig = field(default_factory=OrbitConfig)
    body: BodyConfig = field(default_factory=BodyConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    render: RenderConfig = field(default_factory=RenderConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


def _coerce(current: Any, value: Any, key: str, problems: List[str]) -> Any:
    """Convert a JSON value to the type of the default it replaces"""
    if isinstance(current, bool):
        if isinstance(value, bool):
            return value
    elif isinstance(current, int):
        if isinstance(value, int) and not isinstance(value, bool):
            return value
    elif isinstance(current, float):
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
    elif isinstance(current, str):
        if isinstance(value, str):
            return value
    elif isinstance(current, tuple):
        if isinstance(value, (list, tuple)):
            items = [_coerce(current[0], v, key, problems) if current else v for v in value]
            return tuple(items)
    elif isinstance(current, dict):
        if isinstance(value, dict):
            return {str(k): _coerce(next(iter(current.values())), v, f"{key}.{k}", problems) if current else v
                    for k, v in value.items()}
    problems.append(f"{key}: expected {type(current).__name__}, got {json.dumps(value)}")
    return current


def _merge(target: Any, values: Dict[str, Any], prefix: str, problems: List[str]) -> None:
    names = {f.name for f in dataclasses.fields(target)}
    for key, value in values.items():
        path = f"{prefix}{key}"
        if key not in names:
            problems.append(f"{path}: unknown key")
            continue
        current = getattr(target, key)
        if dataclasses.is_dataclass(current):
            if not isinstance(value, dict):
                problems.append(f"{path}: expected a section object")
                continue
            _merge(current, value, path + ".", problems)
        else:
            setattr(target, key, _coerce(current, value, path, problems))


def config_from_dict(values: Dict[str, Any]) -> PipelineConfig:
    config = PipelineConfig()
    problems: List[str] = []
    _merge(config, values, "", problems)
    if problems:
        raise ConfigValidationError(problems)
    return config


def load_config(path: Optional[Union[str, Path]] = None) -> PipelineConfig:
    """Defaults merged with a JSON file (no file: plain defaults)"""
    if path is None:
        return PipelineConfig()
    path = Path(path)
    if not path.exists():
        raise ConfigValidationError([f"config file not found: {path}"])
    try:
        values = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigValidationError([f"{path}:{e.lineno}: invalid JSON ({e.msg})"]) from None
    if not isinstance(values, dict):
        raise ConfigValidationError([f"{path}: top level must be an object"])
    config = config_from_dict(values)
    logger.debug("Config loaded from %s", path)
    return config


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(config: PipelineConfig, assignments: Sequence[str] = (), output: Optional[str] = None,
                    seed: Optional[int] = None, epochs: Optional[int] = None) -> PipelineConfig:
    """
    Apply `section.key=value` assignments (values parsed as JSON, falling back
    to plain strings), then the dedicated flags
    """
    problems: List[str] = []
    for assignment in assignments:
        if "=" not in assignment:
            problems.append(f"override '{assignment}': expected key=value")
            continue
        key, text = assignment.split("=", 1)
        parts = key.strip().split(".")
        tree: Dict[str, Any] = {}
        node = tree
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = _parse_value(text.strip())
        _merge(config, tree, "", problems)
    if problems:
        raise ConfigValidationError(problems)

    if output is not None:
        config.paths.output = output
    if seed is not None:
        config.body.seed = int(seed)
        config.train.seed = int(seed)
    if epochs is not None:
        config.train.epochs = int(epochs)
    return config


def _exists(path: str, what: str, problems: List[str], directory: bool = False) -> None:
    if not path:
        problems.append(f"{what} is not set")
    elif directory and not Path(path).is_dir():
        problems.append(f"{what} directory not found: {path}")
    elif not directory and not Path(path).exists():
        problems.append(f"{what} not found: {path}")


def validate_config(config: PipelineConfig, command: str) -> None:
    """Collect every problem relevant to command; raise once"""
    problems: List[str] = []
    if command not in COMMANDS:
        problems.append(f"unknown command '{command}'")

    orbit, body, aug, render = config.orbit, config.body, config.augment, config.render
    if orbit.frames < 2:
        problems.append(f"orbit.frames must be >= 2, got {orbit.frames}")
    if orbit.radius <= 0:
        problems.append(f"orbit.radius must be positive, got {orbit.radius}")
    if not 0 < orbit.fov < 180:
        problems.append(f"orbit.fov must lie in (0, 180), got {orbit.fov}")
    if not -90 < orbit.elevation < 90:
        problems.append(f"orbit.elevation must lie in (-90, 90), got {orbit.elevation}")
    if render.resolution <= 0:
        problems.append(f"render.resolution must be positive, got {render.resolution}")
    if len(render.background) != 3 or any(not 0.0 <= c <= 1.0 for c in render.background):
        problems.append(f"render.background must be three values in [0, 1], got {list(render.background)}")
    if render.precision not in PRECISIONS:
        problems.append(f"render.precision must be one of {sorted(PRECISIONS)}, got '{render.precision}'")

    if command == "augment":
        _exists(config.paths.frames, "paths.frames", problems, directory=True)
        if aug.factor < 1:
            problems.append(f"augment.factor must be >= 1, got {aug.factor}")
        if aug.target <= 0:
            problems.append(f"augment.target must be positive, got {aug.target}")
        if not aug.times or any(not 0 < t < 1 for t in aug.times) or list(aug.times) != sorted(set(aug.times)):
            problems.append(f"augment.times must be increasing values in (0, 1), got {list(aug.times)}")
        if aug.super_resolver not in SUPER_RESOLVERS:
            problems.append(f"augment.super_resolver must be one of {sorted(SUPER_RESOLVERS)}")
        if aug.interpolator not in INTERPOLATORS:
            problems.append(f"augment.interpolator must be one of {sorted(INTERPOLATORS)}")
        if aug.super_resolution and aug.super_resolver == "external" and not aug.super_resolver_command:
            problems.append("augment.super_resolver_command is required for the external super-resolver")
        if aug.frame_interpolation and aug.interpolator == "external" and not aug.interpolator_command:
            problems.append("augment.interpolator_command is required for the external interpolator")
        for name in ("flow_levels", "flow_iterations", "flow_inner_sweeps"):
            if getattr(aug, name) < 1:
                problems.append(f"augment.{name} must be >= 1, got {getattr(aug, name)}")
        if aug.flow_smoothness <= 0:
            problems.append(f"augment.flow_smoothness must be positive, got {aug.flow_smoothness}")

    if command == "fit":
        _exists(str(config.paths.augmented_dir()), "augmented frames", problems, directory=True)
        if config.paths.body not in BUILTIN_ASSETS:
            _exists(config.paths.body, "paths.body", problems)
        if config.paths.poses:
            _exists(config.paths.poses, "paths.poses", problems)
        if config.paths.shape:
            _exists(config.paths.shape, "paths.shape", problems)
        if body.gaussian_count <= 0:
            problems.append(f"body.gaussian_count must be positive, got {body.gaussian_count}")
        if body.uv_resolution <= 0:
            problems.append(f"body.uv_resolution must be positive, got {body.uv_resolution}")
        elif body.gaussian_count > body.uv_resolution ** 2:
            problems.append(f"body.gaussian_count {body.gaussian_count} exceeds the "
                            f"{body.uv_resolution}x{body.uv_resolution} UV grid")
        problems.extend(config.train.problems())
        if config.train.extractor == "file" and config.train.extractor_weights:
            _exists(config.train.extractor_weights, "train.extractor_weights", problems)

    if command in ("render", "eval", "export"):
        _exists(str(config.paths.checkpoint_file()), "checkpoint", problems)
    if command == "eval":
        _exists(config.paths.ground_truth, "paths.ground_truth", problems, directory=True)
        if not config.eval.views:
            problems.append("eval.views is empty")

    if problems:
        raise ConfigValidationError(problems)