#!/usr/bin/env python3
"""
Per-frame body state and pose files

Pose file rows: `index theta[J*3] translation[3]`, plain text, '#' comments.
Shape file rows: one beta vector per line; several rows are averaged.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np

from ..errors import AssetFormatError, InvalidArgumentError
from .template import mean_shape


@dataclass
class BodyState:
    """Pose, shape and translation of one frame plus learnable corrections"""
    theta: np.ndarray                                   # (J, 3) axis-angle
    beta: np.ndarray                                    # (S,)
    translation: np.ndarray                             # (3,)
    delta_theta: np.ndarray = field(default=None)       # (J, 3)
    delta_translation: np.ndarray = field(default=None) # (3,)

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=np.float64).reshape(-1, 3)
        self.beta = np.asarray(self.beta, dtype=np.float64).reshape(-1)
        self.translation = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if self.delta_theta is None:
            self.delta_theta = np.zeros_like(self.theta)
        if self.delta_translation is None:
            self.delta_translation = np.zeros(3)
        self.delta_theta = np.asarray(self.delta_theta, dtype=np.float64).reshape(self.theta.shape)
        self.delta_translation = np.asarray(self.delta_translation, dtype=np.float64).reshape(3)

    @property
    def num_joints(self) -> int:
        return len(self.theta)

    @classmethod
    def rest(cls, num_joints: int, num_shapes: int = 0) -> "BodyState":
        return cls(theta=np.zeros((num_joints, 3)), beta=np.zeros(num_shapes), translation=np.zeros(3))

    def check(self, num_joints: int, num_shapes: int) -> None:
        if self.theta.shape != (num_joints, 3):
            raise InvalidArgumentError(f"pose has {len(self.theta)} joints, template has {num_joints}")
        if self.beta.shape != (num_shapes,):
            raise InvalidArgumentError(f"beta has {len(self.beta)} components, template has {num_shapes}")


def read_pose_file(path: Union[str, Path], num_joints: int) -> List[Tuple[np.ndarray, np.ndarray]]:
    """
    Returns:
        List of (theta (J, 3), translation (3,)) pairs in index order
    """
    path = Path(path)
    if not path.exists():
        raise AssetFormatError(path, "file does not exist")
    width = 1 + 3 * num_joints + 3
    rows = {}
    for line_no, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.split()
        if len(fields) != width:
            raise AssetFormatError(path, f"expected {width} values for {num_joints} joints, found {len(fields)}", line_no)
        try:
            index = int(fields[0])
            values = np.array([float(v) for v in fields[1:]])
        except ValueError:
            raise AssetFormatError(path, "non-numeric value", line_no) from None
        if index in rows:
            raise AssetFormatError(path, f"duplicate frame index {index}", line_no)
        rows[index] = (values[:3 * num_joints].reshape(num_joints, 3), values[3 * num_joints:])
    return [rows[i] for i in sorted(rows)]


def write_pose_file(path: Union[str, Path], states: Sequence[BodyState], refined: bool = False) -> None:
    lines = []
    for index, state in enumerate(states):
        theta = state.theta + state.delta_theta if refined else state.theta
        trans = state.translation + state.delta_translation if refined else state.translation
        values = " ".join(repr(float(v)) for v in np.concatenate([theta.reshape(-1), trans]))
        lines.append(f"{index} {values}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_shape_file(path: Union[str, Path]) -> np.ndarray:
    """Average of all beta rows in the file"""
    path = Path(path)
    rows = []
    for line_no, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        try:
            rows.append([float(v) for v in line.split()])
        except ValueError:
            raise AssetFormatError(path, "non-numeric value", line_no) from None
    if not rows:
        raise AssetFormatError(path, "no shape rows")
    if len({len(r) for r in rows}) != 1:
        raise AssetFormatError(path, "shape rows differ in length")
    return mean_shape(rows)


def load_body_states(pose_path: Union[str, Path], num_joints: int, beta) -> List[BodyState]:
    beta = np.asarray(beta, dtype=np.float64).reshape(-1)
    return [BodyState(theta=theta, beta=beta, translation=trans)
            for theta, trans in read_pose_file(pose_path, num_joints)]
