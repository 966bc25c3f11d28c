#!/usr/bin/env python3
"""
Template body asset: mesh, skeleton, skin weights, uv layout, shape basis

The `.body` file is plain text, one block per section:

    body 1
    counts <vertices> <faces> <joints> <shapes>
    vertices            V lines: x y z
    faces               F lines: i j k (0-based)
    joints              J lines: x y z (rest pose)
    parents             J lines: parent index (-1 for the root)
    weights             V lines: joint:weight pairs, at most 4 per vertex
    uv                  V lines: u v in [0, 1]
    shape <k>           for k < shapes: V lines vertex offsets, then J lines joint offsets

Lines starting with '#' and blank lines are ignored.
"""

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from ..errors import AssetFormatError, InvalidArgumentError

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
MAX_INFLUENCES = 4
WEIGHT_TOLERANCE = 1e-4

SECTIONS = ("vertices", "faces", "joints", "parents", "weights", "uv")


@dataclass(frozen=True)
class TemplateBody:
    """Canonical-pose articulated body"""
    vertices: np.ndarray            # (V, 3)
    faces: np.ndarray               # (F, 3) int
    joints: np.ndarray              # (J, 3) rest joints J(0)
    parents: np.ndarray             # (J,) int, -1 for root
    skin_weights: np.ndarray        # (V, J) dense, rows sum to 1
    uv_coords: np.ndarray           # (V, 2)
    vertex_shape_basis: np.ndarray = field(default=None)   # (S, V, 3)
    joint_shape_basis: np.ndarray = field(default=None)    # (S, J, 3)
    name: str = "body"

    def __post_init__(self):
        if self.vertex_shape_basis is None:
            object.__setattr__(self, "vertex_shape_basis", np.zeros((0, len(self.vertices), 3)))
        if self.joint_shape_basis is None:
            object.__setattr__(self, "joint_shape_basis", np.zeros((0, len(self.joints), 3)))

    @property
    def num_joints(self) -> int:
        return len(self.joints)

    @property
    def num_shapes(self) -> int:
        return len(self.vertex_shape_basis)

    @property
    def kinematic_order(self) -> List[int]:
        return kinematic_order(self.parents)

    def shaped(self, beta) -> "TemplateBody":
        """Template with shape blending applied: T(beta) and J(beta)"""
        beta = _check_beta(self, beta)
        if len(beta) == 0:
            return self
        vertices = self.vertices + np.tensordot(beta, self.vertex_shape_basis, axes=1)
        joints = self.joints + np.tensordot(beta, self.joint_shape_basis, axes=1)
        return replace(self, vertices=vertices, joints=joints)


def _check_beta(template: TemplateBody, beta) -> np.ndarray:
    beta = np.zeros(0) if beta is None else np.asarray(beta, dtype=np.float64).reshape(-1)
    if len(beta) != template.num_shapes:
        raise InvalidArgumentError(
            f"beta has {len(beta)} components, template '{template.name}' defines {template.num_shapes}")
    return beta


def joint_locations(template: TemplateBody, beta) -> np.ndarray:
    """Rest-pose joint positions after shape blending, J(beta)"""
    beta = _check_beta(template, beta)
    if len(beta) == 0:
        return template.joints.copy()
    return template.joints + np.tensordot(beta, template.joint_shape_basis, axes=1)


def mean_shape(betas: Sequence) -> np.ndarray:
    """Average several per-frame shape estimates into one beta"""
    betas = np.atleast_2d(np.asarray(betas, dtype=np.float64))
    if betas.shape[0] == 0:
        raise InvalidArgumentError("no shape estimates given")
    return betas.mean(axis=0)


def kinematic_order(parents: Sequence[int]) -> List[int]:
    """Parent-before-child joint order; raises on cycles or multiple roots"""
    parents = [int(p) for p in parents]
    count = len(parents)
    if count == 0:
        raise InvalidArgumentError("skeleton has no joints")
    if parents[0] != -1:
        raise InvalidArgumentError("skeleton is not a tree rooted at joint 0 (parent of joint 0 must be -1)")

    children: Dict[int, List[int]] = {j: [] for j in range(count)}
    for joint, parent in enumerate(parents[1:], start=1):
        if parent == -1:
            raise InvalidArgumentError(f"skeleton is not a tree: joint {joint} is a second root")
        if not 0 <= parent < count:
            raise InvalidArgumentError(f"joint {joint} has out-of-range parent {parent}")
        if parent == joint:
            raise InvalidArgumentError(f"skeleton is not a tree: joint {joint} is its own parent")
        children[parent].append(joint)

    order = []
    stack = [0]
    while stack:
        joint = stack.pop()
        order.append(joint)
        stack.extend(reversed(children[joint]))
    if len(order) != count:
        missing = sorted(set(range(count)) - set(order))
        raise InvalidArgumentError(f"skeleton is not a tree: joints {missing} form a parent cycle")
    return order


def validate_template(template: TemplateBody, source: str = "<memory>") -> None:
    """Check every TemplateBody invariant"""
    V, J = len(template.vertices), len(template.joints)
    if template.vertices.shape != (V, 3) or template.joints.shape != (J, 3):
        raise AssetFormatError(source, "vertices and joints must be 3D positions")
    if template.faces.ndim != 2 or template.faces.shape[1] != 3:
        raise AssetFormatError(source, "faces must be triangles")
    if template.faces.size and (template.faces.min() < 0 or template.faces.max() >= V):
        raise AssetFormatError(source, "face index out of range")
    if template.skin_weights.shape != (V, J):
        raise AssetFormatError(source, f"skin weights must be {V}x{J}, got {template.skin_weights.shape}")
    if np.any(template.skin_weights < 0):
        vertex = int(np.argwhere(template.skin_weights < 0)[0, 0])
        raise AssetFormatError(source, f"negative skin weight on vertex {vertex}")
    sums = template.skin_weights.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > WEIGHT_TOLERANCE)
    if len(bad):
        raise AssetFormatError(source, f"skin weights of vertex {int(bad[0])} sum to {sums[bad[0]]:.6f}, not 1")
    if template.uv_coords.shape != (V, 2) or np.any(template.uv_coords < 0) or np.any(template.uv_coords > 1):
        raise AssetFormatError(source, "uv coordinates must lie in [0, 1]^2")
    if template.vertex_shape_basis.shape[1:] != (V, 3) or template.joint_shape_basis.shape[1:] != (J, 3):
        raise AssetFormatError(source, "shape basis does not match vertex/joint counts")
    try:
        kinematic_order(template.parents)
    except InvalidArgumentError as e:
        raise AssetFormatError(source, str(e)) from None


def normalize_template(template: TemplateBody) -> TemplateBody:
    """Recenter to the bounding-sphere center and scale to unit radius"""
    lo, hi = template.vertices.min(axis=0), template.vertices.max(axis=0)
    center = (lo + hi) / 2.0
    radius = float(np.linalg.norm(template.vertices - center, axis=1).max())
    if radius <= 0:
        raise InvalidArgumentError("template has zero extent")
    scale = 1.0 / radius
    return replace(
        template,
        vertices=(template.vertices - center) * scale,
        joints=(template.joints - center) * scale,
        vertex_shape_basis=template.vertex_shape_basis * scale,
        joint_shape_basis=template.joint_shape_basis * scale,
    )


class _LineReader:
    """Skips comments and blank lines while tracking line numbers"""

    def __init__(self, path: Path):
        self.path = path
        self.lines = [(n, l.strip()) for n, l in enumerate(path.read_text().splitlines(), start=1)
                      if l.strip() and not l.lstrip().startswith("#")]
        self.pos = 0

    def next(self, expect: Optional[str] = None):
        if self.pos >= len(self.lines):
            raise AssetFormatError(self.path, f"unexpected end of file (expected {expect or 'data'})")
        line_no, text = self.lines[self.pos]
        self.pos += 1
        if expect is not None and text.split()[0] != expect:
            raise AssetFormatError(self.path, f"expected section '{expect}', found '{text}'", line_no)
        return line_no, text

    def floats(self, count: int, width: int) -> np.ndarray:
        out = np.empty((count, width))
        for row in range(count):
            line_no, text = self.next()
            fields = text.split()
            if len(fields) != width:
                raise AssetFormatError(self.path, f"expected {width} values, found {len(fields)}", line_no)
            try:
                out[row] = [float(v) for v in fields]
            except ValueError:
                raise AssetFormatError(self.path, f"non-numeric value in '{text}'", line_no) from None
        return out


def read_body(path: Union[str, Path]) -> TemplateBody:
    """Parse a `.body` file without normalization"""
    path = Path(path)
    if not path.exists():
        raise AssetFormatError(path, "file does not exist")
    reader = _LineReader(path)

    line_no, header = reader.next("body")
    try:
        version = int(header.split()[1])
    except (IndexError, ValueError):
        raise AssetFormatError(path, "malformed header", line_no) from None
    if version != FORMAT_VERSION:
        raise AssetFormatError(path, f"unsupported body format version {version}", line_no)

    line_no, counts = reader.next("counts")
    try:
        V, F, J, S = (int(v) for v in counts.split()[1:5])
    except ValueError:
        raise AssetFormatError(path, "malformed counts line", line_no) from None

    reader.next("vertices")
    vertices = reader.floats(V, 3)
    reader.next("faces")
    faces = reader.floats(F, 3)
    if np.any(faces != np.round(faces)):
        raise AssetFormatError(path, "face indices must be integers")
    faces = faces.astype(np.int64)
    reader.next("joints")
    joints = reader.floats(J, 3)
    reader.next("parents")
    parents = reader.floats(J, 1).astype(np.int64).reshape(-1)

    reader.next("weights")
    weights = np.zeros((V, J))
    for vertex in range(V):
        line_no, text = reader.next()
        pairs = text.split()
        if len(pairs) > MAX_INFLUENCES:
            raise AssetFormatError(path, f"vertex {vertex} has {len(pairs)} influences (max {MAX_INFLUENCES})", line_no)
        for pair in pairs:
            try:
                joint, value = pair.split(":")
                weights[vertex, int(joint)] = float(value)
            except (ValueError, IndexError):
                raise AssetFormatError(path, f"bad weight entry '{pair}' for vertex {vertex}", line_no) from None
        total = weights[vertex].sum()
        if abs(total - 1.0) > WEIGHT_TOLERANCE:
            raise AssetFormatError(path, f"skin weights of vertex {vertex} sum to {total:.6f}, not 1", line_no)

    reader.next("uv")
    uv = reader.floats(V, 2)

    vertex_basis = np.zeros((S, V, 3))
    joint_basis = np.zeros((S, J, 3))
    for k in range(S):
        reader.next("shape")
        vertex_basis[k] = reader.floats(V, 3)
        joint_basis[k] = reader.floats(J, 3)

    template = TemplateBody(
        vertices=vertices, faces=faces, joints=joints, parents=parents,
        skin_weights=weights / weights.sum(axis=1, keepdims=True), uv_coords=uv,
        vertex_shape_basis=vertex_basis, joint_shape_basis=joint_basis, name=path.stem,
    )
    validate_template(template, str(path))
    return template


def write_body(template: TemplateBody, path: Union[str, Path]) -> None:
    """Serialize to the `.body` text format (sparse weights, top 4 influences)"""
    lines = [f"# {template.name}", f"body {FORMAT_VERSION}",
             f"counts {len(template.vertices)} {len(template.faces)} {template.num_joints} {template.num_shapes}"]
    lines.append("vertices")
    lines += [f"{x!r} {y!r} {z!r}" for x, y, z in template.vertices.tolist()]
    lines.append("faces")
    lines += [f"{i} {j} {k}" for i, j, k in template.faces.tolist()]
    lines.append("joints")
    lines += [f"{x!r} {y!r} {z!r}" for x, y, z in template.joints.tolist()]
    lines.append("parents")
    lines += [str(int(p)) for p in template.parents]
    lines.append("weights")
    for row in template.skin_weights:
        top = [j for j in np.argsort(-row, kind="stable")[:MAX_INFLUENCES] if row[j] > 0]
        lines.append(" ".join(f"{j}:{float(row[j])!r}" for j in sorted(top)))
    lines.append("uv")
    lines += [f"{u!r} {v!r}" for u, v in template.uv_coords.tolist()]
    for k in range(template.num_shapes):
        lines.append(f"shape {k}")
        lines += [f"{x!r} {y!r} {z!r}" for x, y, z in template.vertex_shape_basis[k].tolist()]
        lines += [f"{x!r} {y!r} {z!r}" for x, y, z in template.joint_shape_basis[k].tolist()]
    Path(path).write_text("\n".join(lines) + "\n")


def load_template(path: Union[str, Path]) -> TemplateBody:
    """
    Load and normalize a body asset

    Args:
        path: `.body` file, or the name of a builtin asset ("capsule_person")

    Returns:
        Validated TemplateBody centered on its bounding sphere with unit radius
    """
    from .capsule_person import BUILTIN_ASSETS

    key = str(path)
    if key in BUILTIN_ASSETS and not Path(key).exists():
        template = BUILTIN_ASSETS[key]()
        validate_template(template, key)
    else:
        template = read_body(path)

    template = normalize_template(template)
    logger.info("✓ Template loaded: %s (%d vertices, %d faces, %d joints, %d shape components)",
                template.name, len(template.vertices), len(template.faces),
                template.num_joints, template.num_shapes)
    return template
