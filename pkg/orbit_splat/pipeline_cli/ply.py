#!/usr/bin/env python3
"""
Binary little-endian PLY with one float32 vertex record per Gaussian:
x y z red green blue opacity scale_0 scale_1 scale_2 rot_0 rot_1 rot_2 rot_3
(colors in [0, 1], rotation as (w, x, y, z))
"""

from pathlib import Path
from typing import Union

import numpy as np
import torch

from ..errors import AssetFormatError
from ..gaussian_cloud import GaussianSet

PROPERTIES = ["x", "y", "z", "red", "green", "blue", "opacity",
              "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"]
_SLICES = {"centers": slice(0, 3), "colors": slice(3, 6), "opacities": slice(6, 7),
           "scales": slice(7, 10), "rotations": slice(10, 14)}


def write_ply(path: Union[str, Path], gaussians: GaussianSet) -> None:
    table = np.concatenate([getattr(gaussians, name).detach().cpu().numpy().astype(np.float64)
                            for name in _SLICES], axis=1).astype("<f4")
    header = ["ply", "format binary_little_endian 1.0", "comment orbit-splat gaussians",
              f"element vertex {len(table)}"]
    header += [f"property float {name}" for name in PROPERTIES]
    header.append("end_header")
    with open(path, "wb") as f:
        f.write(("\n".join(header) + "\n").encode("ascii"))
        f.write(np.ascontiguousarray(table).tobytes())


def read_ply(path: Union[str, Path], dtype: torch.dtype = torch.float32) -> GaussianSet:
    raw = Path(path).read_bytes()
    marker = b"end_header\n"
    end = raw.find(marker)
    if not raw.startswith(b"ply\n") or end < 0:
        raise AssetFormatError(path, "not a PLY file")
    lines = raw[:end].decode("ascii", errors="replace").splitlines()

    count = None
    properties = []
    for number, line in enumerate(lines, start=1):
        parts = line.split()
        if not parts or parts[0] in ("ply", "comment"):
            continue
        if parts[0] == "format" and parts[1:2] != ["binary_little_endian"]:
            raise AssetFormatError(path, f"unsupported format '{line}'", line=number)
        if parts[0] == "element":
            if parts[1] != "vertex" or count is not None:
                raise AssetFormatError(path, f"unexpected element '{line}'", line=number)
            count = int(parts[2])
        if parts[0] == "property":
            if parts[1] != "float":
                raise AssetFormatError(path, f"property '{parts[-1]}' must be float", line=number)
            properties.append(parts[2])
    if count is None:
        raise AssetFormatError(path, "missing vertex element")
    if properties != PROPERTIES:
        raise AssetFormatError(path, f"expected properties {' '.join(PROPERTIES)}")

    body = raw[end + len(marker):]
    expected = count * len(PROPERTIES) * 4
    if len(body) != expected:
        raise AssetFormatError(path, f"expected {expected} bytes of vertex data, found {len(body)}")
    table = torch.from_numpy(np.frombuffer(body, dtype="<f4").reshape(count, len(PROPERTIES)).astype(np.float64))
    return GaussianSet(**{name: table[:, s].to(dtype) for name, s in _SLICES.items()})
