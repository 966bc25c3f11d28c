#!/usr/bin/env python3
"""
Checkpoint container

Layout (little-endian):
    8 bytes   magic  b"OSPLCKPT"
    uint32    format version
    uint64    header length H
    H bytes   UTF-8 JSON header (sorted keys): {"meta": {...}, "tensors": [...]}
    ...       raw tensor bytes, concatenated in table order

Each tensor table entry: {"name", "dtype" (numpy str, e.g. "<f4"), "shape", "offset", "nbytes"},
offset counted from the end of the header. Writing is deterministic: identical
inputs give identical bytes.
"""

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np
import torch

from ..errors import AssetFormatError, CheckpointVersionError

logger = logging.getLogger(__name__)

MAGIC = b"OSPLCKPT"
VERSION = 1
_PREFIX = struct.Struct("<8sIQ")


@dataclass
class Checkpoint:
    meta: Dict[str, Any] = field(default_factory=dict)
    tensors: Dict[str, np.ndarray] = field(default_factory=dict)

    def tensor(self, name: str, dtype: torch.dtype = None) -> torch.Tensor:
        value = torch.from_numpy(np.array(self.tensors[name]))
        return value if dtype is None else value.to(dtype)


def _as_array(value) -> np.ndarray:
    if isinstance(value, torch.Tensor):
        value = value.detach().cpu().numpy()
    array = np.ascontiguousarray(value)
    return array.astype(array.dtype.newbyteorder("<"), copy=False)


def write_checkpoint(path: Union[str, Path], checkpoint: Checkpoint) -> None:
    table = []
    blobs = []
    offset = 0
    for name in checkpoint.tensors:
        array = _as_array(checkpoint.tensors[name])
        data = array.tobytes(order="C")
        table.append({"name": name, "dtype": array.dtype.str, "shape": list(array.shape),
                      "offset": offset, "nbytes": len(data)})
        blobs.append(data)
        offset += len(data)
    header = json.dumps({"meta": checkpoint.meta, "tensors": table}, sort_keys=True).encode("utf-8")

    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as f:
        f.write(_PREFIX.pack(MAGIC, VERSION, len(header)))
        f.write(header)
        for blob in blobs:
            f.write(blob)
    tmp.replace(path)
    logger.debug("Checkpoint written: %s (%d tensors, %d bytes of data)", path, len(table), offset)


def read_checkpoint(path: Union[str, Path]) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise AssetFormatError(path, "checkpoint does not exist")
    raw = path.read_bytes()
    if len(raw) < _PREFIX.size:
        raise AssetFormatError(path, "file too short for a checkpoint header")
    magic, version, header_len = _PREFIX.unpack_from(raw, 0)
    if magic != MAGIC:
        raise AssetFormatError(path, "not an orbit-splat checkpoint (bad magic)")
    if version != VERSION:
        raise CheckpointVersionError(path, VERSION, version)

    start = _PREFIX.size
    try:
        header = json.loads(raw[start:start + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise AssetFormatError(path, f"corrupt header ({e})") from None
    data_start = start + header_len

    tensors = {}
    for entry in header.get("tensors", []):
        begin = data_start + entry["offset"]
        end = begin + entry["nbytes"]
        if end > len(raw):
            raise AssetFormatError(path, f"tensor '{entry['name']}' runs past end of file")
        array = np.frombuffer(raw[begin:end], dtype=np.dtype(entry["dtype"]))
        tensors[entry["name"]] = array.reshape(entry["shape"])
    return Checkpoint(meta=header.get("meta", {}), tensors=tensors)
