#!/usr/bin/env python3
"""
Run records: loss history CSV and run manifest
"""

import csv
import hashlib
import json
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Union

from .. import __version__
from ..errors import AssetFormatError
from ..losses_metrics import TERMS, LossBreakdown

CSV_COLUMNS = ["step", *TERMS, "total"]


class LossCsvWriter:
    """Appends one row per step: step,rgb,ssim,lpips,offset,scale,feature,total"""

    def __init__(self, path: Union[str, Path], append: bool = False):
        self.path = Path(path)
        fresh = not (append and self.path.exists())
        self._file = open(self.path, "w" if fresh else "a", newline="")
        self._writer = csv.writer(self._file)
        if fresh:
            self._writer.writerow(CSV_COLUMNS)

    def write(self, step: int, breakdown: LossBreakdown) -> None:
        row = breakdown.as_row()
        self._writer.writerow([step, *(repr(float(row[name])) for name in CSV_COLUMNS[1:])])
        self._file.flush()

    def close(self) -> None:
        self._file.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_loss_csv(path: Union[str, Path]) -> List[Dict[str, float]]:
    with open(path, newline="") as f:
        return [{k: (int(v) if k == "step" else float(v)) for k, v in row.items()}
                for row in csv.DictReader(f)]


def truncate_loss_csv(path: Union[str, Path], last_step: int) -> int:
    """
    Drop rows past last_step, e.g. steps logged after the checkpoint a run
    resumes from

    Returns:
        Number of rows dropped
    """
    path = Path(path)
    if not path.exists():
        return 0
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows or rows[0] != CSV_COLUMNS:
        raise AssetFormatError(path, f"not a loss history (header {rows[0] if rows else 'missing'})")
    kept = [row for row in rows[1:] if int(row[0]) <= last_step]
    dropped = len(rows) - 1 - len(kept)
    if dropped:
        with open(path, "w", newline="") as f:
            csv.writer(f).writerows([CSV_COLUMNS, *kept])
    return dropped


def file_digest(paths: Iterable[Union[str, Path]]) -> str:
    """sha256 over the contents of every file, in the given order"""
    digest = hashlib.sha256()
    for path in paths:
        with open(path, "rb") as f:
            for block in iter(lambda: f.read(1 << 20), b""):
                digest.update(block)
    return "sha256:" + digest.hexdigest()


def write_run_manifest(path: Union[str, Path], config: Dict, seeds: Dict[str, int],
                       assets: Dict[str, str], extra: Optional[Dict[str, object]] = None) -> None:
    """
    key=value lines; the resolved config is flattened to dotted keys
    (config.train.epochs=1000)
    """
    lines = ["# orbit-splat run manifest", f"version={__version__}"]
    lines += [f"seed.{name}={value}" for name, value in sorted(seeds.items())]
    lines += [f"asset.{name}={value}" for name, value in sorted(assets.items())]
    for key, value in sorted((extra or {}).items()):
        lines.append(f"{key}={value}")
    for key, value in _flatten(config):
        lines.append(f"config.{key}={json.dumps(value)}")
    Path(path).write_text("\n".join(lines) + "\n")


def _flatten(tree: Dict, prefix: str = ""):
    for key in sorted(tree):
        value = tree[key]
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            yield from _flatten(value, name + ".")
        else:
            yield name, list(value) if isinstance(value, tuple) else value
