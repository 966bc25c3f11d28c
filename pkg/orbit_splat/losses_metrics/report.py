#!/usr/bin/env python3
"""
Metric report file: one key=value pair per line

    # orbit-splat evaluation report
    views=front,back,right,left
    front.psnr=31.2
    front.ssim=0.97
    ...
    mean.psnr=...
    clip_similarity=out_of_scope

Lines starting with '#' are comments. Values are written with repr() so they
read back exactly.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Union

from ..errors import AssetFormatError

HEADER = "# orbit-splat evaluation report"
OUT_OF_SCOPE = {"clip_similarity": "out_of_scope"}


@dataclass
class MetricRow:
    view: str
    scores: Dict[str, float] = field(default_factory=dict)


def mean_row(rows: List[MetricRow], name: str = "mean") -> MetricRow:
    keys = [k for k in rows[0].scores] if rows else []
    return MetricRow(name, {k: sum(r.scores[k] for r in rows) / len(rows) for k in keys})


def write_metric_report(path: Union[str, Path], rows: List[MetricRow], extra: Dict[str, str] = None) -> None:
    lines = [HEADER, "views=" + ",".join(r.view for r in rows)]
    for row in rows:
        for key, value in row.scores.items():
            lines.append(f"{row.view}.{key}={float(value)!r}")
    for key, value in {**(extra or {}), **OUT_OF_SCOPE}.items():
        lines.append(f"{key}={value}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_metric_report(path: Union[str, Path]) -> Dict[str, str]:
    """Flat key -> raw string value mapping"""
    entries = {}
    for number, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise AssetFormatError(path, f"expected key=value, got '{line}'", line=number)
        key, value = line.split("=", 1)
        entries[key.strip()] = value.strip()
    return entries


def rows_from_report(entries: Dict[str, str]) -> List[MetricRow]:
    rows = []
    for view in filter(None, entries.get("views", "").split(",")):
        prefix = view + "."
        scores = {k[len(prefix):]: float(v) for k, v in entries.items() if k.startswith(prefix)}
        rows.append(MetricRow(view, scores))
    return rows
