"""CSV report artifacts and the generated README describing them.

Every file is UTF-8 CSV with a header row; floats are written with a fixed format so a rerun
with the same seed produces byte-identical files.
"""
from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np

from config.settings import EMOTIONS
from services.models import RunConfig
from utils.errors import ProsodyIOError
from utils.file_utils import ensure_dir, write_json

logger = logging.getLogger(__name__)

SCORE_CHANGE_COLUMNS = ("id", "source", "target", "before", "after", "delta")

COLUMN_DOCS: Dict[str, str] = {
    "metrics.csv": "`metric,value`: one scalar per row (accuracies, F1 scores, mean score changes, counts).",
    "confusion.csv": "5x5 counts under a header of the predicted classes; row i is ground-truth class i in header order.",
    "score_changes.csv": "`id,source,target,before,after,delta`: per utterance, target-class score before and after conversion.",
    "training_log.csv": "Salience runs: one row per epoch (loss terms, validation L1). Agent runs: one row per step (reward, losses, moving-average reward).",
    "segments.csv": "`segment_start,segment_end,alpha,beta,gain`: edits applied by a single conversion.",
    "config.json": "Fully resolved run configuration (subcommand, paths, seed, overrides, effective hyperparameters, input checksums).",
}

__all__ = [
    "RunOutputs",
    "format_value",
    "write_rows",
    "write_metrics",
    "write_confusion",
    "write_run_config",
    "write_readme",
    "emit_reports",
]


@dataclass
class RunOutputs:
    config: RunConfig
    metrics: Dict[str, float] = field(default_factory=dict)
    confusion: Optional[np.ndarray] = None
    score_changes: List[Dict[str, Any]] = field(default_factory=list)
    training_log: List[Dict[str, Any]] = field(default_factory=list)
    segments: List[Dict[str, Any]] = field(default_factory=list)


def format_value(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6f}"
    return str(v)


def write_rows(path: str, columns: Sequence[str], rows: Sequence[Mapping[str, Any]]) -> str:
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([format_value(row.get(c, "")) for c in columns])
    except OSError as e:
        raise ProsodyIOError(f"Could not write {path}: {e}") from e
    return path


def write_metrics(path: str, metrics: Mapping[str, float]) -> str:
    return write_rows(path, ("metric", "value"), [{"metric": k, "value": v} for k, v in metrics.items()])


def write_confusion(path: str, cm: np.ndarray) -> str:
    """Header = predicted classes; row i = ground-truth class EMOTIONS[i]."""
    rows = [{e: int(cm[i, j]) for j, e in enumerate(EMOTIONS)} for i in range(len(EMOTIONS))]
    return write_rows(path, EMOTIONS, rows)


def write_run_config(out_dir: str, config: RunConfig) -> str:
    path = os.path.join(out_dir, "config.json")
    write_json(path, config.model_dump())
    return path


def write_readme(out_dir: str, files: Sequence[str]) -> str:
    lines = [f"# {os.path.basename(os.path.abspath(out_dir))}", "", "Files in this run directory:", ""]
    for name in files:
        lines.append(f"- `{name}` - {COLUMN_DOCS.get(name, '')}".rstrip(" -"))
    path = os.path.join(out_dir, "README.md")
    try:
        with open(path, "w", encoding="utf-8") as f:
            f.write("\n".join(lines) + "\n")
    except OSError as e:
        raise ProsodyIOError(f"Could not write {path}: {e}") from e
    return path


def emit_reports(outputs: RunOutputs, out_dir: str) -> List[str]:
    """Write every report the run produced plus ``config.json`` and ``README.md``."""
    ensure_dir(out_dir)
    written: List[str] = []
    written.append(write_run_config(out_dir, outputs.config))
    if outputs.metrics:
        written.append(write_metrics(os.path.join(out_dir, "metrics.csv"), outputs.metrics))
    if outputs.confusion is not None:
        written.append(write_confusion(os.path.join(out_dir, "confusion.csv"), outputs.confusion))
    if outputs.score_changes:
        written.append(write_rows(os.path.join(out_dir, "score_changes.csv"), SCORE_CHANGE_COLUMNS, outputs.score_changes))
    if outputs.training_log:
        columns = list(outputs.training_log[0].keys())
        written.append(write_rows(os.path.join(out_dir, "training_log.csv"), columns, outputs.training_log))
    if outputs.segments:
        columns = ("segment_start", "segment_end", "alpha", "beta", "gain")
        written.append(write_rows(os.path.join(out_dir, "segments.csv"), columns, outputs.segments))
    names = sorted(os.path.basename(p) for p in written)
    written.append(write_readme(out_dir, names))
    logger.info(f"[reports] wrote files={len(written)} dir={out_dir}", extra={"files": names, "out_dir": out_dir})
    return written
