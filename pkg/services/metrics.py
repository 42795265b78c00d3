"""Classification and segmentation metrics for saliency evaluation and conversion."""
from __future__ import annotations

from typing import Dict, Sequence, Tuple

import numpy as np
from sklearn.metrics import confusion_matrix, f1_score

from config.settings import NUM_EMOTIONS

__all__ = [
    "argmax_label",
    "top_k_hit",
    "classification_metrics",
    "span_iou",
    "segments_iou",
    "moving_average",
]

LABELS = list(range(NUM_EMOTIONS))


def argmax_label(scores: np.ndarray) -> int:
    """Index of the largest score; ties go to the lowest index."""
    return int(np.argmax(np.asarray(scores)))


def top_k_hit(truth: int, scores: np.ndarray, k: int) -> bool:
    """``truth`` among the ``k`` best classes, ranking ties by lower index."""
    order = np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")
    return int(truth) in order[:k].tolist()


def classification_metrics(
    targets: Sequence[np.ndarray],
    predictions: Sequence[np.ndarray],
) -> Tuple[Dict[str, float], np.ndarray]:
    """Top-1/top-2 accuracy, macro and weighted F1 over argmax labels, 5x5 confusion (row = truth)."""
    truth = [argmax_label(t) for t in targets]
    pred = [argmax_label(p) for p in predictions]
    n = len(truth)
    metrics = {
        "n": float(n),
        "top1_accuracy": float(np.mean([t == p for t, p in zip(truth, pred)])) if n else 0.0,
        "top2_accuracy": float(np.mean([top_k_hit(t, p, 2) for t, p in zip(truth, predictions)])) if n else 0.0,
        "macro_f1": float(f1_score(truth, pred, labels=LABELS, average="macro", zero_division=0)),
        "weighted_f1": float(f1_score(truth, pred, labels=LABELS, average="weighted", zero_division=0)),
    }
    cm = confusion_matrix(truth, pred, labels=LABELS)
    return metrics, cm


def span_iou(a: Tuple[int, int], b: Tuple[int, int]) -> float:
    inter = max(0, min(a[1], b[1]) - max(a[0], b[0]))
    union = (a[1] - a[0]) + (b[1] - b[0]) - inter
    return inter / union if union > 0 else 0.0


def segments_iou(segments: Sequence[Tuple[int, int]], cue: Tuple[int, int]) -> float:
    """IoU between the union of extracted segments and the planted cue span."""
    if not segments:
        return 0.0
    lo = min(s for s, _ in [*segments, cue])
    hi = max(e for _, e in [*segments, cue])
    covered = np.zeros(hi - lo, dtype=bool)
    for s, e in segments:
        covered[s - lo:e - lo] = True
    cue_mask = np.zeros(hi - lo, dtype=bool)
    cue_mask[cue[0] - lo:cue[1] - lo] = True
    union = np.count_nonzero(covered | cue_mask)
    return float(np.count_nonzero(covered & cue_mask) / union) if union else 0.0


def moving_average(values: Sequence[float], window: int) -> np.ndarray:
    """Trailing mean over at most ``window`` values at each position."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        return v
    csum = np.concatenate(([0.0], np.cumsum(v)))
    idx = np.arange(1, v.size + 1)
    start = np.maximum(0, idx - window)
    return (csum[idx] - csum[start]) / (idx - start)
