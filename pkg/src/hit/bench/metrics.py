"""One-pass evaluation: the IoU success curve with its AUC, plus center-distance precision."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

THRESHOLDS = np.linspace(0.0, 1.0, 21)
PRECISION_PX = 20.0
NORM_PRECISION = 0.2


@dataclass
class SuccessCurve:
    thresholds: np.ndarray
    success: np.ndarray

    @property
    def auc(self) -> float:
        return float(self.success.mean())


def _as_xywh(boxes) -> np.ndarray:
    rows = [(b.x, b.y, b.w, b.h) if hasattr(b, "w") else tuple(b) for b in boxes]
    return np.asarray(rows, dtype=np.float64).reshape(-1, 4)


def iou_xywh(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ix = np.clip(np.minimum(a[:, 0] + a[:, 2], b[:, 0] + b[:, 2]) - np.maximum(a[:, 0], b[:, 0]), 0, None)
    iy = np.clip(np.minimum(a[:, 1] + a[:, 3], b[:, 1] + b[:, 3]) - np.maximum(a[:, 1], b[:, 1]), 0, None)
    inter = ix * iy
    union = a[:, 2] * a[:, 3] + b[:, 2] * b[:, 3] - inter
    return np.where(union > 0, inter / np.where(union > 0, union, 1), 0.0)


def success_curve(ious: np.ndarray, thresholds: np.ndarray = THRESHOLDS) -> SuccessCurve:
    """Fraction of frames with ``IoU >= t`` (and ``IoU > 0``) at each threshold.

    The ``IoU > 0`` guard keeps frames with no overlap out of the t=0 bin;
    ``>=`` lets a perfect track score 1 at t=1.
    """
    ious = np.asarray(ious, dtype=np.float64)
    hit = (ious[None, :] >= thresholds[:, None]) & (ious[None, :] > 0)
    return SuccessCurve(thresholds, hit.mean(axis=1))


def eval_sequence(pred, gt) -> dict:
    p, g = _as_xywh(pred), _as_xywh(gt)
    if len(p) != len(g):
        raise ValueError(f"trajectory lengths differ: {len(p)} predicted vs {len(g)} ground truth")
    if len(p) == 0:
        raise ValueError("empty trajectory")
    curve = success_curve(iou_xywh(p, g))
    dc = (p[:, :2] + p[:, 2:] / 2) - (g[:, :2] + g[:, 2:] / 2)
    dist = np.hypot(dc[:, 0], dc[:, 1])
    norm_dist = np.hypot(dc[:, 0] / g[:, 2], dc[:, 1] / g[:, 3])
    return {
        "auc": curve.auc,
        "precision": float((dist <= PRECISION_PX).mean()),
        "norm_precision": float((norm_dist <= NORM_PRECISION).mean()),
        "curve": curve,
    }
