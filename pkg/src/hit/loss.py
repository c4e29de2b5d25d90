"""Box regression objective ``lambda_giou * (1 - GIoU) + lambda_l1 * L1`` with its analytic gradient."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hit.errors import BoxError, NonDifferentiableError
from hit.head import BoxNorm


@dataclass(frozen=True)
class LossWeights:
    lambda_giou: float = 2.0
    lambda_l1: float = 5.0

    def __post_init__(self):
        if self.lambda_giou <= 0 or self.lambda_l1 <= 0:
            raise ValueError("loss weights must be positive")


def _coords(box) -> np.ndarray:
    a = box.as_array() if isinstance(box, BoxNorm) else np.asarray(box, dtype=np.float64)
    if a[0] > a[2] or a[1] > a[3]:
        raise BoxError(f"box {tuple(a)} is not ordered (x0 <= x1, y0 <= y1)")
    return a


def giou(a, b) -> float:
    a, b = _coords(a), _coords(b)
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    iw = max(0.0, min(a[2], b[2]) - max(a[0], b[0]))
    ih = max(0.0, min(a[3], b[3]) - max(a[1], b[1]))
    inter = iw * ih
    union = area_a + area_b - inter
    iou = inter / union if union > 0 else 0.0
    hull = (max(a[2], b[2]) - min(a[0], b[0])) * (max(a[3], b[3]) - min(a[1], b[1]))
    penalty = (hull - union) / hull if hull > 0 else 0.0
    return float(iou - penalty)


def total_loss(gt, pred, w: LossWeights = LossWeights()) -> float:
    l1 = float(np.abs(_coords(gt) - _coords(pred)).sum())
    return w.lambda_giou * (1.0 - giou(gt, pred)) + w.lambda_l1 * l1


def loss_grad(gt, pred, w: LossWeights = LossWeights()) -> np.ndarray:
    """d(total_loss)/d(pred) for ``pred = (x0, y0, x1, y1)``.

    Only defined where every min/max/abs in the loss is smooth. The predicted
    box needs positive extent and may not share a same-axis coordinate value
    with the ground truth (which also rules out edge-to-edge contact).
    """
    a, b = _coords(gt), _coords(pred)
    if b[2] <= b[0] or b[3] <= b[1]:
        raise NonDifferentiableError(f"predicted box {tuple(b)} is degenerate")
    for axis in (slice(0, 4, 2), slice(1, 4, 2)):
        if np.any(a[axis][:, None] == b[axis][None, :]):
            raise NonDifferentiableError("predicted and ground-truth boxes share a coordinate value on one axis")

    bw, bh = b[2] - b[0], b[3] - b[1]
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = bw * bh
    d_area_b = np.array([-bh, -bw, bh, bw])

    iw = min(a[2], b[2]) - max(a[0], b[0])
    ih = min(a[3], b[3]) - max(a[1], b[1])
    if iw > 0 and ih > 0:
        inter = iw * ih
        d_iw = np.array([-float(b[0] > a[0]), 0.0, float(b[2] < a[2]), 0.0])
        d_ih = np.array([0.0, -float(b[1] > a[1]), 0.0, float(b[3] < a[3])])
        d_inter = d_iw * ih + d_ih * iw
    else:
        inter = 0.0
        d_inter = np.zeros(4)

    union = area_a + area_b - inter
    d_union = d_area_b - d_inter

    cw = max(a[2], b[2]) - min(a[0], b[0])
    ch = max(a[3], b[3]) - min(a[1], b[1])
    hull = cw * ch
    d_cw = np.array([-float(b[0] < a[0]), 0.0, float(b[2] > a[2]), 0.0])
    d_ch = np.array([0.0, -float(b[1] < a[1]), 0.0, float(b[3] > a[3])])
    d_hull = d_cw * ch + d_ch * cw

    # giou = I/U - 1 + U/C
    d_giou = (d_inter * union - inter * d_union) / union**2 + (d_union * hull - union * d_hull) / hull**2
    return -w.lambda_giou * d_giou + w.lambda_l1 * np.sign(b - a)
