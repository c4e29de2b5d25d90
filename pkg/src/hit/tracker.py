"""Inference pipeline: fixed first-frame template, per-frame search crop around
the previous box, raw model output mapped back to the frame. No window or
scale penalties, no smoothing."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from hit import tensor as T
from hit.errors import BoxError
from hit.head import BoxNorm

TEMPLATE_FACTOR = 2.0
SEARCH_FACTOR = 4.0


@dataclass(frozen=True)
class BBox:
    """Top-left corner form, pixels."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise BoxError(f"box needs positive width and height, got {self}")

    @property
    def center(self) -> tuple[float, float]:
        return self.x + self.w / 2, self.y + self.h / 2

    def corners(self) -> tuple[float, float, float, float]:
        return self.x, self.y, self.x + self.w, self.y + self.h

    @classmethod
    def parse(cls, text: str) -> "BBox":
        parts = [float(v) for v in text.split(",")]
        if len(parts) != 4:
            raise ValueError(f"expected X,Y,W,H, got {text!r}")
        return cls(*parts)


@dataclass(frozen=True)
class CropTransform:
    """Maps crop-normalized coordinates ``u in [0, 1]`` to frame pixels: ``x = x0 + u * side``."""

    x0: float
    y0: float
    side: float
    out_size: int

    @property
    def scale(self) -> float:
        """Frame pixels per crop pixel."""
        return self.side / self.out_size

    def to_frame(self, box: BoxNorm) -> tuple[float, float, float, float]:
        return (
            self.x0 + box.x0 * self.side,
            self.y0 + box.y0 * self.side,
            self.x0 + box.x1 * self.side,
            self.y0 + box.y1 * self.side,
        )

    def to_crop(self, box: BBox) -> BoxNorm:
        x0, y0, x1, y1 = box.corners()
        s = self.side
        return BoxNorm((x0 - self.x0) / s, (y0 - self.y0) / s, (x1 - self.x0) / s, (y1 - self.y0) / s)


def crop_square(img: np.ndarray, box: BBox, factor: float, out_size: int) -> tuple[np.ndarray, CropTransform]:
    """Square window of side ``factor * sqrt(w*h)`` centred on the box, bilinearly
    resized to ``out_size``; out-of-frame samples take the frame's channel means."""
    if factor <= 0:
        raise ValueError(f"crop factor must be positive, got {factor}")
    h, w, c = img.shape
    side = factor * math.sqrt(box.w * box.h)
    cx, cy = box.center
    tf = CropTransform(cx - side / 2, cy - side / 2, side, out_size)

    # half-pixel aligned sample positions in frame index space
    t = (np.arange(out_size) + 0.5) * tf.scale - 0.5
    sx, sy = tf.x0 + t, tf.y0 + t
    x_lo = np.floor(sx).astype(np.int64)
    y_lo = np.floor(sy).astype(np.int64)
    ax = (sx - x_lo)[None, :, None]
    ay = (sy - y_lo)[:, None, None]

    mean = img.reshape(-1, c).mean(axis=0, dtype=np.float64)
    padded = np.empty((h + 2, w + 2, c), dtype=np.float64)
    padded[:] = mean
    padded[1:-1, 1:-1] = img
    # indices outside the frame collapse onto the mean-valued border
    def clip(idx, n):
        return np.clip(idx + 1, 0, n + 1)

    x0i, x1i = clip(x_lo, w), clip(x_lo + 1, w)
    y0i, y1i = clip(y_lo, h), clip(y_lo + 1, h)
    p00 = padded[y0i[:, None], x0i[None, :]]
    p01 = padded[y0i[:, None], x1i[None, :]]
    p10 = padded[y1i[:, None], x0i[None, :]]
    p11 = padded[y1i[:, None], x1i[None, :]]
    top = p00 + ax * (p01 - p00)
    bottom = p10 + ax * (p11 - p10)
    out = top + ay * (bottom - top)
    return out.astype(T.DTYPE), tf


@dataclass
class TrackerState:
    template: np.ndarray
    prev_box: BBox
    model: object
    frame_size: tuple[int, int]  # (W, H)


def init(model, frame: np.ndarray, box: BBox) -> TrackerState:
    h, w = frame.shape[:2]
    x0, y0, x1, y1 = box.corners()
    if x1 <= 0 or y1 <= 0 or x0 >= w or y0 >= h:
        raise BoxError(f"initial box {box} does not intersect the {w}x{h} frame")
    template, _ = crop_square(frame, box, TEMPLATE_FACTOR, model.cfg.template_size)
    template.setflags(write=False)
    return TrackerState(template, box, model, (w, h))


def _clamp_box(x0: float, y0: float, x1: float, y1: float, w: int, h: int) -> BBox:
    x0, x1 = min(max(x0, 0.0), w - 1.0), min(max(x1, 0.0), float(w))
    y0, y1 = min(max(y0, 0.0), h - 1.0), min(max(y1, 0.0), float(h))
    bw, bh = max(x1 - x0, 1.0), max(y1 - y0, 1.0)
    return BBox(x0, y0, bw, bh)


def track(state: TrackerState, frame: np.ndarray) -> BBox:
    search, tf = crop_square(frame, state.prev_box, SEARCH_FACTOR, state.model.cfg.search_size)
    pred = state.model(state.template, search)
    h, w = frame.shape[:2]
    state.prev_box = _clamp_box(*tf.to_frame(pred), w, h)
    return state.prev_box


def run_sequence(model, frames, init_box: BBox) -> list[BBox]:
    """Trajectory over ``frames``; the first entry is the initial box."""
    frames = iter(frames)
    state = init(model, next(frames), init_box)
    out = [init_box]
    for frame in frames:
        out.append(track(state, frame))
    return out
