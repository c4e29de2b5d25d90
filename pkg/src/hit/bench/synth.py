"""Deterministic synthetic sequences: a textured square moving over a contrasting background."""
from __future__ import annotations

import numpy as np

from hit.tracker import BBox

MOTIONS = ("static", "linear", "random")


def synth_sequence(
    seed: int,
    frames: int,
    motion: str = "linear",
    size: tuple[int, int] = (320, 240),
    target: int = 40,
) -> tuple[list[np.ndarray], list[BBox]]:
    """Frames are ``(H, W, 3)`` float32 in [0, 1], quantized to 8-bit levels
    so a PPM round trip is lossless."""
    if frames < 1:
        raise ValueError("need at least one frame")
    if motion not in MOTIONS:
        raise ValueError(f"motion must be one of {MOTIONS}, got {motion!r}")
    rng = np.random.default_rng(seed)
    w, h = size

    bg_level = rng.uniform(0.1, 0.3, size=3)
    bg = np.clip(bg_level + rng.normal(0, 0.03, size=(h, w, 3)), 0, 1)
    cell = max(target // 5, 1)
    yy, xx = np.mgrid[0:target, 0:target]
    checker = ((yy // cell + xx // cell) % 2).astype(np.float64)[..., None]
    color_a, color_b = rng.uniform(0.7, 1.0, size=3), rng.uniform(0.45, 0.65, size=3)
    patch = checker * color_a + (1 - checker) * color_b

    x = float(rng.uniform(0, w - target))
    y = float(rng.uniform(0, h - target))
    vx, vy = rng.uniform(-3, 3, size=2)
    out_frames, boxes = [], []
    for i in range(frames):
        if i and motion == "linear":
            x, y = x + vx, y + vy
        elif i and motion == "random":
            x, y = x + rng.normal(0, 2.0), y + rng.normal(0, 2.0)
        # bounce off the frame edges
        if x < 0 or x > w - target:
            vx = -vx
            x = float(np.clip(x, 0, w - target))
        if y < 0 or y > h - target:
            vy = -vy
            y = float(np.clip(y, 0, h - target))
        xi, yi = int(round(x)), int(round(y))
        img = bg.copy()
        img[yi : yi + target, xi : xi + target] = patch
        out_frames.append((np.round(img * 255) / 255).astype(np.float32))
        boxes.append(BBox(float(xi), float(yi), float(target), float(target)))
    return out_frames, boxes
