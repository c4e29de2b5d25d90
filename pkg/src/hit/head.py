"""Corner head: heatmaps over the fused map, optionally re-weighted by the global vector, decoded by soft-argmax."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hit import tensor as T
from hit.backbone import ModelConfig
from hit.errors import DimensionError

BRANCH_DEPTH = 4


@dataclass(frozen=True)
class BoxNorm:
    """Corner-form box in search-crop units, each component in [0, 1]."""

    x0: float
    y0: float
    x1: float
    y1: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x0, self.y0, self.x1, self.y1], dtype=np.float64)

    @classmethod
    def from_array(cls, a) -> "BoxNorm":
        return cls(*(float(v) for v in a))

    @property
    def ordered(self) -> bool:
        return self.x0 <= self.x1 and self.y0 <= self.y1

    @property
    def in_range(self) -> bool:
        return all(0.0 <= v <= 1.0 for v in (self.x0, self.y0, self.x1, self.y1))


def branch_channels(width: int) -> list[int]:
    return [width >> k for k in range(BRANCH_DEPTH + 1)]


def reweight(g: np.ndarray, os: np.ndarray, gproj: tuple[np.ndarray, np.ndarray], tau: float = 1.0) -> np.ndarray:
    """Modulate every position of ``os`` by its attention to the global vector.

    The multiplier is ``1 + map * P / tau`` where ``map`` is a softmax over the
    P positions, so a uniform map doubles every feature and a saturated map
    boosts one position by ``~P + 1``.
    """
    h, w, c = os.shape
    if g.shape != (1, gproj[0].shape[0]) or gproj[0].shape[1] != c:
        raise DimensionError(f"global vector {g.shape} / projection {gproj[0].shape} do not fit O_s {os.shape}")
    gq = T.linear(g, *gproj)  # (1, C1)
    flat = T.grid_to_tokens(os)
    scores = T.matmul(flat, np.ascontiguousarray(gq.T)).reshape(1, h * w) * np.float32(c**-0.5)
    amap = T.softmax_rows(scores).reshape(h, w, 1)
    return os * (1.0 + amap * np.float32(h * w / tau))


@dataclass
class ConvLayer:
    w: np.ndarray
    b: np.ndarray
    pad: int

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return T.conv2d(x, self.w, self.b, stride=1, pad=self.pad)


class CornerHead:
    """Shared 1x1 trunk lifting C1 to the head width, then two conv branches.

    Each branch: four 3x3 conv+affine+hardswish layers halving the width,
    then a 1x1 conv to a single logit map.
    """

    def __init__(self, cfg: ModelConfig, state: dict, use_g: bool = True):
        self.cfg = cfg
        self.use_g = use_g
        self.gproj = (state["head.gproj.w"], state["head.gproj.b"]) if use_g else None
        self.trunk = ConvLayer(state["head.trunk.w"], state["head.trunk.b"], 0)
        self.branches = {}
        for name in ("tl", "br"):
            convs = [ConvLayer(state[f"head.{name}.conv{k}.w"], state[f"head.{name}.conv{k}.b"], 1) for k in range(BRANCH_DEPTH)]
            convs.append(ConvLayer(state[f"head.{name}.out.w"], state[f"head.{name}.out.b"], 0))
            self.branches[name] = convs

    @staticmethod
    def param_shapes(cfg: ModelConfig, use_g: bool = True) -> dict:
        c1, c3 = cfg.channels[0], cfg.channels[2]
        width = cfg.head_channels
        shapes = {}
        if use_g:
            shapes.update({"head.gproj.w": (c3, c1), "head.gproj.b": (c1,)})
        shapes.update({"head.trunk.w": (1, 1, c1, width), "head.trunk.b": (width,)})
        ch = branch_channels(width)
        for name in ("tl", "br"):
            for k in range(BRANCH_DEPTH):
                shapes[f"head.{name}.conv{k}.w"] = (3, 3, ch[k], ch[k + 1])
                shapes[f"head.{name}.conv{k}.b"] = (ch[k + 1],)
            shapes[f"head.{name}.out.w"] = (1, 1, ch[-1], 1)
            shapes[f"head.{name}.out.b"] = (1,)
        return shapes

    def __call__(self, g: np.ndarray, os: np.ndarray) -> BoxNorm:
        return head_forward(self, g, os)


def corner_heatmaps(head: CornerHead, feat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    h, w, _ = feat.shape
    trunk = T.hardswish(head.trunk(feat))
    maps = []
    for name in ("tl", "br"):
        x = trunk
        *convs, out = head.branches[name]
        for conv in convs:
            x = T.hardswish(conv(x))
        logits = out(x).reshape(1, h * w)
        maps.append(T.softmax_rows(logits).reshape(h, w))
    return maps[0], maps[1]


def soft_argmax(hm: np.ndarray, atol: float = 1e-4) -> tuple[float, float]:
    """Expected cell centre of a normalized heatmap, in [0, 1] units."""
    total = float(hm.sum(dtype=np.float64))
    if abs(total - 1.0) > atol or (hm < 0).any():
        raise ValueError(f"soft_argmax needs a normalized nonnegative heatmap (sum={total})")
    h, w = hm.shape
    p = hm.astype(np.float64) / total
    xs = (np.arange(w) + 0.5) / w
    ys = (np.arange(h) + 0.5) / h
    x = float(p.sum(axis=0) @ xs)
    y = float(p.sum(axis=1) @ ys)
    return min(max(x, 0.0), 1.0), min(max(y, 0.0), 1.0)


def head_forward(head: CornerHead, g: np.ndarray, os: np.ndarray) -> BoxNorm:
    with T.mac_scope("head"):
        feat = reweight(g, os, head.gproj) if head.use_g else os
        tl, br = corner_heatmaps(head, feat)
    (ax, ay), (bx, by) = soft_argmax(tl), soft_argmax(br)
    return BoxNorm(min(ax, bx), min(ay, by), max(ax, bx), max(ay, by))


class FixedHead:
    """Stand-in head that ignores its inputs and always emits ``box``.

    Used to rig a model so the crop/inverse-transform path can be checked
    independently of learned weights.
    """

    use_g = False

    def __init__(self, box: BoxNorm):
        self.box = box

    def __call__(self, g: np.ndarray, os: np.ndarray) -> BoxNorm:
        return self.box
