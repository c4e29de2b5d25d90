"""Multi-stage feature fusion: ``O = S_max + Up(S_mid + Up(S_min))``.

Each ``Up`` is a 2x2 stride-2 transposed convolution that also maps the
channels of the deeper level onto the shallower one. Ablation configs drop
levels; the chain still walks deep to shallow, so whatever is used ends up at
the ``S_max`` grid with ``C1`` channels.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hit import tensor as T
from hit.backbone import FeaturePyramid, ModelConfig
from hit.errors import DimensionError

LEVELS = ("max", "mid", "min")


@dataclass(frozen=True)
class BridgeConfig:
    use_max: bool = True
    use_mid: bool = True
    use_min: bool = True

    def __post_init__(self):
        if not (self.use_max or self.use_mid or self.use_min):
            raise ValueError("bridge needs at least one feature level")

    @classmethod
    def parse(cls, text: str) -> "BridgeConfig":
        """``"max,mid"`` -> Max+Mid; ``"all"`` -> default."""
        if text.strip().lower() == "all":
            return cls()
        names = {t.strip().lower() for t in text.split(",") if t.strip()}
        unknown = names - set(LEVELS)
        if unknown:
            raise ValueError(f"unknown bridge levels {sorted(unknown)}")
        return cls("max" in names, "mid" in names, "min" in names)

    @property
    def label(self) -> str:
        return "+".join(n for n, on in zip(LEVELS, (self.use_max, self.use_mid, self.use_min)) if on)

    def upsamplers(self) -> tuple[bool, bool]:
        """Which of up1 (min->mid grid) and up2 (mid->max grid) are needed."""
        up1 = self.use_min
        up2 = self.use_min or self.use_mid
        return up1, up2


# Feature-combination ablation rows in order: all, max, mid, min, max+mid, max+min, mid+min
TABLE_CONFIGS = tuple(
    BridgeConfig(*flags)
    for flags in [
        (True, True, True),
        (True, False, False),
        (False, True, False),
        (False, False, True),
        (True, True, False),
        (True, False, True),
        (False, True, True),
    ]
)


class Bridge:
    def __init__(self, cfg: ModelConfig, bcfg: BridgeConfig, state: dict):
        self.cfg = cfg
        self.bcfg = bcfg
        up1, up2 = bcfg.upsamplers()
        self.up1 = (state["bridge.up1.w"], state["bridge.up1.b"]) if up1 else None
        self.up2 = (state["bridge.up2.w"], state["bridge.up2.b"]) if up2 else None

    @staticmethod
    def param_shapes(cfg: ModelConfig, bcfg: BridgeConfig = BridgeConfig()) -> dict:
        c1, c2, c3 = cfg.channels
        up1, up2 = bcfg.upsamplers()
        shapes = {}
        if up1:
            shapes.update({"bridge.up1.w": (2, 2, c3, c2), "bridge.up1.b": (c2,)})
        if up2:
            shapes.update({"bridge.up2.w": (2, 2, c2, c1), "bridge.up2.b": (c1,)})
        return shapes

    def __call__(self, fp: FeaturePyramid) -> np.ndarray:
        return bridge_forward(self, fp)


def bridge_forward(bridge: Bridge, fp: FeaturePyramid) -> np.ndarray:
    c1, c2, c3 = bridge.cfg.channels
    g = bridge.cfg.search_grid
    expected = {"max": (g, g, c1), "mid": (g // 2, g // 2, c2), "min": (g // 4, g // 4, c3)}
    for name, fmap in (("max", fp.s_max), ("mid", fp.s_mid), ("min", fp.s_min)):
        if fmap.shape != expected[name]:
            raise DimensionError(f"S_{name} has shape {fmap.shape}, expected {expected[name]}")
    b = bridge.bcfg
    with T.mac_scope("bridge"):
        acc = fp.s_min if b.use_min else None
        if acc is not None:
            acc = T.transpose_conv2d(acc, *bridge.up1, stride=2)
        if b.use_mid:
            acc = fp.s_mid if acc is None else T.add(acc, fp.s_mid)
        if acc is not None:
            acc = T.transpose_conv2d(acc, *bridge.up2, stride=2)
        if b.use_max:
            acc = fp.s_max if acc is None else T.add(acc, fp.s_max)
    return acc
