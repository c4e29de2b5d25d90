"""Runnable model variants for the feature-combination, position-encoding,
downsampling and global-vector ablations."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from hit.backbone import SHRINK, SUBSAMPLE, ModelConfig
from hit.bridge import TABLE_CONFIGS, BridgeConfig
from hit.posenc import Kind

POS_ENCODINGS = (Kind.DIAGONAL, Kind.ABSOLUTE, Kind.SEPARATE, Kind.VERTICAL, Kind.HORIZONTAL)
DOWNSAMPLES = (SHRINK, SUBSAMPLE)

_POS_ALIASES = {
    "di": Kind.DIAGONAL,
    "diag": Kind.DIAGONAL,
    "diagonal": Kind.DIAGONAL,
    "abs": Kind.ABSOLUTE,
    "absolute": Kind.ABSOLUTE,
    "sep": Kind.SEPARATE,
    "separate": Kind.SEPARATE,
    "ver": Kind.VERTICAL,
    "vertical": Kind.VERTICAL,
    "hor": Kind.HORIZONTAL,
    "horizontal": Kind.HORIZONTAL,
}


@dataclass(frozen=True)
class AblationSpec:
    bridge: BridgeConfig = field(default_factory=BridgeConfig)
    pos_enc: Kind = Kind.DIAGONAL
    downsample: str = SHRINK
    use_g: bool = True

    def __post_init__(self):
        object.__setattr__(self, "pos_enc", Kind(self.pos_enc))
        if self.downsample not in DOWNSAMPLES:
            raise ValueError(f"downsample must be one of {DOWNSAMPLES}, got {self.downsample!r}")

    @classmethod
    def parse(cls, items) -> "AblationSpec":
        """Parse ``["bridge=max,mid", "pos=ver", "downsample=subsample", "g=off"]``."""
        kwargs = {}
        for item in items:
            key, sep, value = item.partition("=")
            if not sep:
                raise ValueError(f"ablation item {item!r} is not key=value")
            key, value = key.strip().lower(), value.strip().lower()
            if key == "bridge":
                kwargs["bridge"] = BridgeConfig.parse(value)
            elif key in ("pos", "pos_enc"):
                if value not in _POS_ALIASES:
                    raise ValueError(f"unknown position encoding {value!r}")
                kwargs["pos_enc"] = _POS_ALIASES[value]
            elif key == "downsample":
                kwargs["downsample"] = {"sa": SHRINK, "shrink": SHRINK, "subsample": SUBSAMPLE}.get(value, value)
            elif key == "g":
                if value not in ("on", "off", "true", "false", "1", "0"):
                    raise ValueError(f"g must be on/off, got {value!r}")
                kwargs["use_g"] = value in ("on", "true", "1")
            else:
                raise ValueError(f"unknown ablation key {key!r}")
        return cls(**kwargs)

    def describe(self) -> str:
        return f"bridge={self.bridge.label} pos={self.pos_enc.value} downsample={self.downsample} g={'on' if self.use_g else 'off'}"


def all_specs() -> list[AblationSpec]:
    """Every combination: 7 bridge configs x 5 encodings x 2 downsamplers x 2 G settings."""
    return [
        AblationSpec(b, p, d, g)
        for b, p, d, g in itertools.product(TABLE_CONFIGS, POS_ENCODINGS, DOWNSAMPLES, (True, False))
    ]


def build_variant(base: ModelConfig, spec: AblationSpec, seed: int = 0, state: dict | None = None):
    from hit.model import HiT

    if state is None:
        return HiT.init(base, spec, seed=seed)
    return HiT(base, state, spec)
