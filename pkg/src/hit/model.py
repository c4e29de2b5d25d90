"""The assembled tracker network: backbone -> bridge -> corner head."""
from __future__ import annotations

import math

import numpy as np

from hit import tensor as T
from hit.ablation import AblationSpec
from hit.backbone import Backbone, FeaturePyramid, ModelConfig
from hit.bridge import Bridge
from hit.head import BoxNorm, CornerHead


def param_shapes(cfg: ModelConfig, spec: AblationSpec = AblationSpec()) -> dict[str, tuple[int, ...]]:
    shapes = Backbone.param_shapes(cfg, spec.pos_enc, spec.downsample)
    shapes.update(Bridge.param_shapes(cfg, spec.bridge))
    shapes.update(CornerHead.param_shapes(cfg, spec.use_g))
    return shapes


def _fan_in(name: str, shape: tuple[int, ...]) -> int:
    if len(shape) == 2:
        return shape[0]
    if name.startswith("bridge.up"):
        return shape[2]  # 2x2 stride-2 transpose: each output sees one input pixel
    return shape[0] * shape[1] * shape[2]


def _weight_name(bias_name: str) -> str:
    head, _, leaf = bias_name.rpartition(".")
    return f"{head}.w{leaf[1:]}"


def init_state(shapes: dict[str, tuple[int, ...]], seed: int = 0) -> dict[str, np.ndarray]:
    """Uniform(+-1/sqrt(fan_in)) weights and biases, unit scales, zero shifts and bias tables."""
    rng = np.random.default_rng(seed)
    state = {}
    for name, shape in shapes.items():
        leaf = name.rpartition(".")[2]
        if leaf == "bias" or leaf == "shift":
            state[name] = np.zeros(shape, dtype=T.DTYPE)
        elif leaf == "scale":
            state[name] = np.ones(shape, dtype=T.DTYPE)
        else:
            ref = name if leaf.startswith("w") else _weight_name(name)
            bound = 1.0 / math.sqrt(_fan_in(ref, shapes[ref]))
            state[name] = rng.uniform(-bound, bound, size=shape).astype(T.DTYPE)
    return state


class HiT:
    def __init__(self, cfg: ModelConfig, state: dict[str, np.ndarray], spec: AblationSpec = AblationSpec()):
        self.cfg = cfg
        self.spec = spec
        self.state = state
        self.backbone = Backbone(cfg, state, spec.pos_enc, spec.downsample)
        self.bridge = Bridge(cfg, spec.bridge, state)
        self.head = CornerHead(cfg, state, spec.use_g)

    @classmethod
    def init(cls, cfg: ModelConfig, spec: AblationSpec = AblationSpec(), seed: int = 0) -> "HiT":
        return cls(cfg, init_state(param_shapes(cfg, spec), seed), spec)

    def features(self, z: np.ndarray, x: np.ndarray) -> tuple[FeaturePyramid, np.ndarray]:
        fp = self.backbone(z, x)
        return fp, self.bridge(fp)

    def __call__(self, z: np.ndarray, x: np.ndarray) -> BoxNorm:
        fp, os = self.features(z, x)
        return self.head(fp.g, os)

    @property
    def num_params(self) -> int:
        return sum(int(v.size) for v in self.state.values())
