"""Hierarchical transformer backbone over a joint (search, template) token set."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from hit import tensor as T
from hit.attention import (
    MhaLayer,
    MlpBlock,
    ShrinkLayer,
    SubsampleLayer,
    mha_forward,
    mlp_block,
    shrink_forward,
    subsample_downsample,
)
from hit.errors import DimensionError
from hit.posenc import Arrangement, Kind, absolute_encoding

SHRINK = "shrink"
SUBSAMPLE = "subsample"


@dataclass(frozen=True)
class ModelConfig:
    variant: str
    key_dim: int
    blocks: tuple[int, int, int]
    channels: tuple[int, int, int]
    mha_heads: tuple[int, int, int]
    sa_heads: tuple[int, int]
    sa_stride: int = 2
    search_size: int = 256
    template_size: int = 128
    patch_stride: int = 16
    mlp_ratio: int = 2
    head_channels: int = 384

    @classmethod
    def base(cls) -> "ModelConfig":
        return cls("base", 32, (4, 4, 4), (384, 512, 768), (6, 9, 12), (12, 18))

    @classmethod
    def small(cls) -> "ModelConfig":
        return cls("small", 16, (4, 4, 4), (128, 256, 384), (4, 8, 12), (8, 16))

    @classmethod
    def tiny(cls) -> "ModelConfig":
        return cls("tiny", 16, (2, 3, 4), (128, 256, 384), (4, 6, 8), (8, 16))

    @classmethod
    def named(cls, variant: str) -> "ModelConfig":
        try:
            return {"base": cls.base, "small": cls.small, "tiny": cls.tiny}[variant.lower()]()
        except KeyError:
            raise ValueError(f"unknown variant {variant!r}; expected base, small or tiny") from None

    @property
    def search_grid(self) -> int:
        return self.search_size // self.patch_stride

    @property
    def template_grid(self) -> int:
        return self.template_size // self.patch_stride

    def arrangement(self, kind: Kind = Kind.DIAGONAL, stage: int = 1) -> Arrangement:
        """Token arrangement at the input of ``stage`` (1-based)."""
        s, t = self.search_grid >> (stage - 1), self.template_grid >> (stage - 1)
        return Arrangement(kind, (s, s), (t, t))


@dataclass
class FeaturePyramid:
    s_max: np.ndarray  # (16, 16, C1)
    s_mid: np.ndarray  # (8, 8, C2)
    s_min: np.ndarray  # (4, 4, C3)
    g: np.ndarray  # (1, C3)
    stage_tokens: list[np.ndarray] = field(default_factory=list, repr=False)


def embed_channels(c1: int) -> list[int]:
    return [3, c1 // 8, c1 // 4, c1 // 2, c1]


@dataclass
class PatchEmbed:
    """Four 3x3 stride-2 conv + per-channel affine layers, hardswish between them."""

    convs: list[tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]]  # (w, b, scale, shift)

    @staticmethod
    def param_shapes(c1: int) -> dict:
        ch = embed_channels(c1)
        shapes = {}
        for i in range(4):
            p = f"embed.conv{i}"
            shapes[f"{p}.w"] = (3, 3, ch[i], ch[i + 1])
            shapes[f"{p}.b"] = (ch[i + 1],)
            shapes[f"{p}.scale"] = (ch[i + 1],)
            shapes[f"{p}.shift"] = (ch[i + 1],)
        return shapes

    @classmethod
    def from_state(cls, state: dict) -> "PatchEmbed":
        return cls([tuple(state[f"embed.conv{i}.{n}"] for n in ("w", "b", "scale", "shift")) for i in range(4)])

    def folded(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return [T.fold_norm(scale, shift, w, b) for w, b, scale, shift in self.convs]


def patch_embed(embed: PatchEmbed, image: np.ndarray) -> np.ndarray:
    h, w, c = image.shape
    if c != 3 or h % 16 or w % 16:
        raise DimensionError(f"patch embedding needs (H, W, 3) with H, W divisible by 16, got {image.shape}")
    x = image
    for i, (wt, b, scale, shift) in enumerate(embed.convs):
        x = T.conv2d(x, wt, b, stride=2, pad=1) * scale + shift
        if i < 3:
            x = T.hardswish(x)
    return T.grid_to_tokens(x)


def stage_token_split(tokens: np.ndarray, arr: Arrangement) -> tuple[np.ndarray, np.ndarray]:
    if tokens.shape[0] != arr.tokens:
        raise DimensionError(f"{tokens.shape[0]} tokens do not match arrangement with {arr.tokens}")
    return tokens[: arr.search_tokens], tokens[arr.search_tokens :]


class Backbone:
    def __init__(self, cfg: ModelConfig, state: dict, pos_enc: Kind = Kind.DIAGONAL, downsample: str = SHRINK):
        self.cfg = cfg
        self.pos_enc = Kind(pos_enc)
        self.downsample = downsample
        self.embed = PatchEmbed.from_state(state)
        self.stages: list[list[tuple[MhaLayer, MlpBlock]]] = []
        for s in range(3):
            self.stages.append(
                [
                    (
                        MhaLayer.from_state(state, f"stage{s + 1}.block{k}.attn", cfg.mha_heads[s], cfg.key_dim),
                        MlpBlock.from_state(state, f"stage{s + 1}.block{k}.mlp"),
                    )
                    for k in range(cfg.blocks[s])
                ]
            )
        self.junctions = []
        for j in range(2):
            p = f"sa{j + 1}"
            if downsample == SHRINK:
                down = ShrinkLayer.from_state(state, p, cfg.sa_heads[j], cfg.key_dim)
            else:
                down = SubsampleLayer.from_state(state, p)
            self.junctions.append((down, MlpBlock.from_state(state, f"{p}.mlp")))
        if self.pos_enc is Kind.ABSOLUTE:
            c1 = cfg.channels[0]
            self.abs_search = absolute_encoding((cfg.search_grid,) * 2, c1)
            self.abs_template = absolute_encoding((cfg.template_grid,) * 2, c1)

    @staticmethod
    def param_shapes(cfg: ModelConfig, pos_enc: Kind = Kind.DIAGONAL, downsample: str = SHRINK) -> dict:
        relative = Kind(pos_enc).relative
        shapes = PatchEmbed.param_shapes(cfg.channels[0])
        for s in range(3):
            extent = cfg.arrangement(pos_enc, s + 1).table_extent() if relative else None
            for k in range(cfg.blocks[s]):
                p = f"stage{s + 1}.block{k}"
                shapes.update(MhaLayer.param_shapes(f"{p}.attn", cfg.channels[s], cfg.mha_heads[s], cfg.key_dim, extent))
                shapes.update(MlpBlock.param_shapes(f"{p}.mlp", cfg.channels[s], cfg.mlp_ratio))
            if s < 2:
                c, cn = cfg.channels[s], cfg.channels[s + 1]
                if downsample == SHRINK:
                    shapes.update(ShrinkLayer.param_shapes(f"sa{s + 1}", c, cn, cfg.sa_heads[s], cfg.key_dim, extent))
                elif downsample == SUBSAMPLE:
                    shapes.update(SubsampleLayer.param_shapes(f"sa{s + 1}", c, cn))
                else:
                    raise ValueError(f"unknown downsample mode {downsample!r}")
                shapes.update(MlpBlock.param_shapes(f"sa{s + 1}.mlp", cn, cfg.mlp_ratio))
        return shapes

    def __call__(self, z: np.ndarray, x: np.ndarray) -> FeaturePyramid:
        return backbone_forward(self, z, x)


def backbone_forward(bb: Backbone, z: np.ndarray, x: np.ndarray) -> FeaturePyramid:
    cfg = bb.cfg
    if z.shape != (cfg.template_size, cfg.template_size, 3) or x.shape != (cfg.search_size, cfg.search_size, 3):
        raise DimensionError(
            f"expected template {(cfg.template_size,) * 2 + (3,)} and search {(cfg.search_size,) * 2 + (3,)}, "
            f"got {z.shape} and {x.shape}"
        )
    with T.mac_scope("embed"):
        xs = patch_embed(bb.embed, x)
        zs = patch_embed(bb.embed, z)
    if bb.pos_enc is Kind.ABSOLUTE:
        xs = xs + bb.abs_search
        zs = zs + bb.abs_template
    tokens = T.concat_tokens(xs, zs)
    arr = cfg.arrangement(bb.pos_enc)
    maps, stage_tokens = [], []
    for s, blocks in enumerate(bb.stages):
        with T.mac_scope(f"stage{s + 1}"):
            for k, (attn, mlp) in enumerate(blocks):
                with T.mac_scope(f"block{k}"):
                    tokens = tokens + mha_forward(attn, tokens, arr)
                    tokens = mlp_block(mlp, tokens)
        stage_tokens.append(tokens)
        search, _ = stage_token_split(tokens, arr)
        ws, hs = arr.search_extent
        maps.append(T.tokens_to_grid(search, hs, ws))
        if s < 2:
            down, mlp = bb.junctions[s]
            with T.mac_scope(f"sa{s + 1}"):
                if isinstance(down, ShrinkLayer):
                    tokens, arr = shrink_forward(down, tokens, arr)
                else:
                    tokens, arr = subsample_downsample(down, tokens, arr)
                tokens = mlp_block(mlp, tokens)
    g = tokens.mean(axis=0, keepdims=True, dtype=T.DTYPE)
    return FeaturePyramid(maps[0], maps[1], maps[2], g, stage_tokens)
