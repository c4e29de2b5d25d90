"""Attention operators: multi-head attention with additive position bias,
shrink attention (query subsampling per image), plain subsampling, and the
residual MLP that completes a block.

All projections are inference-form linears whose bias already carries the
folded normalization.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hit import tensor as T
from hit.errors import DimensionError
from hit.posenc import Arrangement, BiasTable, token_coords


@dataclass
class Linear:
    w: np.ndarray  # (in, out)
    b: np.ndarray

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return T.linear(x, self.w, self.b)

    @property
    def shape(self) -> tuple[int, int]:
        return self.w.shape

    @staticmethod
    def param_shapes(prefix: str, n_in: int, n_out: int, w: str = "w", b: str = "b") -> dict:
        return {f"{prefix}.{w}": (n_in, n_out), f"{prefix}.{b}": (n_out,)}

    @classmethod
    def from_state(cls, state: dict, prefix: str, w: str = "w", b: str = "b") -> "Linear":
        return cls(state[f"{prefix}.{w}"], state[f"{prefix}.{b}"])


def _split_heads(x: np.ndarray, heads: int) -> np.ndarray:
    t, c = x.shape
    return x.reshape(t, heads, c // heads).transpose(1, 0, 2)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    n, t, d = x.shape
    return np.ascontiguousarray(x.transpose(1, 0, 2)).reshape(t, n * d)


def _attend(q: np.ndarray, k: np.ndarray, v: np.ndarray, key_dim: int, bias: np.ndarray | None) -> np.ndarray:
    """Per-head ``hardswish(softmax(QK^T/sqrt(D) + B) V)``; inputs are ``(N, T, d)``."""
    logits = T.batched_matmul(q, np.ascontiguousarray(k.transpose(0, 2, 1))) * np.float32(key_dim**-0.5)
    if bias is not None:
        logits = logits + bias
    attn = T.softmax_rows(logits)
    return T.hardswish(T.batched_matmul(attn, v))


def _attention_inputs(layer, tokens: np.ndarray, arr: Arrangement) -> None:
    if tokens.shape[0] != arr.tokens:
        raise DimensionError(f"{tokens.shape[0]} tokens do not match arrangement with {arr.tokens}")
    if tokens.shape[1] != layer.wq.shape[0]:
        raise DimensionError(f"{tokens.shape[1]} channels do not match projection input {layer.wq.shape[0]}")


@dataclass
class MhaLayer:
    heads: int
    key_dim: int
    wq: Linear  # C -> N*D
    wk: Linear  # C -> N*D
    wv: Linear  # C -> N*2D
    wo: Linear  # N*2D -> C
    bias_table: BiasTable | None = None

    def __post_init__(self):
        n, d = self.heads, self.key_dim
        if self.wq.shape[1] != n * d or self.wk.shape[1] != n * d:
            raise DimensionError(f"query/key projections must produce {n}x{d} channels")
        if self.wv.shape[1] != 2 * n * d or self.wo.shape[0] != 2 * n * d:
            raise DimensionError(f"value width must be 2*D per head ({2 * n * d} total)")

    @staticmethod
    def param_shapes(prefix: str, channels: int, heads: int, key_dim: int, table_extent=None) -> dict:
        nd = heads * key_dim
        shapes = {}
        shapes.update(Linear.param_shapes(prefix, channels, nd, "wq", "bq"))
        shapes.update(Linear.param_shapes(prefix, channels, nd, "wk", "bk"))
        shapes.update(Linear.param_shapes(prefix, channels, 2 * nd, "wv", "bv"))
        shapes.update(Linear.param_shapes(prefix, 2 * nd, channels, "wo", "bo"))
        if table_extent is not None:
            shapes[f"{prefix}.bias"] = (heads, *table_extent)
        return shapes

    @classmethod
    def from_state(cls, state: dict, prefix: str, heads: int, key_dim: int) -> "MhaLayer":
        table = state.get(f"{prefix}.bias")
        return cls(
            heads,
            key_dim,
            *(Linear.from_state(state, prefix, f"w{p}", f"b{p}") for p in "qkvo"),
            bias_table=None if table is None else BiasTable(table),
        )


def mha_forward(layer: MhaLayer, tokens: np.ndarray, arr: Arrangement) -> np.ndarray:
    """Multi-head attention over the joint token set; no residual here."""
    _attention_inputs(layer, tokens, arr)
    n = layer.heads
    q = _split_heads(layer.wq(tokens), n)
    k = _split_heads(layer.wk(tokens), n)
    v = _split_heads(layer.wv(tokens), n)
    bias = None
    if layer.bias_table is not None:
        coords = token_coords(arr)
        bias = layer.bias_table.lookup(coords, coords)
    return layer.wo(_merge_heads(_attend(q, k, v, layer.key_dim, bias)))


def _check_even(arr: Arrangement) -> None:
    for e in (*arr.search_extent, *arr.template_extent):
        if e % 2:
            raise DimensionError(f"downsampling requires even grid extents, got {arr}")


def subsample_tokens(tokens: np.ndarray, arr: Arrangement) -> np.ndarray:
    """Split by image, keep even rows/cols of each grid, re-flatten, search first."""
    ws, hs = arr.search_extent
    wt, ht = arr.template_extent
    search = T.subsample2x(T.tokens_to_grid(tokens[: arr.search_tokens], hs, ws))
    template = T.subsample2x(T.tokens_to_grid(tokens[arr.search_tokens :], ht, wt))
    return T.concat_tokens(T.grid_to_tokens(search), T.grid_to_tokens(template))


@dataclass
class ShrinkLayer:
    heads: int
    key_dim: int
    wq: Linear  # C -> N*D, applied to subsampled tokens
    wk: Linear  # C -> N*D
    wv: Linear  # C -> N*4D
    wo: Linear  # N*4D -> C_next
    bias_table: BiasTable | None = None
    stride: int = 2

    def __post_init__(self):
        n, d = self.heads, self.key_dim
        if self.wv.shape[1] != 4 * n * d or self.wo.shape[0] != 4 * n * d:
            raise DimensionError(f"shrink value width must be 4*D per head ({4 * n * d} total)")
        if self.wo.shape[1] <= self.wq.shape[0]:
            raise DimensionError("shrink attention must increase the channel count")

    @staticmethod
    def param_shapes(prefix: str, channels: int, channels_next: int, heads: int, key_dim: int, table_extent=None):
        nd = heads * key_dim
        shapes = {}
        shapes.update(Linear.param_shapes(prefix, channels, nd, "wq", "bq"))
        shapes.update(Linear.param_shapes(prefix, channels, nd, "wk", "bk"))
        shapes.update(Linear.param_shapes(prefix, channels, 4 * nd, "wv", "bv"))
        shapes.update(Linear.param_shapes(prefix, 4 * nd, channels_next, "wo", "bo"))
        if table_extent is not None:
            shapes[f"{prefix}.bias"] = (heads, *table_extent)
        return shapes

    @classmethod
    def from_state(cls, state: dict, prefix: str, heads: int, key_dim: int) -> "ShrinkLayer":
        table = state.get(f"{prefix}.bias")
        return cls(
            heads,
            key_dim,
            *(Linear.from_state(state, prefix, f"w{p}", f"b{p}") for p in "qkvo"),
            bias_table=None if table is None else BiasTable(table),
        )


def shrink_forward(layer: ShrinkLayer, tokens: np.ndarray, arr: Arrangement) -> tuple[np.ndarray, Arrangement]:
    """Shrink attention: queries from the subsampled grids, keys/values at full resolution.

    Query positions in the bias lookup are the kept pixels' full-resolution
    plane coordinates, so one table serves both sides.
    """
    _attention_inputs(layer, tokens, arr)
    _check_even(arr)
    n = layer.heads
    q = _split_heads(layer.wq(subsample_tokens(tokens, arr)), n)
    k = _split_heads(layer.wk(tokens), n)
    v = _split_heads(layer.wv(tokens), n)
    bias = None
    if layer.bias_table is not None:
        bias = layer.bias_table.lookup(token_coords(arr, step=2), token_coords(arr))
    out = layer.wo(_merge_heads(_attend(q, k, v, layer.key_dim, bias)))
    return out, arr.halved()


@dataclass
class SubsampleLayer:
    """Downsampling ablation: even-index subsampling plus a channel projection."""

    proj: Linear

    @staticmethod
    def param_shapes(prefix: str, channels: int, channels_next: int) -> dict:
        return Linear.param_shapes(f"{prefix}.proj", channels, channels_next)

    @classmethod
    def from_state(cls, state: dict, prefix: str) -> "SubsampleLayer":
        return cls(Linear.from_state(state, f"{prefix}.proj"))


def subsample_downsample(layer: SubsampleLayer, tokens: np.ndarray, arr: Arrangement) -> tuple[np.ndarray, Arrangement]:
    if tokens.shape[0] != arr.tokens:
        raise DimensionError(f"{tokens.shape[0]} tokens do not match arrangement with {arr.tokens}")
    _check_even(arr)
    return layer.proj(subsample_tokens(tokens, arr)), arr.halved()


@dataclass
class MlpBlock:
    fc1: Linear  # C -> 2C
    fc2: Linear  # 2C -> C

    @staticmethod
    def param_shapes(prefix: str, channels: int, ratio: int = 2) -> dict:
        shapes = Linear.param_shapes(prefix, channels, ratio * channels, "w1", "b1")
        shapes.update(Linear.param_shapes(prefix, ratio * channels, channels, "w2", "b2"))
        return shapes

    @classmethod
    def from_state(cls, state: dict, prefix: str) -> "MlpBlock":
        return cls(Linear.from_state(state, prefix, "w1", "b1"), Linear.from_state(state, prefix, "w2", "b2"))


def mlp_block(layer: MlpBlock, tokens: np.ndarray) -> np.ndarray:
    return tokens + layer.fc2(T.hardswish(layer.fc1(tokens)))
