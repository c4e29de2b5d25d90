"""Dense float32 kernels shared by every layer.

Tokens are 2-D ``(T, C)`` arrays, images are 3-D ``(H, W, C)`` arrays, both
row-major ``np.float32``. Linear weights are ``(in, out)``; convolution
weights are ``(kh, kw, cin, cout)``.

Every multiply-accumulate performed through this module is reported to the
active :class:`MacCounter` (if any), which is how the analytic cost model in
:mod:`hit.bench.cost` is cross-checked against a real forward pass.
"""
from __future__ import annotations

import contextlib
import contextvars
from collections import defaultdict
from typing import Iterator

import numpy as np

from hit.errors import DimensionError

DTYPE = np.float32


class MacCounter:
    def __init__(self) -> None:
        self.total = 0
        self.by_scope: dict[str, int] = defaultdict(int)
        self._scope: list[str] = []

    def add(self, n: int) -> None:
        self.total += int(n)
        self.by_scope[".".join(self._scope)] += int(n)

    def scoped(self, prefix: str) -> int:
        """MACs recorded under ``prefix`` or any of its sub-scopes."""
        return sum(v for k, v in self.by_scope.items() if k == prefix or k.startswith(prefix + "."))


_counter: contextvars.ContextVar[MacCounter | None] = contextvars.ContextVar("mac_counter", default=None)


@contextlib.contextmanager
def count_macs() -> Iterator[MacCounter]:
    counter = MacCounter()
    token = _counter.set(counter)
    try:
        yield counter
    finally:
        _counter.reset(token)


@contextlib.contextmanager
def mac_scope(name: str) -> Iterator[None]:
    counter = _counter.get()
    if counter is None:
        yield
        return
    counter._scope.append(name)
    try:
        yield
    finally:
        counter._scope.pop()


def _tally(n: int) -> None:
    counter = _counter.get()
    if counter is not None:
        counter.add(n)


def as_tensor(x) -> np.ndarray:
    return np.ascontiguousarray(x, dtype=DTYPE)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    _tally(a.shape[0] * a.shape[1] * b.shape[1])
    return np.matmul(a, b, dtype=DTYPE)


def batched_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Head-batched product ``(N, m, k) @ (N, k, n)``."""
    if a.ndim != 3 or b.ndim != 3 or a.shape[0] != b.shape[0] or a.shape[2] != b.shape[1]:
        raise DimensionError(f"batched_matmul: cannot multiply {a.shape} by {b.shape}")
    _tally(a.shape[0] * a.shape[1] * a.shape[2] * b.shape[2])
    return np.matmul(a, b, dtype=DTYPE)


def softmax_rows(x: np.ndarray) -> np.ndarray:
    """Softmax over the last axis, max-shifted."""
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z, dtype=DTYPE)
    return (e / e.sum(axis=-1, keepdims=True)).astype(DTYPE, copy=False)


def hardswish(x: np.ndarray) -> np.ndarray:
    return (x * np.clip(x + 3.0, 0.0, 6.0) / 6.0).astype(DTYPE, copy=False)


def linear(x: np.ndarray, w: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[0]:
        raise DimensionError(f"linear: input {x.shape} does not fit weight {w.shape}")
    y = matmul(x, w)
    if b is not None:
        if b.shape != (w.shape[1],):
            raise DimensionError(f"linear: bias {b.shape} does not fit weight {w.shape}")
        y += b
    return y


def add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape != b.shape:
        raise DimensionError(f"add: shapes {a.shape} and {b.shape} differ")
    return a + b


def concat_tokens(*parts: np.ndarray) -> np.ndarray:
    channels = {p.shape[1] for p in parts}
    if len(channels) != 1 or any(p.ndim != 2 for p in parts):
        raise DimensionError(f"concat_tokens: incompatible shapes {[p.shape for p in parts]}")
    return np.concatenate(parts, axis=0)


def reshape(x: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if int(np.prod(shape)) != x.size:
        raise DimensionError(f"reshape: {x.shape} has {x.size} elements, {shape} needs {int(np.prod(shape))}")
    return x.reshape(shape)


def tokens_to_grid(x: np.ndarray, h: int, w: int) -> np.ndarray:
    return reshape(x, (h, w, x.shape[-1]))


def grid_to_tokens(x: np.ndarray) -> np.ndarray:
    return x.reshape(-1, x.shape[-1])


def subsample2x(x: np.ndarray) -> np.ndarray:
    """Keep even rows and even columns of an ``(H, W, C)`` map."""
    if x.ndim != 3:
        raise DimensionError(f"subsample2x expects (H, W, C), got {x.shape}")
    return np.ascontiguousarray(x[::2, ::2])


def _pad_hw(x: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return x
    return np.pad(x, ((pad, pad), (pad, pad), (0, 0)))


def conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray | None = None, stride: int = 1, pad: int = 0) -> np.ndarray:
    if x.ndim != 3 or w.ndim != 4 or x.shape[2] != w.shape[2]:
        raise DimensionError(f"conv2d: input {x.shape} does not fit weight {w.shape}")
    kh, kw, cin, cout = w.shape
    xp = _pad_hw(x, pad)
    ho = (xp.shape[0] - kh) // stride + 1
    wo = (xp.shape[1] - kw) // stride + 1
    if ho < 1 or wo < 1:
        raise DimensionError(f"conv2d: kernel {w.shape[:2]} larger than padded input {xp.shape[:2]}")
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(0, 1))
    win = win[: (ho - 1) * stride + 1 : stride, : (wo - 1) * stride + 1 : stride]
    # win: (ho, wo, cin, kh, kw) -> columns ordered (kh, kw, cin) to match w
    cols = np.ascontiguousarray(win.transpose(0, 1, 3, 4, 2)).reshape(ho * wo, kh * kw * cin)
    y = matmul(cols, w.reshape(kh * kw * cin, cout)).reshape(ho, wo, cout)
    if b is not None:
        y += b
    return y


def transpose_conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray | None = None, stride: int = 2) -> np.ndarray:
    """Transposed convolution, no padding: output extent ``(H-1)*stride + k``.

    With the 2x2, stride-2 kernels used throughout this package the output is
    exactly twice the input in each spatial direction.
    """
    if x.ndim != 3 or w.ndim != 4 or x.shape[2] != w.shape[2]:
        raise DimensionError(f"transpose_conv2d: input {x.shape} does not fit weight {w.shape}")
    h, wd, cin = x.shape
    kh, kw, _, cout = w.shape
    ho, wo = (h - 1) * stride + kh, (wd - 1) * stride + kw
    flat = x.reshape(h * wd, cin)
    y = np.zeros((ho, wo, cout), dtype=DTYPE)
    for i in range(kh):
        for j in range(kw):
            tap = matmul(flat, w[i, j]).reshape(h, wd, cout)
            y[i : i + (h - 1) * stride + 1 : stride, j : j + (wd - 1) * stride + 1 : stride] += tap
    if b is not None:
        y += b
    return y


def zero_insert(x: np.ndarray, stride: int) -> np.ndarray:
    """Insert ``stride - 1`` zeros between neighbouring pixels."""
    h, w, c = x.shape
    out = np.zeros(((h - 1) * stride + 1, (w - 1) * stride + 1, c), dtype=DTYPE)
    out[::stride, ::stride] = x
    return out


def fold_norm(scale: np.ndarray, shift: np.ndarray, w: np.ndarray, b: np.ndarray | None = None):
    """Fold a per-output-channel affine ``y*scale + shift`` into the preceding layer.

    Works for linear ``(in, out)`` and conv ``(kh, kw, cin, out)`` weights alike;
    returns the folded ``(w, b)``.
    """
    cout = w.shape[-1]
    if scale.shape != (cout,) or shift.shape != (cout,):
        raise DimensionError(f"fold_norm: affine {scale.shape}/{shift.shape} does not fit {cout} output channels")
    if b is None:
        b = np.zeros(cout, dtype=DTYPE)
    return (w * scale).astype(DTYPE), (b * scale + shift).astype(DTYPE)
