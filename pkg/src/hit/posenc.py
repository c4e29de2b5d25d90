"""Joint relative position encoding for a (search, template) token pair.

Both images live on one shared coordinate plane. The search grid sits at the
origin; the template grid is shifted by an offset that depends on the
arrangement. Attention bias for a token pair is looked up in a learned
per-head table at ``(|dx|, |dy|)`` of their plane coordinates.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from hit.errors import DimensionError
from hit.tensor import DTYPE


class Kind(str, enum.Enum):
    DIAGONAL = "diagonal"
    VERTICAL = "vertical"
    HORIZONTAL = "horizontal"
    SEPARATE = "separate"
    ABSOLUTE = "absolute"

    @property
    def relative(self) -> bool:
        return self is not Kind.ABSOLUTE


class Image(str, enum.Enum):
    SEARCH = "search"
    TEMPLATE = "template"


@dataclass(frozen=True)
class Arrangement:
    kind: Kind
    search_extent: tuple[int, int]  # (W_s, H_s) in tokens
    template_extent: tuple[int, int]  # (W_t, H_t)

    @property
    def template_offset(self) -> tuple[int, int]:
        ws, hs = self.search_extent
        return {
            Kind.DIAGONAL: (ws, hs),
            Kind.VERTICAL: (0, hs),
            Kind.HORIZONTAL: (ws, 0),
            Kind.SEPARATE: (0, 0),
            Kind.ABSOLUTE: (0, 0),
        }[self.kind]

    @property
    def search_tokens(self) -> int:
        return self.search_extent[0] * self.search_extent[1]

    @property
    def template_tokens(self) -> int:
        return self.template_extent[0] * self.template_extent[1]

    @property
    def tokens(self) -> int:
        return self.search_tokens + self.template_tokens

    def halved(self) -> "Arrangement":
        """Arrangement after 2x subsampling of both grids (offset is recomputed)."""
        half = lambda e: ((e[0] + 1) // 2, (e[1] + 1) // 2)  # noqa: E731
        return Arrangement(self.kind, half(self.search_extent), half(self.template_extent))

    def table_extent(self) -> tuple[int, int]:
        """Bias-table extent ``(X, Y)`` shared by every relative arrangement.

        Sized for the largest reach over all arrangements of these grids, so
        swapping the arrangement never changes the parameter count.
        """
        (ws, hs), (wt, ht) = self.search_extent, self.template_extent
        return ws + wt, hs + ht


def global_coord(arr: Arrangement, image: Image, local: tuple[int, int]) -> tuple[int, int]:
    x, y = local
    w, h = arr.search_extent if image is Image.SEARCH else arr.template_extent
    if not (0 <= x < w and 0 <= y < h):
        raise DimensionError(f"local coordinate {local} outside {image.value} extent {(w, h)}")
    if image is Image.SEARCH:
        return x, y
    dx, dy = arr.template_offset
    return x + dx, y + dy


def relative_index(p: tuple[int, int], q: tuple[int, int]) -> tuple[int, int]:
    return abs(p[0] - q[0]), abs(p[1] - q[1])


def _grid_coords(extent: tuple[int, int], offset: tuple[int, int], step: int = 1) -> np.ndarray:
    w, h = extent
    ys, xs = np.meshgrid(np.arange(0, h, step), np.arange(0, w, step), indexing="ij")
    return np.stack([xs.ravel() + offset[0], ys.ravel() + offset[1]], axis=1)


def token_coords(arr: Arrangement, step: int = 1) -> np.ndarray:
    """Plane coordinates ``(T, 2)`` of all tokens, search first, raster order.

    ``step=2`` yields the coordinates of the pixels kept by even-index
    subsampling, still expressed on the full-resolution plane.
    """
    return np.concatenate(
        [
            _grid_coords(arr.search_extent, (0, 0), step),
            _grid_coords(arr.template_extent, arr.template_offset, step),
        ]
    )


def coordinate_overlap(arr: Arrangement) -> tuple[bool, bool]:
    """Whether the template's x (resp. y) range intersects the search's."""
    (ws, hs), (wt, ht) = arr.search_extent, arr.template_extent
    dx, dy = arr.template_offset
    x_overlap = dx < ws and dx + wt > 0
    y_overlap = dy < hs and dy + ht > 0
    return x_overlap, y_overlap


@dataclass
class BiasTable:
    table: np.ndarray  # (heads, X, Y)

    @classmethod
    def zeros(cls, heads: int, extent: tuple[int, int]) -> "BiasTable":
        return cls(np.zeros((heads, *extent), dtype=DTYPE))

    @property
    def heads(self) -> int:
        return self.table.shape[0]

    def lookup(self, q_coords: np.ndarray, k_coords: np.ndarray) -> np.ndarray:
        """Bias for every head and (query, key) pair: ``(heads, Tq, Tk)``."""
        d = np.abs(q_coords[:, None, :] - k_coords[None, :, :])
        if d.size and (d[..., 0].max() >= self.table.shape[1] or d[..., 1].max() >= self.table.shape[2]):
            raise DimensionError(
                f"bias table extent {self.table.shape[1:]} too small for relative reach "
                f"{(int(d[..., 0].max()) + 1, int(d[..., 1].max()) + 1)}"
            )
        return self.table[:, d[..., 0], d[..., 1]]


def build_bias_matrix(arr: Arrangement, table: BiasTable, head: int) -> np.ndarray:
    coords = token_coords(arr)
    return table.lookup(coords, coords)[head]


def absolute_encoding(extent: tuple[int, int], channels: int) -> np.ndarray:
    """Fixed 2-D sinusoidal encoding, ``(W*H, channels)`` in raster order.

    The first half of the channels encodes x, the second half y; within each
    half, even slots hold sines and odd slots cosines at geometric frequencies.
    """
    if channels % 2:
        raise DimensionError(f"absolute encoding needs an even channel count, got {channels}")
    w, h = extent
    coords = _grid_coords(extent, (0, 0)).astype(np.float64)
    out = np.zeros((w * h, channels), dtype=np.float64)
    half = channels // 2
    for axis, base in ((0, 0), (1, half)):
        n = half
        for k in range(0, n, 2):
            freq = 1.0 / 10000 ** (k / n)
            out[:, base + k] = np.sin(coords[:, axis] * freq)
            if k + 1 < n:
                out[:, base + k + 1] = np.cos(coords[:, axis] * freq)
    return out.astype(DTYPE)
