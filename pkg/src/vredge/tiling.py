"""Tile-plane geometry: viewpoints, field-of-view tile sets, per-tile size.

Conventions used throughout the package:
  - Tiles are numbered 1..N row-major over the 2D plane (N = n_rows * n_cols).
  - Viewpoints are numbered 1..K row-major over the anchor grid; a viewpoint's
    anchor is the (row, col) of its FoV's top-left tile.
Both are 1-based; cache contents, action vectors, and popularity vectors all
use this id scheme.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache


@dataclass(frozen=True)
class TileGrid:
    """Immutable tile-plane geometry plus the total video size in bits."""

    n_rows: int
    n_cols: int
    fov_rows: int
    fov_cols: int
    delta_h: int = 1
    delta_v: int = 1
    total_bits: int = 5_250_000_000

    def __post_init__(self):
        if self.n_rows < 1 or self.n_cols < 1:
            raise ValueError("grid must have at least one row and column")
        if not (1 <= self.fov_rows <= self.n_rows and 1 <= self.fov_cols <= self.n_cols):
            raise ValueError("FoV must fit inside the grid")
        if self.delta_h < 1 or self.delta_v < 1:
            raise ValueError("anchor strides must be >= 1")
        if (self.n_cols - self.fov_cols) % self.delta_h != 0:
            raise ValueError("(n_cols - fov_cols) must be divisible by delta_h")
        if (self.n_rows - self.fov_rows) % self.delta_v != 0:
            raise ValueError("(n_rows - fov_rows) must be divisible by delta_v")
        if self.total_bits % (self.n_rows * self.n_cols) != 0:
            raise ValueError("total_bits must divide exactly into n_rows * n_cols tiles")

    @property
    def n_tiles(self) -> int:
        return self.n_rows * self.n_cols

    @property
    def fov_size(self) -> int:
        """Number of tiles in one FoV (constant across viewpoints)."""
        return self.fov_rows * self.fov_cols

    @property
    def tile_bits(self) -> int:
        """Exact per-tile size in bits; tile_bits * n_tiles == total_bits."""
        return self.total_bits // self.n_tiles

    @property
    def anchor_cols(self) -> int:
        return (self.n_cols - self.fov_cols) // self.delta_h + 1

    @property
    def anchor_rows(self) -> int:
        return (self.n_rows - self.fov_rows) // self.delta_v + 1


def viewpoint_count(grid: TileGrid) -> int:
    """Number of distinct viewpoints K on the anchor grid."""
    return grid.anchor_cols * grid.anchor_rows


def anchor(grid: TileGrid, k: int) -> tuple[int, int]:
    """(row, col) of the top-left tile of viewpoint k's FoV, 1-based."""
    kmax = viewpoint_count(grid)
    if not 1 <= k <= kmax:
        raise ValueError(f"viewpoint index {k} outside [1, {kmax}]")
    ar, ac = divmod(k - 1, grid.anchor_cols)
    return ar * grid.delta_v + 1, ac * grid.delta_h + 1


@lru_cache(maxsize=None)
def fov_tiles(grid: TileGrid, k: int) -> tuple[int, ...]:
    """Sorted tile ids covered by the FoV anchored at viewpoint k."""
    row0, col0 = anchor(grid, k)
    tiles = []
    for r in range(row0, row0 + grid.fov_rows):
        base = (r - 1) * grid.n_cols
        tiles.extend(base + c for c in range(col0, col0 + grid.fov_cols))
    return tuple(tiles)


def overlap(grid: TileGrid, k1: int, k2: int) -> tuple[int, ...]:
    """Sorted tile ids shared by the FoVs of viewpoints k1 and k2."""
    common = set(fov_tiles(grid, k1)) & set(fov_tiles(grid, k2))
    return tuple(sorted(common))


def default_grid() -> TileGrid:
    """7x5-tile plane with 2x2 FoVs, unit strides, 5.25 Gbit total (K = 24)."""
    return TileGrid(n_rows=5, n_cols=7, fov_rows=2, fov_cols=2,
                    delta_h=1, delta_v=1, total_bits=5_250_000_000)
