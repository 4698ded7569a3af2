"""Compile binary weight matrices onto fixed-size crossbar tiles.

Two layouts are supported:

``tacit``
    1T1R cells. Each weight vector runs down a column, its complement directly
    below it; the input is driven as ``concat(in, ~in)`` so every column sum is
    an XNOR popcount. Row tiles hold ``M // 2`` weight elements each.

``custbinary``
    2T2R cells. Each weight vector runs along a row of logical cells, every
    cell holding the pair ``(w, ~w)``; the input is interleaved the same way
    and a precharge sense amplifier reads one row's XNOR bits per step.

Tiles are laid out row-major over the logical ``m x n`` weight matrix and
partial tiles are zero padded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bits import BitMatrix, BitVector
from .errors import CapacityError, DimensionError

TACIT = "tacit"
CUSTBINARY = "custbinary"
MAPPINGS = (TACIT, CUSTBINARY)


@dataclass(frozen=True)
class CrossbarDims:
    """Crossbar size: ``rows`` cell rows by ``cols`` logical cells per row."""

    rows: int
    cols: int

    def __post_init__(self):
        if self.rows < 2 or self.cols < 1:
            raise CapacityError(f"crossbar {self.rows}x{self.cols} is too small (need M>=2, N>=1)")

    @classmethod
    def parse(cls, text: str) -> "CrossbarDims":
        try:
            m, n = text.lower().split("x")
            return cls(int(m), int(n))
        except ValueError as exc:
            if isinstance(exc, CapacityError):
                raise
            raise CapacityError(f"crossbar dims must look like MxN, got {text!r}") from None

    def __str__(self) -> str:
        return f"{self.rows}x{self.cols}"


@dataclass(frozen=True, eq=False)
class TilePlacement:
    """One programmed crossbar.

    ``cell_bits`` is ``rows x cols`` for tacit tiles and ``rows x 2*cols`` for
    custbinary tiles (device pairs at columns ``2k, 2k+1``).
    ``row_range``/``col_range`` index the logical weight matrix: element rows
    (vector positions) and weight vector columns.
    """

    tile_id: int
    grid_pos: tuple[int, int]
    mapping_kind: str
    dims: CrossbarDims
    cell_bits: np.ndarray
    row_range: tuple[int, int]
    col_range: tuple[int, int]
    complement_row_offset: int | None = None

    @property
    def slice_len(self) -> int:
        return self.row_range[1] - self.row_range[0]

    @property
    def vector_count(self) -> int:
        return self.col_range[1] - self.col_range[0]

    @property
    def rows_used(self) -> int:
        """Crossbar rows that carry mapped data."""
        if self.mapping_kind == TACIT:
            return 2 * self.slice_len
        return self.vector_count

    @property
    def columns_used(self) -> int:
        """Logical crossbar columns that carry mapped data."""
        if self.mapping_kind == TACIT:
            return self.vector_count
        return self.slice_len

    @property
    def devices_used(self) -> int:
        return 2 * self.slice_len * self.vector_count

    def decode(self) -> np.ndarray:
        """Recover the ``slice_len x vector_count`` weight block stored here."""
        L, k = self.slice_len, self.vector_count
        if self.mapping_kind == TACIT:
            return self.cell_bits[:L, :k].copy()
        return self.cell_bits[:k, 0:2 * L:2].T.copy()

    def with_flipped_cell(self, row: int, col: int) -> "TilePlacement":
        """Copy of this tile with one device bit inverted (fault injection)."""
        cells = self.cell_bits.copy()
        cells[row, col] ^= 1
        cells.setflags(write=False)
        return TilePlacement(self.tile_id, self.grid_pos, self.mapping_kind, self.dims, cells,
                             self.row_range, self.col_range, self.complement_row_offset)


@dataclass(frozen=True, eq=False)
class MappedLayer:
    kind: str
    dims: CrossbarDims
    m: int
    n: int
    tiles: tuple[tuple[TilePlacement, ...], ...]

    @property
    def post_len(self) -> int:
        """The vector length subtracted in ``2*popcount - len``."""
        return self.m

    @property
    def row_tiles(self) -> int:
        return len(self.tiles)

    @property
    def col_tiles(self) -> int:
        return len(self.tiles[0])

    def iter_tiles(self):
        for row in self.tiles:
            yield from row

    def tile(self, tile_id: int) -> TilePlacement:
        r, c = divmod(tile_id, self.col_tiles)
        return self.tiles[r][c]

    @property
    def devices_used(self) -> int:
        return sum(t.devices_used for t in self.iter_tiles())

    def encode_input(self, in_bits: BitVector) -> list[np.ndarray]:
        """Per-tile-group drive vectors for one input (see the mapping encoders)."""
        if self.kind == TACIT:
            return tacitmap_encode_input(in_bits, self)
        return custbinary_encode_input(in_bits, self)

    def replace_tile(self, tile: TilePlacement) -> "MappedLayer":
        r, c = tile.grid_pos
        rows = [list(row) for row in self.tiles]
        rows[r][c] = tile
        return MappedLayer(self.kind, self.dims, self.m, self.n, tuple(tuple(r) for r in rows))

    def to_dict(self) -> dict:
        """JSON-friendly dump of the tile grid."""
        return {
            "mapping": self.kind,
            "crossbar": str(self.dims),
            "m": self.m,
            "n": self.n,
            "post_len": self.post_len,
            "row_tiles": self.row_tiles,
            "col_tiles": self.col_tiles,
            "tiles": [
                {
                    "tile_id": t.tile_id,
                    "grid_pos": list(t.grid_pos),
                    "row_range": list(t.row_range),
                    "col_range": list(t.col_range),
                    "complement_row_offset": t.complement_row_offset,
                    "cells": ["".join(map(str, r)) for r in t.cell_bits.tolist()],
                }
                for t in self.iter_tiles()
            ],
        }


def partition(length: int, chunk: int) -> list[tuple[int, int]]:
    """Split ``range(length)`` into consecutive ``[start, stop)`` runs of at most ``chunk``."""
    if chunk < 1:
        raise CapacityError(f"tile capacity must be >= 1, got {chunk}")
    return [(s, min(length, s + chunk)) for s in range(0, length, chunk)]


def _weights_array(W: BitMatrix) -> np.ndarray:
    m, n = W.shape
    if m < 1 or n < 1:
        raise DimensionError(f"weight matrix must be non-empty, got {m}x{n}")
    return W.to_array()


def tacitmap_layout(W: BitMatrix, dims: CrossbarDims) -> MappedLayer:
    """Vertical layout: weight slice on top, its complement right below."""
    w = _weights_array(W)
    m, n = w.shape
    per_tile = dims.rows // 2
    if per_tile < 1:
        raise CapacityError(f"crossbar with {dims.rows} rows cannot hold a weight and its complement")
    row_parts, col_parts = partition(m, per_tile), partition(n, dims.cols)
    n_ct = len(col_parts)
    grid = []
    for r, (r0, r1) in enumerate(row_parts):
        L = r1 - r0
        row = []
        for c, (c0, c1) in enumerate(col_parts):
            cells = np.zeros((dims.rows, dims.cols), dtype=np.uint8)
            block = w[r0:r1, c0:c1]
            cells[:L, :c1 - c0] = block
            cells[L:2 * L, :c1 - c0] = 1 - block
            cells.setflags(write=False)
            row.append(TilePlacement(r * n_ct + c, (r, c), TACIT, dims, cells,
                                     (r0, r1), (c0, c1), complement_row_offset=L))
        grid.append(tuple(row))
    return MappedLayer(TACIT, dims, m, n, tuple(grid))


def tacitmap_encode_input(in_bits: BitVector, layer: MappedLayer) -> list[np.ndarray]:
    """One drive per row tile: ``concat(in[slice], ~in[slice])``."""
    if len(in_bits) != layer.m:
        raise DimensionError(f"input has {len(in_bits)} bits, layer vectors have {layer.m}")
    x = in_bits.to_array()
    drives = []
    for row in layer.tiles:
        r0, r1 = row[0].row_range
        s = x[r0:r1]
        d = np.concatenate([s, 1 - s])
        d.setflags(write=False)
        drives.append(d)
    return drives


def custbinary_layout(W: BitMatrix, dims: CrossbarDims) -> MappedLayer:
    """Horizontal layout: one weight vector per row of ``(w, ~w)`` device pairs."""
    w = _weights_array(W)
    m, n = w.shape
    vec_parts, elem_parts = partition(n, dims.rows), partition(m, dims.cols)
    n_ct = len(elem_parts)
    grid = []
    for r, (v0, v1) in enumerate(vec_parts):
        row = []
        for c, (e0, e1) in enumerate(elem_parts):
            cells = np.zeros((dims.rows, 2 * dims.cols), dtype=np.uint8)
            block = w[e0:e1, v0:v1].T  # one weight vector per crossbar row
            cells[:v1 - v0, 0:2 * (e1 - e0):2] = block
            cells[:v1 - v0, 1:2 * (e1 - e0):2] = 1 - block
            cells.setflags(write=False)
            row.append(TilePlacement(r * n_ct + c, (r, c), CUSTBINARY, dims, cells,
                                     (e0, e1), (v0, v1)))
        grid.append(tuple(row))
    return MappedLayer(CUSTBINARY, dims, m, n, tuple(grid))


def custbinary_encode_input(in_bits: BitVector, layer: MappedLayer) -> list[np.ndarray]:
    """One drive per column tile: ``(in_i, ~in_i)`` pairs aligned with the cells."""
    if len(in_bits) != layer.m:
        raise DimensionError(f"input has {len(in_bits)} bits, layer vectors have {layer.m}")
    x = in_bits.to_array()
    drives = []
    for tile in layer.tiles[0]:
        e0, e1 = tile.row_range
        d = np.empty(2 * (e1 - e0), dtype=np.uint8)
        d[0::2] = x[e0:e1]
        d[1::2] = 1 - x[e0:e1]
        d.setflags(write=False)
        drives.append(d)
    return drives


def layout(W: BitMatrix, dims: CrossbarDims, kind: str) -> MappedLayer:
    if kind == TACIT:
        return tacitmap_layout(W, dims)
    if kind == CUSTBINARY:
        return custbinary_layout(W, dims)
    raise ValueError(f"unknown mapping {kind!r}")
